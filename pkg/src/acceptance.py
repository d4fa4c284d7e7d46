"""Verification suite run by `fidelity-bounds verify`."""

import itertools
import logging
from collections.abc import Callable, Iterable
from math import pi, sqrt
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from src.config import GOLDEN_DIR
from src.fidelity import chsh_fidelity_oracle, max_coefficient_gap, tilted_fidelity_oracle
from src.models import ConstraintMode, FidelityBoundsError, SolveStatus
from src.ncpoly import alice, bob, canonicalize, parse_polynomial
from src.relaxation import (
    build_level_sequence,
    build_localizing_skeleton,
    build_moment_skeleton,
    numeric_matrix,
    tilted_sequence,
)
from src.scenarios import Scenario, chsh_scenario, tilted_scenario
from src.solver import assemble, solve, sweep, to_sdpa
from src.strategy import (
    alpha_from_theta,
    bell_value,
    chsh_optimal_strategy,
    chsh_textbook_strategy,
    deterministic_strategy,
    mu_from_theta,
    populate_moments,
    theta_from_alpha,
    tilted_optimal_strategy,
    werner_strategy,
)

logger = logging.getLogger(__name__)

GROUPS = ("symbolic", "sequences", "strategies", "soundness", "endpoints", "sandwich", "local", "monotonicity", "determinism")

SYMBOLIC_TOL = 1e-12
EXACT_TOL = 1e-10
PSD_TOL = 1e-9
TILTED_THETAS = (pi / 8, pi / 6, pi / 4)


class CheckResult(BaseModel):
    group: str
    name: str
    passed: bool
    detail: str = ""


Check = Callable[[], tuple[bool, str]]


def _theta_grid(points: int) -> list[float]:
    return [pi / 4 * k / points for k in range(1, points + 1)]


# --- symbolic ---


def _golden(name: str, golden_dir: Path) -> Check:
    def check() -> tuple[bool, str]:
        path = golden_dir / name
        if not path.exists():
            return False, f"missing golden file {path}"
        expected = parse_polynomial(path.read_text())
        if name.startswith("chsh"):
            produced = chsh_scenario().fidelity().polynomial
        else:
            produced = tilted_scenario(pi / 6).fidelity().polynomial
        gap = max_coefficient_gap(produced, expected)
        return gap <= SYMBOLIC_TOL, f"max coefficient gap {gap:.3e}"

    return check


def _chsh_oracle() -> tuple[bool, str]:
    gap = max_coefficient_gap(chsh_scenario().fidelity().polynomial, chsh_fidelity_oracle().polynomial)
    return gap <= SYMBOLIC_TOL, f"max coefficient gap {gap:.3e}"


def _tilted_oracle() -> tuple[bool, str]:
    gaps = [
        max_coefficient_gap(tilted_scenario(t).fidelity().polynomial, tilted_fidelity_oracle(t).polynomial)
        for t in _theta_grid(10)
    ]
    return max(gaps) <= SYMBOLIC_TOL, f"worst gap over 10 thetas {max(gaps):.3e}"


# --- sequences ---


def _brute_force_count(level: int, bob_settings: int) -> int:
    letters = [alice(1), alice(2)] + [bob(i) for i in range(1, bob_settings + 1)]
    words = {
        canonicalize(raw)
        for n in range(level + 1)
        for raw in itertools.product(letters, repeat=n)
    }
    return sum(1 for w in words if w.degree <= level)


def _sequence_sizes() -> tuple[bool, str]:
    sizes = [len(build_level_sequence(level)) for level in (1, 2, 3)]
    brute = [_brute_force_count(level, 2) for level in (1, 2, 3)]
    tilted = len(tilted_sequence())
    ok = sizes == [5, 13, 25] and sizes == brute and tilted == 41
    return ok, f"levels 1-3: {sizes} (brute force {brute}); tilted: {tilted}"


# --- strategies ---


def _strategy_values() -> tuple[bool, str]:
    chsh = chsh_scenario()
    errors = [
        abs(bell_value(chsh_optimal_strategy(), chsh.bell) - 2 * sqrt(2)),
        abs(bell_value(chsh_textbook_strategy(), chsh.bell) - 2 * sqrt(2)),
    ]
    for theta in _theta_grid(20):
        scenario = tilted_scenario(theta)
        errors.append(abs(bell_value(tilted_optimal_strategy(theta), scenario.bell) - scenario.quantum_bound))
    worst = max(errors)
    return worst <= EXACT_TOL, f"worst Bell-value error {worst:.3e}"


def _parameter_relations() -> tuple[bool, str]:
    errors = []
    for theta in _theta_grid(20):
        alpha = alpha_from_theta(theta)
        errors.append(abs(theta_from_alpha(alpha) - theta))
        errors.append(abs(np.tan(mu_from_theta(theta)) - np.sin(2 * theta)))
    worst = max(errors)
    return worst <= EXACT_TOL, f"worst round-trip error {worst:.3e}"


# --- soundness ---


def _min_eig(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix).min())


def _soundness(scenario: Scenario, strategies: Iterable) -> tuple[bool, str]:
    moment = build_moment_skeleton(scenario.sequence)
    localizing = [
        build_localizing_skeleton(op, scenario.localizing_sequence, scenario.sequence, name=name)
        for name, op in scenario.localizing_operators
    ]
    worst = np.inf
    for s in strategies:
        for skeleton in [moment, *localizing]:
            moments = populate_moments(s, skeleton.keys())
            worst = min(worst, _min_eig(numeric_matrix(skeleton, moments)))
    return worst >= -PSD_TOL, f"smallest eigenvalue {worst:.3e}"


def _chsh_soundness() -> tuple[bool, str]:
    strategies = [chsh_optimal_strategy(), chsh_textbook_strategy(), werner_strategy(0.7)]
    strategies += [deterministic_strategy(a, b) for a in ((1, 1), (1, -1)) for b in ((1, 1), (-1, 1))]
    return _soundness(chsh_scenario(), strategies)


def _tilted_soundness() -> tuple[bool, str]:
    results = [_soundness(tilted_scenario(t), [tilted_optimal_strategy(t)]) for t in TILTED_THETAS]
    return all(ok for ok, _ in results), "; ".join(detail for _, detail in results)


# --- solver-backed checks ---


def _bound(scenario: Scenario, beta: float, mode: ConstraintMode = ConstraintMode.VALUE_EQUALS) -> tuple[float, str]:
    report = solve(assemble(scenario, beta, mode))
    if report.status != SolveStatus.OPTIMAL:
        raise FidelityBoundsError(f"solve at beta={beta:.6f} ended {report.status.value}: {report.message}")
    return report.bound, report.status.value


def _chsh_endpoint() -> tuple[bool, str]:
    scenario = chsh_scenario()
    bound, _ = _bound(scenario, scenario.quantum_bound, ConstraintMode.VALUE_AT_LEAST)
    return bound >= 0.999, f"f(2 sqrt2) = {bound:.8f}"


def _tilted_endpoint(theta: float) -> Check:
    def check() -> tuple[bool, str]:
        scenario = tilted_scenario(theta)
        bound, _ = _bound(scenario, scenario.quantum_bound, ConstraintMode.VALUE_AT_LEAST)
        return bound >= 0.99, f"f(Q) = {bound:.8f}"

    return check


def _werner_sandwich() -> tuple[bool, str]:
    scenario = chsh_scenario()
    gaps = []
    for v in (0.8, 0.85, 0.9, 0.95, 1.0):
        bound, _ = _bound(scenario, min(2 * sqrt(2) * v, scenario.quantum_bound))
        gaps.append(bound - (1 + 3 * v) / 4)
    return max(gaps) <= 1e-6, f"largest bound - overlap {max(gaps):.3e}"


def _local_point() -> tuple[bool, str]:
    bound, _ = _bound(chsh_scenario(), 2.0)
    limit = np.cos(pi / 8) ** 2 / 2
    return bound <= limit + 1e-6, f"f(2) = {bound:.8f} (all-Z point gives {limit:.8f})"


def _monotone() -> tuple[bool, str]:
    scenario = chsh_scenario()
    betas = np.linspace(2.0, scenario.quantum_bound, 20)
    result = sweep(scenario, betas, ConstraintMode.VALUE_AT_LEAST)
    values = [round(p.fidelity, 7) for p in result.points]
    ok = result.all_optimal and all(b >= a for a, b in zip(values, values[1:]))
    return ok, f"f from {values[0]:.7f} to {values[-1]:.7f}, all optimal: {result.all_optimal}"


def _deterministic() -> tuple[bool, str]:
    scenario = chsh_scenario()
    same_dump = to_sdpa(assemble(scenario, 2.5)) == to_sdpa(assemble(chsh_scenario(), 2.5))
    betas = [2.2, 2.5, 2.8]
    first = [f"{p.fidelity:.10f}" for p in sweep(scenario, betas).points]
    second = [f"{p.fidelity:.10f}" for p in sweep(scenario, betas).points]
    return same_dump and first == second, f"identical SDPA dump: {same_dump}; identical rows: {first == second}"


def checks(golden_dir: Path = GOLDEN_DIR) -> list[tuple[str, str, Check]]:
    registry: list[tuple[str, str, Check]] = [
        ("symbolic", "CHSH expansion matches closed form", _chsh_oracle),
        ("symbolic", "tilted expansion matches closed form", _tilted_oracle),
        ("symbolic", "CHSH golden file", _golden("chsh_fidelity.txt", golden_dir)),
        ("symbolic", "tilted golden file (theta=pi/6)", _golden("tilted_fidelity_pi6.txt", golden_dir)),
        ("sequences", "sequence sizes 5/13/25/41", _sequence_sizes),
        ("strategies", "optimal Bell values", _strategy_values),
        ("strategies", "alpha/theta/mu round trip", _parameter_relations),
        ("soundness", "CHSH moment matrices PSD", _chsh_soundness),
        ("soundness", "tilted moment and localizing matrices PSD", _tilted_soundness),
        ("endpoints", "CHSH f(2 sqrt2) >= 0.999", _chsh_endpoint),
    ]
    for label, theta in zip(("pi/8", "pi/6", "pi/4"), TILTED_THETAS):
        registry.append(("endpoints", f"tilted theta={label} f(Q) >= 0.99", _tilted_endpoint(theta)))
    registry += [
        ("sandwich", "Werner bound below overlap", _werner_sandwich),
        ("local", "f(2) below all-Z fidelity", _local_point),
        ("monotonicity", "ValueAtLeast sweep nondecreasing", _monotone),
        ("determinism", "reassembly and sweep reproducible", _deterministic),
    ]
    return registry


def run_checks(only: Iterable[str] | None = None, golden_dir: Path = GOLDEN_DIR) -> list[CheckResult]:
    selected = set(only) if only else set(GROUPS)
    results = []
    for group, name, check in checks(golden_dir):
        if group not in selected:
            continue
        try:
            passed, detail = check()
        except (FidelityBoundsError, ValueError) as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        level = logging.INFO if passed else logging.ERROR
        logger.log(level, f"[{group}] {name}: {'pass' if passed else 'FAIL'} ({detail})")
        results.append(CheckResult(group=group, name=name, passed=passed, detail=detail))
    return results
