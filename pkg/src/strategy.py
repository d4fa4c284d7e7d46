"""Exact two-qubit strategies: states, observables and word expectations.

These are the ground truth the relaxation is checked against: every strategy
built here is a feasible point of the SDP at its own Bell value.
"""

import itertools
import logging
from collections.abc import Iterable
from math import asin, atan, cos, pi, sin, sqrt

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.models import InvalidLetter, InvalidParameter, TiltedParameters
from src.ncpoly import Monomial, MomentKey, OperatorPolynomial, adjoint

logger = logging.getLogger(__name__)

I2 = np.eye(2)
Z = np.array([[1.0, 0.0], [0.0, -1.0]])
X = np.array([[0.0, 1.0], [1.0, 0.0]])

ATOL = 1e-12


class QuantumStrategy(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    label: str
    rho: np.ndarray  # 4x4 density matrix, A (x) B
    alice: tuple[np.ndarray, ...]
    bob: tuple[np.ndarray, ...]

    @model_validator(mode="after")
    def _check_physical(self) -> "QuantumStrategy":
        if self.rho.shape != (4, 4):
            raise InvalidParameter(f"state must be 4x4, got shape {self.rho.shape}")
        if abs(np.trace(self.rho) - 1.0) > ATOL:
            raise InvalidParameter(f"state must have unit trace, got {np.trace(self.rho)!r}")
        if not np.allclose(self.rho, self.rho.conj().T, atol=ATOL):
            raise InvalidParameter("state must be Hermitian")
        for name, ops in (("A", self.alice), ("B", self.bob)):
            for i, op in enumerate(ops, start=1):
                if not np.allclose(op, op.conj().T, atol=ATOL):
                    raise InvalidParameter(f"{name}{i} is not Hermitian")
                if not np.allclose(op @ op, I2, atol=ATOL):
                    raise InvalidParameter(f"{name}{i} does not square to the identity")
        return self

    @property
    def bob_settings(self) -> int:
        return len(self.bob)

    def word_operator(self, m: Monomial) -> np.ndarray:
        a = I2
        for i in m.alice:
            if i > len(self.alice):
                raise InvalidLetter(f"A{i}: strategy '{self.label}' has {len(self.alice)} Alice observables")
            a = a @ self.alice[i - 1]
        b = I2
        for i in m.bob:
            if i > len(self.bob):
                raise InvalidLetter(f"B{i}: strategy '{self.label}' has {len(self.bob)} Bob observables")
            b = b @ self.bob[i - 1]
        return np.kron(a, b)


def pure_state(amplitudes: Iterable[float]) -> np.ndarray:
    psi = np.asarray(list(amplitudes), dtype=float)
    return np.outer(psi, psi)


def chsh_reference_amplitudes() -> tuple[float, float, float, float]:
    # cos(pi/8)|Phi-> + sin(pi/8)|Psi+>, |Phi-> = (|00> - |11>)/sqrt2, |Psi+> = (|01> + |10>)/sqrt2
    c, s = cos(pi / 8) / sqrt(2), sin(pi / 8) / sqrt(2)
    return (c, s, s, -c)


def tilted_reference_amplitudes(theta: float) -> tuple[float, float, float, float]:
    check_theta(theta)
    return (cos(theta), 0.0, 0.0, sin(theta))


def chsh_optimal_strategy() -> QuantumStrategy:
    return QuantumStrategy(
        label="chsh-optimal",
        rho=pure_state(chsh_reference_amplitudes()),
        alice=(Z, X),
        bob=(Z, X),
    )


def chsh_textbook_strategy() -> QuantumStrategy:
    """|Phi+> with B = (Z +- X)/sqrt2: the unrotated frame."""
    return QuantumStrategy(
        label="chsh-textbook",
        rho=pure_state((1 / sqrt(2), 0.0, 0.0, 1 / sqrt(2))),
        alice=(Z, X),
        bob=((Z + X) / sqrt(2), (Z - X) / sqrt(2)),
    )


def check_theta(theta: float) -> None:
    if not 0 < theta <= pi / 4:
        raise InvalidParameter(f"theta must lie in (0, pi/4] = (0, {pi / 4:.10f}]; got {theta}")


def alpha_from_theta(theta: float) -> float:
    check_theta(theta)
    s2 = sin(2 * theta) ** 2
    return 2 * sqrt(max(0.0, (1 - s2) / (1 + s2)))


def mu_from_theta(theta: float) -> float:
    check_theta(theta)
    return atan(sin(2 * theta))


def theta_from_alpha(alpha: float) -> float:
    if not 0 <= alpha < 2:
        raise InvalidParameter(f"alpha must lie in [0, 2); got {alpha}")
    return asin(sqrt((4 - alpha**2) / (4 + alpha**2))) / 2


def tilted_parameters(theta: float) -> TiltedParameters:
    return TiltedParameters(theta=theta, alpha=alpha_from_theta(theta), mu=mu_from_theta(theta))


def tilted_optimal_strategy(theta: float) -> QuantumStrategy:
    mu = mu_from_theta(theta)
    return QuantumStrategy(
        label=f"tilted-optimal(theta={theta:.6f})",
        rho=pure_state(tilted_reference_amplitudes(theta)),
        alice=(Z, X),
        bob=(cos(mu) * Z + sin(mu) * X, cos(mu) * Z - sin(mu) * X, Z, X),
    )


def noisy_strategy(s: QuantumStrategy, visibility: float) -> QuantumStrategy:
    """Mix the state with white noise, keeping the measurements."""
    if not 0 <= visibility <= 1:
        raise InvalidParameter(f"visibility must lie in [0, 1]; got {visibility}")
    return s.model_copy(
        update={
            "label": f"{s.label}+noise(v={visibility:g})",
            "rho": visibility * s.rho + (1 - visibility) * np.eye(4) / 4,
        }
    )


def werner_strategy(visibility: float) -> QuantumStrategy:
    return noisy_strategy(chsh_optimal_strategy(), visibility)


def deterministic_strategy(alice_signs: Iterable[int], bob_signs: Iterable[int]) -> QuantumStrategy:
    """Local deterministic outcomes realised as +-Z on |00>."""
    alice_signs, bob_signs = tuple(alice_signs), tuple(bob_signs)
    if any(v not in (1, -1) for v in alice_signs + bob_signs):
        raise InvalidParameter("deterministic outcomes must be +1 or -1")
    return QuantumStrategy(
        label=f"deterministic(a={alice_signs}, b={bob_signs})",
        rho=pure_state((1.0, 0.0, 0.0, 0.0)),
        alice=tuple(v * Z for v in alice_signs),
        bob=tuple(v * Z for v in bob_signs),
    )


def evaluate_word(s: QuantumStrategy, m: Monomial) -> float:
    value = np.trace(s.rho @ s.word_operator(m))
    if abs(np.imag(value)) > 1e-10:
        logger.warning(f"<{m}> on {s.label} has imaginary part {np.imag(value):.3e}")
    return float(np.real(value))


def bell_value(s: QuantumStrategy, f: OperatorPolynomial) -> float:
    return sum(c * evaluate_word(s, m) for m, c in f.terms.items())


def populate_moments(s: QuantumStrategy, keys: Iterable[MomentKey]) -> dict[MomentKey, float]:
    moments = {}
    for key in keys:
        m = key.representative
        moments[key] = 0.5 * (evaluate_word(s, m) + evaluate_word(s, adjoint(m)))
    return moments


def local_bound(f: OperatorPolynomial, bob_settings: int = 2) -> float:
    """Largest value of f over local deterministic strategies."""
    bob_settings = max(bob_settings, f.bob_settings_needed())
    return max(
        bell_value(deterministic_strategy(a, b), f)
        for a in itertools.product((1, -1), repeat=2)
        for b in itertools.product((1, -1), repeat=bob_settings)
    )


# --- Text format: one "# <name>" header per matrix, rows of decimals ---


def dump_strategy(s: QuantumStrategy) -> str:
    blocks = [("label", None), ("rho", s.rho)]
    blocks += [(f"A{i}", op) for i, op in enumerate(s.alice, start=1)]
    blocks += [(f"B{i}", op) for i, op in enumerate(s.bob, start=1)]
    lines = []
    for name, matrix in blocks:
        if matrix is None:
            lines.append(f"# label {s.label}")
            continue
        lines.append(f"# {name}")
        lines.extend(" ".join(f"{x:.17g}" for x in row) for row in np.real(matrix))
    return "\n".join(lines) + "\n"


def load_strategy(text: str) -> QuantumStrategy:
    label = "loaded"
    matrices: dict[str, list[list[float]]] = {}
    current = None
    widths: dict[str, tuple[int, int]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("# label"):
            label = line[len("# label"):].strip()
        elif line.startswith("#"):
            current = line[1:].strip()
            matrices[current] = []
            widths.pop(current, None)
        elif current is None:
            raise InvalidParameter(f"line {number}: matrix row before any header: {line!r}")
        else:
            try:
                row = [float(x) for x in line.split()]
            except ValueError:
                raise InvalidParameter(f"line {number}: not a row of numbers: {line!r}") from None
            width, first = widths.setdefault(current, (len(row), number))
            if len(row) != width:
                raise InvalidParameter(
                    f"line {number}: {current} row has {len(row)} entries, line {first} has {width}"
                )
            matrices[current].append(row)

    def ops(party: str) -> tuple[np.ndarray, ...]:
        names = [n for n in matrices if n.startswith(party)]
        bad = [n for n in names if not n[1:].isdigit()]
        if bad:
            raise InvalidParameter(f"unknown block header {bad[0]!r}; expected rho, A<k> or B<k>")
        names.sort(key=lambda n: int(n[1:]))
        return tuple(np.array(matrices[n]) for n in names)

    if "rho" not in matrices:
        raise InvalidParameter("strategy dump has no '# rho' block")
    return QuantumStrategy(label=label, rho=np.array(matrices["rho"]), alice=ops("A"), bob=ops("B"))
