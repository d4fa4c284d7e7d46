"""Terminal interface for fidelity-bounds."""

import argparse
import logging
import sys
from math import pi
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from src.acceptance import GROUPS, run_checks
from src.config import (
    GOLDEN_DIR,
    LOCALIZING_VARIANT,
    LOG_LEVEL,
    OUTPUT_DIR,
    THETA_SLACK,
    RunConfig,
    load_run_config,
)
from src.fidelity import evaluate_fidelity
from src.models import ConstraintMode, FidelityBoundsError, SolveStatus, SolverFailure, SweepResult
from src.ncpoly import format_polynomial
from src.relaxation import VariableIndex, build_localizing_skeleton, build_moment_skeleton, to_triplets
from src.scenarios import Scenario, get_scenario
from src.solver import analytic_chsh_baseline, assemble, sweep, to_sdpa
from src.strategy import (
    QuantumStrategy,
    bell_value,
    dump_strategy,
    load_strategy,
    noisy_strategy,
    pure_state,
    werner_strategy,
)
from src.templates import (
    CSV_HEADER,
    VALUE_AT_LEAST_HINT,
    csv_row,
    gnuplot_script,
    simulate_report,
    sweep_summary,
)

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
CROSS_CHECK_TOL = 1e-10


def status_cell(status: SolveStatus) -> str:
    colour = {"Optimal": "green", "Infeasible": "red"}.get(status.value, "yellow")
    return f"[{colour}]{status.value}[/{colour}]"


def fidelity_bar(value: float, width: int = 20) -> str:
    if np.isnan(value):
        return "[red]n/a[/red]"
    filled = int(max(0.0, min(1.0, (value - 0.5) * 2)) * width)
    bar = "█" * filled + "░" * (width - filled)
    return f"[cyan]{bar}[/cyan] {value:.6f}"


# --- sweep ---


def beta_grid(config: RunConfig, theta: float | None) -> list[float]:
    beta_min, beta_max = config.beta_bounds(theta)
    if config.beta_steps == 1:
        return [beta_max]
    return [float(b) for b in np.linspace(beta_min, beta_max, config.beta_steps)]


def render_csv(result: SweepResult, baseline: bool, timings: bool) -> str:
    lines = [CSV_HEADER]
    for p in result.points:
        lines.append(
            csv_row(
                p.beta,
                p.fidelity,
                analytic_chsh_baseline(min(p.beta, 2 * 2**0.5)) if baseline else None,
                p.report.status.value,
                p.report.runtime if timings else None,
            )
        )
    return "\n".join(lines) + "\n"


def output_path(config: RunConfig, scenario: Scenario, several: bool) -> Path:
    base = config.output or OUTPUT_DIR / f"{scenario.name}.csv"
    if several and scenario.theta is not None:
        return base.with_name(f"{base.stem}_theta{scenario.theta:.4f}{base.suffix or '.csv'}")
    return base


def show_sweep(result: SweepResult) -> None:
    table = Table(title=f"{result.scenario}: {result.mode.value}")
    table.add_column("beta", justify="right")
    table.add_column("fidelity bound", width=32)
    table.add_column("status")
    table.add_column("residuals", style="dim")
    for p in result.points:
        table.add_row(
            f"{p.beta:.6f}",
            fidelity_bar(p.fidelity),
            status_cell(p.report.status),
            f"{p.report.primal_residual:.1e} / {p.report.dual_residual:.1e}",
        )
    console.print(table)


def run_sweep(config: RunConfig, several: bool = False) -> int:
    thetas = config.thetas()
    several = several or len(thetas) > 1
    exit_code = EXIT_OK
    for theta in thetas:
        scenario = get_scenario(config.scenario, theta, config.level, config.localizing)
        result = sweep(
            scenario,
            beta_grid(config, theta),
            mode=config.mode,
            tolerance=config.tolerance,
            workers=config.workers,
        )
        path = output_path(config, scenario, several)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_csv(result, scenario.name == "chsh", config.timings))
        path.with_suffix(".gp").write_text(
            gnuplot_script(path.name, f"{scenario.descriptor}, {result.sequence}", scenario.name == "chsh")
        )

        show_sweep(result)
        optimal = sum(p.report.status == SolveStatus.OPTIMAL for p in result.points)
        console.print(Panel(
            sweep_summary(result.scenario, result.sequence, result.mode.value, optimal, len(result.points), str(path)),
            title="Sweep",
        ))
        if any(p.report.status == SolveStatus.INFEASIBLE for p in result.points):
            console.print(VALUE_AT_LEAST_HINT)
        if not result.all_optimal:
            exit_code = EXIT_FAILURE
    return exit_code


def cmd_sweep(args: argparse.Namespace) -> int:
    overrides = {
        "scenario": args.scenario,
        "beta_min": args.beta_min,
        "beta_max": args.beta_max,
        "beta_steps": args.beta_steps,
        "mode": args.mode,
        "level": args.level,
        "localizing": args.localizing,
        "tolerance": args.tolerance,
        "workers": args.workers,
        "output": args.output,
        "timings": args.timings or None,
    }
    if args.beta is not None:
        overrides.update(beta_min=args.beta, beta_max=args.beta, beta_steps=1)
    thetas = args.thetas or [args.theta]
    exit_code = EXIT_OK
    for theta in thetas:
        config = load_run_config(args.config, {**overrides, "theta": theta})
        exit_code = max(exit_code, run_sweep(config, several=len(thetas) > 1))
    return exit_code


# --- simulate ---


def build_strategy(args: argparse.Namespace, scenario: Scenario) -> QuantumStrategy:
    if args.load is not None:
        return load_strategy(args.load.read_text())
    if args.visibility is None:
        return scenario.optimal_strategy()
    if scenario.name == "chsh":
        return werner_strategy(args.visibility)
    return noisy_strategy(scenario.optimal_strategy(), args.visibility)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = get_scenario(args.scenario, args.theta)
    strategy = build_strategy(args, scenario)
    beta = bell_value(strategy, scenario.bell)
    reference = pure_state(scenario.reference.amplitudes)
    direct = float(np.trace(reference @ strategy.rho))
    device_independent = evaluate_fidelity(scenario.fidelity(), strategy)
    console.print(Panel(simulate_report(strategy.label, beta, direct, device_independent), title=scenario.descriptor))
    if args.dump is not None:
        args.dump.write_text(dump_strategy(strategy))
        console.print(f"[dim]strategy written to {args.dump}[/dim]")
    if abs(direct - device_independent) > CROSS_CHECK_TOL:
        logger.warning(f"overlap and DI fidelity differ by {abs(direct - device_independent):.3e}")
        return EXIT_FAILURE
    return EXIT_OK


# --- verify ---


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_checks(args.only, golden_dir=args.golden_dir)
    table = Table(title="Verification", show_lines=True)
    table.add_column("group", style="dim")
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail", style="dim", max_width=60)
    for r in results:
        table.add_row(r.group, r.name, "[green]pass[/green]" if r.passed else "[red]FAIL[/red]", r.detail)
    console.print(table)
    failed = sum(not r.passed for r in results)
    console.print(f"[bold]{len(results) - failed}/{len(results)} checks passed[/bold]")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


# --- dump ---


def cmd_dump(args: argparse.Namespace) -> int:
    scenario = get_scenario(args.scenario, args.theta, args.level, args.localizing or LOCALIZING_VARIANT)
    beta = args.beta if args.beta is not None else scenario.quantum_bound
    target = scenario.optimal_strategy() if args.mode == ConstraintMode.FULL_CORRELATION else None
    problem = assemble(scenario, beta, args.mode, target)

    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "problem.sdpa").write_text(to_sdpa(problem))
    (out / "fidelity.txt").write_text(format_polynomial(scenario.fidelity().polynomial))

    index = VariableIndex()
    skeletons = [("moment", build_moment_skeleton(scenario.sequence, index))]
    for name, operator in scenario.localizing_operators:
        skeletons.append(
            (name, build_localizing_skeleton(operator, scenario.localizing_sequence, scenario.sequence, index, name))
        )
    for name, skeleton in skeletons:
        (out / f"{name}.triplets").write_text(to_triplets(skeleton, index))
    (out / "variables.txt").write_text("".join(f"{i} {k}\n" for i, k in enumerate(index.keys())))

    console.print(Panel(
        f"{problem.variables} variables, {len(problem.blocks)} PSD blocks, "
        f"{problem.equality_rhs.size} equalities\nwritten to {out}",
        title=f"{scenario.descriptor} at beta={beta:.6f}",
    ))
    return EXIT_OK


# --- parser ---


def add_scenario_arguments(p: argparse.ArgumentParser, with_relaxation: bool = True) -> None:
    p.add_argument("--scenario", choices=("chsh", "tilted"), default=None)
    p.add_argument("--theta", type=float, default=None, help="tilted state angle in (0, pi/4]")
    if with_relaxation:
        p.add_argument("--level", type=int, default=None, help="sequence level (chsh) or extra moment level (tilted)")
        p.add_argument("--localizing", choices=("paired", "literal"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fidelity-bounds",
        description="Device-independent fidelity lower bounds from Bell violations",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="fidelity bound along a Bell-value grid; writes CSV + gnuplot script")
    add_scenario_arguments(p)
    p.add_argument("--thetas", type=float, nargs="+", default=None, help="one sweep per theta (tilted)")
    p.add_argument("--beta-min", type=float, default=None)
    p.add_argument("--beta-max", type=float, default=None)
    p.add_argument("--beta-steps", type=int, default=None)
    p.add_argument("--beta", type=float, default=None, help="single Bell value")
    p.add_argument("--mode", choices=[ConstraintMode.VALUE_EQUALS.value, ConstraintMode.VALUE_AT_LEAST.value], default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--config", type=Path, default=None, help="flat key = value run file")
    p.add_argument("--timings", action="store_true", help="write measured runtimes (CSV no longer byte-stable)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("simulate", help="Bell value and fidelity of an explicit strategy")
    add_scenario_arguments(p, with_relaxation=False)
    p.add_argument("--visibility", type=float, default=None)
    p.add_argument("--load", type=Path, default=None, help="strategy file to evaluate instead")
    p.add_argument("--dump", type=Path, default=None, help="write the strategy to this file")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", nargs="+", choices=GROUPS, default=None)
    p.add_argument("--golden-dir", type=Path, default=GOLDEN_DIR)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("dump", help="write the SDPA problem and skeleton triplets")
    add_scenario_arguments(p)
    p.add_argument("--beta", type=float, default=None, help="defaults to the quantum bound")
    p.add_argument("--mode", type=ConstraintMode, default=ConstraintMode.VALUE_EQUALS)
    p.add_argument("--output-dir", type=Path, default=OUTPUT_DIR / "dump")
    p.set_defaults(handler=cmd_dump)
    return parser


def setup_logging(verbose: int) -> None:
    level = {0: LOG_LEVEL, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    if hasattr(args, "scenario") and args.scenario is None:
        if args.theta is not None or getattr(args, "thetas", None):
            args.scenario = "tilted"
        elif args.command != "sweep":
            args.scenario = "chsh"
    if getattr(args, "theta", None) is not None and pi / 4 < args.theta <= pi / 4 + THETA_SLACK:
        args.theta = pi / 4

    try:
        code = args.handler(args)
    except ValidationError as e:
        for err in e.errors():
            console.print(f"[red]usage error:[/red] {err['msg']}")
        code = EXIT_USAGE
    except SolverFailure as e:
        console.print(f"[red]solver failure:[/red] {e}")
        code = EXIT_FAILURE
    except (FidelityBoundsError, FileNotFoundError) as e:
        console.print(f"[red]usage error:[/red] {e}")
        code = EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
