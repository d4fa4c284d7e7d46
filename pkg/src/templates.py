"""All text templates: CSV layout, gnuplot scripts and terminal report bodies."""

CSV_HEADER = "beta,fidelity,baseline,status,runtime_s"


def csv_row(beta: float, fidelity: float, baseline: float | None, status: str, runtime: float | None) -> str:
    baseline_text = "" if baseline is None else f"{baseline:.10f}"
    runtime_text = "0.0" if runtime is None else f"{runtime:.2f}"
    return f"{beta:.10f},{fidelity:.10f},{baseline_text},{status},{runtime_text}"


def gnuplot_script(csv_name: str, title: str, with_baseline: bool) -> str:
    """Plot script that reads the CSV next to it and writes a PNG of the same stem."""
    stem = csv_name.rsplit(".", 1)[0]
    baseline = (
        f""", \\
     '{csv_name}' skip 1 using 1:3 with lines dashtype 2 linewidth 2 title 'analytic baseline'"""
        if with_baseline
        else ""
    )
    return f"""# fidelity lower bound vs Bell violation
set datafile separator ','
set key left top
set xlabel 'Bell value {{/Symbol b}}'
set ylabel 'fidelity lower bound f'
set yrange [0.4:1.02]
set grid
set title '{title}'
set terminal pngcairo size 800,600
set output '{stem}.png'
plot '{csv_name}' skip 1 using 1:2 with linespoints pointtype 7 linewidth 2 title 'SDP bound'{baseline}
"""


def simulate_report(label: str, beta: float, direct: float, device_independent: float) -> str:
    return (
        f"[bold]{label}[/bold]\n"
        f"Bell value:              {beta:.10f}\n"
        f"overlap <psi|rho|psi>:   {direct:.10f}\n"
        f"DI fidelity polynomial:  {device_independent:.10f}"
    )


def sweep_summary(scenario: str, sequence: str, mode: str, optimal: int, total: int, path: str) -> str:
    colour = "green" if optimal == total else "red"
    return (
        f"[bold]{scenario}[/bold]  mode={mode}\n"
        f"[dim]sequence: {sequence}[/dim]\n"
        f"[{colour}]{optimal}/{total} points Optimal[/{colour}]\n"
        f"CSV: {path}"
    )


VALUE_AT_LEAST_HINT = (
    "[yellow]Some points are infeasible under ValueEquals; "
    "re-run with --mode ValueAtLeast for a guaranteed-monotone curve.[/yellow]"
)
