"""Assembly and solution of the fidelity-minimisation SDPs, and violation sweeps."""

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from math import sqrt

import cvxpy as cp
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict

from src.config import RANGE_SLACK, RESIDUAL_TOLERANCE, SOLVER, SOLVER_MAX_ITERS, SOLVER_TOLERANCE
from src.models import (
    ConstraintMode,
    InvalidParameter,
    SequenceContainment,
    SolveReport,
    SolveStatus,
    SweepPoint,
    SweepResult,
)
from src.ncpoly import IDENTITY, MomentKey, moment_key, parse_monomial
from src.relaxation import (
    LinearForm,
    LocalizingSkeleton,
    Skeleton,
    VariableIndex,
    build_localizing_skeleton,
    build_moment_skeleton,
    uncovered_keys,
)
from src.scenarios import Scenario
from src.strategy import QuantumStrategy, populate_moments

logger = logging.getLogger(__name__)

# Correlators pinned in FullCorrelation mode
CORRELATOR_WORDS = ("A1", "A2", "B1", "B2", "A1*B1", "A1*B2", "A2*B1", "A2*B2")

BASELINE_THRESHOLD = (16 + 14 * sqrt(2)) / 17


class PsdBlock(BaseModel):
    """Affine map y -> d x d symmetric matrix, stored row-major as a (d*d, n) sparse matrix."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    dimension: int
    coefficients: sp.csr_matrix

    def matrix(self, y: np.ndarray) -> np.ndarray:
        return (self.coefficients @ y).reshape(self.dimension, self.dimension)


class SdpProblem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scenario: str
    beta: float
    beta_range: tuple[float, float]
    mode: ConstraintMode
    keys: tuple[MomentKey, ...]
    blocks: tuple[PsdBlock, ...]
    equalities: sp.csr_matrix
    equality_rhs: np.ndarray
    equality_labels: tuple[str, ...]
    inequalities: sp.csr_matrix
    inequality_rhs: np.ndarray
    objective: np.ndarray
    bell_row: int | None = None  # row holding beta, in equalities or inequalities per mode

    @property
    def variables(self) -> int:
        return len(self.keys)

    def at_beta(self, beta: float) -> "SdpProblem":
        """Same problem with the Bell right-hand side moved to beta."""
        low, high = self.beta_range
        if not low - RANGE_SLACK <= beta <= high + RANGE_SLACK:
            raise InvalidParameter(f"beta must lie in [L, Q] = [{low:.10f}, {high:.10f}]; got {beta}")
        if self.bell_row is None:
            return self.model_copy(update={"beta": beta})
        field = "inequality_rhs" if self.mode == ConstraintMode.VALUE_AT_LEAST else "equality_rhs"
        rhs = getattr(self, field).copy()
        rhs[self.bell_row] = beta
        return self.model_copy(update={"beta": beta, field: rhs})


def _form_row(form: LinearForm, columns: dict[MomentKey, int], n: int) -> sp.csr_matrix:
    cols = [columns[k] for k in form]
    return sp.csr_matrix((list(form.values()), ([0] * len(cols), cols)), shape=(1, n))


def _block(skeleton: Skeleton, name: str, columns: dict[MomentKey, int], n: int) -> PsdBlock:
    d = skeleton.dimension
    rows, cols, data = [], [], []
    for i in range(d):
        for j in range(d):
            for key, c in skeleton.entry_form(i, j).items():
                rows.append(i * d + j)
                cols.append(columns[key])
                data.append(c)
    coefficients = sp.csr_matrix((data, (rows, cols)), shape=(d * d, n))
    return PsdBlock(name=name, dimension=d, coefficients=coefficients)


def _stack(rows: list[sp.csr_matrix], n: int) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((0, n))
    return sp.vstack(rows, format="csr")


def independent_rows(matrix: sp.csr_matrix, tol: float = 1e-10) -> list[int]:
    """Indices of a maximal linearly independent subset of rows, via pivoted QR."""
    if matrix.shape[0] == 0:
        return []
    _, r, pivots = la.qr(matrix.toarray().T, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal.size == 0 or diagonal[0] == 0.0:
        return []
    rank = int(np.sum(diagonal > tol * diagonal[0]))
    return sorted(int(p) for p in pivots[:rank])


def _hermiticity_rows(
    skeletons: list[tuple[str, Skeleton]], columns: dict[MomentKey, int], n: int
) -> tuple[list[sp.csr_matrix], list[str]]:
    forms, names = [], []
    for name, skeleton in skeletons:
        if isinstance(skeleton, LocalizingSkeleton):
            forms += skeleton.antisymmetric_forms
            names += [f"{name} hermitian {k}" for k in range(len(skeleton.antisymmetric_forms))]
    if not forms:
        return [], []
    block = _stack([_form_row(form, columns, n) for form in forms], n)
    keep = independent_rows(block)
    logger.info(f"{len(keep)} independent hermiticity equalities of {len(forms)}")
    return [block[k] for k in keep], [names[k] for k in keep]


def assemble(
    scenario: Scenario,
    beta: float,
    mode: ConstraintMode = ConstraintMode.VALUE_EQUALS,
    target: QuantumStrategy | None = None,
) -> SdpProblem:
    scenario.check_beta(beta)
    if mode == ConstraintMode.FULL_CORRELATION and target is None:
        raise InvalidParameter("FullCorrelation mode needs a target strategy to take correlators from")

    index = VariableIndex()
    skeletons: list[tuple[str, Skeleton]] = [("moment", build_moment_skeleton(scenario.sequence, index))]
    for name, operator in scenario.localizing_operators:
        skeleton = build_localizing_skeleton(
            operator, scenario.localizing_sequence, scenario.sequence, index, name=name
        )
        skeletons.append((name, skeleton))

    objective_form = scenario.fidelity().polynomial.key_form()
    bell_form = scenario.bell.key_form()
    for label, form in (("fidelity", objective_form), ("Bell functional", bell_form)):
        missing = uncovered_keys(form, (s for _, s in skeletons))
        if missing:
            names = ", ".join(str(k) for k in sorted(missing))
            raise SequenceContainment(f"{label} moments not covered by any PSD block: {names}")

    keys = tuple(index.keys())
    n = len(keys)
    columns = {k: i for i, k in enumerate(keys)}

    eq_rows = [_form_row({moment_key(IDENTITY): 1.0}, columns, n)]
    eq_rhs = [1.0]
    labels = ["normalization"]
    ineq_rows: list[sp.csr_matrix] = []
    ineq_rhs: list[float] = []
    bell_row = None
    if mode == ConstraintMode.VALUE_EQUALS:
        bell_row = len(eq_rows)
        eq_rows.append(_form_row(bell_form, columns, n))
        eq_rhs.append(beta)
        labels.append("bell")
    elif mode == ConstraintMode.VALUE_AT_LEAST:
        bell_row = 0
        ineq_rows.append(_form_row(bell_form, columns, n))
        ineq_rhs.append(beta)
    else:
        pinned = [moment_key(parse_monomial(w)) for w in CORRELATOR_WORDS]
        missing = [k for k in pinned if k not in columns]
        if missing:
            raise SequenceContainment(f"correlators not covered by the moment matrix: {', '.join(map(str, missing))}")
        values = populate_moments(target, pinned)
        for key in pinned:
            eq_rows.append(_form_row({key: 1.0}, columns, n))
            eq_rhs.append(values[key])
            labels.append(f"<{key}>")

    hermitian_rows, hermitian_labels = _hermiticity_rows(skeletons, columns, n)
    eq_rows += hermitian_rows
    eq_rhs += [0.0] * len(hermitian_rows)
    labels += hermitian_labels

    objective = np.zeros(n)
    for key, c in objective_form.items():
        objective[columns[key]] = c

    problem = SdpProblem(
        scenario=scenario.descriptor,
        beta=beta,
        beta_range=(scenario.local_bound, scenario.quantum_bound),
        mode=mode,
        keys=keys,
        blocks=tuple(_block(s, name, columns, n) for name, s in skeletons),
        equalities=_stack(eq_rows, n),
        equality_rhs=np.array(eq_rhs),
        equality_labels=tuple(labels),
        inequalities=_stack(ineq_rows, n),
        inequality_rhs=np.array(ineq_rhs),
        objective=objective,
        bell_row=bell_row,
    )
    sizes = ", ".join(f"{b.name} {b.dimension}x{b.dimension}" for b in problem.blocks)
    logger.info(
        f"assembled {problem.scenario} at beta={beta:.6f} ({mode.value}): {n} variables, "
        f"{len(eq_rhs)} equalities, blocks {sizes}"
    )
    return problem


def _min_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((matrix + matrix.T) / 2).min())


def primal_residual(problem: SdpProblem, y: np.ndarray) -> float:
    """Worst of equality violation, inequality shortfall and PSD-block negativity at y."""
    residuals = [0.0]
    if problem.equality_rhs.size:
        residuals.append(float(np.abs(problem.equalities @ y - problem.equality_rhs).max()))
    if problem.inequality_rhs.size:
        residuals.append(float(np.maximum(problem.inequality_rhs - problem.inequalities @ y, 0.0).max()))
    for block in problem.blocks:
        residuals.append(max(0.0, -_min_eigenvalue(block.matrix(y))))
    return max(residuals)


def _solver_options(solver: str, tolerance: float) -> dict:
    if solver == "CLARABEL":
        return {"tol_gap_abs": tolerance, "tol_gap_rel": tolerance, "tol_feas": tolerance, "max_iter": SOLVER_MAX_ITERS}
    if solver == "SCS":
        return {"eps_abs": tolerance, "eps_rel": tolerance, "max_iters": SOLVER_MAX_ITERS * 100}
    return {}


def solve(problem: SdpProblem, tolerance: float = SOLVER_TOLERANCE, solver: str = SOLVER) -> SolveReport:
    y = cp.Variable(problem.variables)
    psd = [
        cp.reshape(block.coefficients @ y, (block.dimension, block.dimension), order="C") >> 0
        for block in problem.blocks
    ]
    constraints = [*psd, problem.equalities @ y == problem.equality_rhs]
    if problem.inequality_rhs.size:
        constraints.append(problem.inequalities @ y >= problem.inequality_rhs)
    program = cp.Problem(cp.Minimize(problem.objective @ y), constraints)

    start = time.perf_counter()
    try:
        program.solve(solver=solver, **_solver_options(solver, tolerance))
    except cp.SolverError as e:
        runtime = time.perf_counter() - start
        logger.warning(f"{solver} failed on {problem.scenario} at beta={problem.beta:.6f}: {e}")
        return SolveReport(
            status=SolveStatus.NUMERICAL_TROUBLE,
            bound=float("nan"),
            primal_residual=float("inf"),
            dual_residual=float("inf"),
            runtime=runtime,
            backend_status="solver_error",
            message=str(e),
        )
    runtime = time.perf_counter() - start

    backend = str(program.status)
    if backend in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        logger.warning(f"{problem.scenario} infeasible at beta={problem.beta:.6f} ({backend})")
        return SolveReport(
            status=SolveStatus.INFEASIBLE,
            bound=float("nan"),
            primal_residual=float("inf"),
            dual_residual=float("inf"),
            runtime=runtime,
            backend_status=backend,
            message="relaxation infeasible at this Bell value; ValueAtLeast mode may help near Q",
        )
    if y.value is None:
        return SolveReport(
            status=SolveStatus.NUMERICAL_TROUBLE,
            bound=float("nan"),
            primal_residual=float("inf"),
            dual_residual=float("inf"),
            runtime=runtime,
            backend_status=backend,
            message="backend returned no primal point",
        )

    primal = primal_residual(problem, y.value)
    duals = [c.dual_value for c in psd if c.dual_value is not None]
    dual = max((max(0.0, -_min_eigenvalue(np.asarray(d))) for d in duals), default=float("nan"))
    certified = primal <= RESIDUAL_TOLERANCE and (np.isnan(dual) or dual <= RESIDUAL_TOLERANCE)
    # an inaccurate backend finish still counts once our own residuals pass
    accepted = backend in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    status = SolveStatus.OPTIMAL if accepted and certified else SolveStatus.NUMERICAL_TROUBLE
    if status == SolveStatus.OPTIMAL and backend != cp.OPTIMAL:
        logger.info(f"{problem.scenario} at beta={problem.beta:.6f}: {backend} accepted, primal residual {primal:.2e}")
    bound = float(problem.objective @ y.value)
    message = ""
    if status != SolveStatus.OPTIMAL:
        message = f"backend {backend}, primal residual {primal:.2e}, dual residual {dual:.2e}"
        logger.warning(f"{problem.scenario} at beta={problem.beta:.6f}: {message}")
    logger.info(f"{problem.scenario} beta={problem.beta:.6f}: f >= {bound:.8f} ({status.value}, {runtime:.2f}s)")
    return SolveReport(
        status=status,
        bound=bound,
        primal_residual=primal,
        dual_residual=dual,
        runtime=runtime,
        backend_status=backend,
        message=message,
    )


def _solve_point(problem: SdpProblem, beta: float, tolerance: float, solver: str) -> SolveReport:
    return solve(problem.at_beta(beta), tolerance=tolerance, solver=solver)


def _failed(beta: float, e: Exception) -> SweepPoint:
    logger.error(f"sweep point beta={beta:.6f} failed: {e}")
    report = SolveReport(
        status=SolveStatus.NUMERICAL_TROUBLE,
        bound=float("nan"),
        primal_residual=float("inf"),
        dual_residual=float("inf"),
        runtime=0.0,
        backend_status="error",
        message=str(e),
    )
    return SweepPoint(beta=beta, fidelity=report.bound, report=report)


def sweep(
    scenario: Scenario,
    betas: Sequence[float],
    mode: ConstraintMode = ConstraintMode.VALUE_EQUALS,
    tolerance: float = SOLVER_TOLERANCE,
    solver: str = SOLVER,
    workers: int = 1,
    target: QuantumStrategy | None = None,
) -> SweepResult:
    """One solve per beta; failed points are kept and flagged, in grid order."""
    betas = [float(b) for b in betas]
    if not betas:
        raise InvalidParameter("beta grid must not be empty")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise InvalidParameter("beta grid must be strictly increasing")
    for beta in betas:
        scenario.check_beta(beta)

    template = assemble(scenario, betas[0], mode, target)
    points: list[SweepPoint] = []
    if workers <= 1:
        for beta in betas:
            try:
                report = _solve_point(template, beta, tolerance, solver)
                points.append(SweepPoint(beta=beta, fidelity=report.bound, report=report))
            except Exception as e:
                points.append(_failed(beta, e))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_solve_point, template, beta, tolerance, solver) for beta in betas]
            for beta, future in zip(betas, futures):
                try:
                    report = future.result()
                    points.append(SweepPoint(beta=beta, fidelity=report.bound, report=report))
                except Exception as e:
                    points.append(_failed(beta, e))

    result = SweepResult(
        scenario=scenario.descriptor,
        sequence=scenario.sequence_descriptor,
        mode=mode,
        points=points,
    )
    if not result.all_optimal:
        bad = sum(p.report.status != SolveStatus.OPTIMAL for p in points)
        logger.warning(f"{bad} of {len(points)} sweep points on {scenario.descriptor} are not Optimal")
    return result


def analytic_chsh_baseline(beta: float) -> float:
    """Closed-form comparison curve, 1/2 + 1/2 (beta - beta*)/(2 sqrt2 - beta*), floored at 1/2."""
    if not 2.0 - 1e-9 <= beta <= 2 * sqrt(2) + 1e-9:
        raise InvalidParameter(f"beta must lie in [2, 2 sqrt2] = [2, {2 * sqrt(2):.10f}]; got {beta}")
    value = 0.5 + 0.5 * (beta - BASELINE_THRESHOLD) / (2 * sqrt(2) - BASELINE_THRESHOLD)
    return max(0.5, value)


def to_sdpa(problem: SdpProblem) -> str:
    """SDPA sparse text: sum_i y_i F_i - F_0 >= 0, equalities split into a diagonal block."""
    n = problem.variables
    m_eq = problem.equality_rhs.size
    m_in = problem.inequality_rhs.size
    lp_size = 2 * m_eq + m_in
    sizes = [b.dimension for b in problem.blocks] + ([-lp_size] if lp_size else [])
    lines = [
        f'"{problem.scenario} beta={problem.beta:.10f} mode={problem.mode.value}',
        f"{n} = mDIM",
        f"{len(sizes)} = nBLOCK",
        " ".join(str(s) for s in sizes) + " = bLOCKsTRUCT",
        " ".join(f"{c:.17g}" for c in problem.objective),
    ]
    entries: list[tuple[int, int, int, int, float]] = []
    for blk, block in enumerate(problem.blocks, start=1):
        coo = block.coefficients.tocoo()
        d = block.dimension
        for row, var, value in zip(coo.row, coo.col, coo.data):
            i, j = divmod(int(row), d)
            if i <= j and value != 0.0:
                entries.append((int(var) + 1, blk, i + 1, j + 1, float(value)))
    if lp_size:
        lp = len(problem.blocks) + 1
        eq = problem.equalities.tocoo()
        for row, var, value in zip(eq.row, eq.col, eq.data):
            entries.append((int(var) + 1, lp, 2 * int(row) + 1, 2 * int(row) + 1, float(value)))
            entries.append((int(var) + 1, lp, 2 * int(row) + 2, 2 * int(row) + 2, -float(value)))
        for row, rhs in enumerate(problem.equality_rhs):
            entries.append((0, lp, 2 * row + 1, 2 * row + 1, float(rhs)))
            entries.append((0, lp, 2 * row + 2, 2 * row + 2, -float(rhs)))
        ineq = problem.inequalities.tocoo()
        for row, var, value in zip(ineq.row, ineq.col, ineq.data):
            k = 2 * m_eq + int(row) + 1
            entries.append((int(var) + 1, lp, k, k, float(value)))
        for row, rhs in enumerate(problem.inequality_rhs):
            k = 2 * m_eq + row + 1
            entries.append((0, lp, k, k, float(rhs)))
    for mat, blk, i, j, value in sorted(entries):
        lines.append(f"{mat} {blk} {i} {j} {value:.17g}")
    return "\n".join(lines) + "\n"
