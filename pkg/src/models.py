from enum import Enum
from math import isclose, sin, sqrt, tan

from pydantic import BaseModel, ConfigDict, Field, model_validator


class FidelityBoundsError(Exception):
    """Base class for every error raised by the library."""


class InvalidLetter(FidelityBoundsError):
    pass


class InvalidParameter(FidelityBoundsError):
    pass


class SequenceContainment(FidelityBoundsError):
    pass


class SolverFailure(FidelityBoundsError):
    pass


class ConstraintMode(str, Enum):
    VALUE_EQUALS = "ValueEquals"
    VALUE_AT_LEAST = "ValueAtLeast"
    FULL_CORRELATION = "FullCorrelation"


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_TROUBLE = "NumericalTrouble"


class TiltedParameters(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: float  # radians, (0, pi/4]
    alpha: float  # [0, 2)
    mu: float  # radians, (0, pi/2)

    @model_validator(mode="after")
    def _check_relations(self) -> "TiltedParameters":
        s = sin(2 * self.theta)
        root = sqrt((4 - self.alpha**2) / (4 + self.alpha**2))
        if not (isclose(tan(self.mu), s, abs_tol=1e-12) and isclose(s, root, abs_tol=1e-12)):
            raise InvalidParameter(
                f"tan(mu) = sin(2 theta) = sqrt((4 - alpha^2)/(4 + alpha^2)) violated for "
                f"theta={self.theta}, alpha={self.alpha}, mu={self.mu}"
            )
        return self


class ReferenceState(BaseModel):
    """Real two-qubit target state, amplitudes ordered |00>, |01>, |10>, |11>."""

    model_config = ConfigDict(frozen=True)

    amplitudes: tuple[float, float, float, float]

    @model_validator(mode="after")
    def _check_norm(self) -> "ReferenceState":
        norm = sum(a * a for a in self.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParameter(f"reference state must have unit norm, got sum of squares {norm!r}")
        return self

    def amplitude(self, alice: int, bob: int) -> float:
        return self.amplitudes[2 * alice + bob]


class SolveReport(BaseModel):
    status: SolveStatus
    bound: float
    primal_residual: float
    dual_residual: float
    runtime: float  # seconds
    backend_status: str = ""
    message: str = ""


class SweepPoint(BaseModel):
    beta: float
    fidelity: float
    report: SolveReport


class SweepResult(BaseModel):
    scenario: str
    sequence: str
    mode: ConstraintMode
    points: list[SweepPoint] = Field(default_factory=list)

    @property
    def all_optimal(self) -> bool:
        return all(p.report.status == SolveStatus.OPTIMAL for p in self.points)
