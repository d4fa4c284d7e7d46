import os
from math import pi
from pathlib import Path

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, Field, model_validator

from src.models import ConstraintMode
from src.strategy import alpha_from_theta

load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent

# Solver backend
SOLVER = os.getenv("SOLVER", "CLARABEL")
SOLVER_TOLERANCE = float(os.getenv("SOLVER_TOLERANCE", "1e-8"))
RESIDUAL_TOLERANCE = float(os.getenv("RESIDUAL_TOLERANCE", "1e-6"))
SOLVER_MAX_ITERS = int(os.getenv("SOLVER_MAX_ITERS", "500"))

# Relaxation defaults
DEFAULT_LEVEL = int(os.getenv("DEFAULT_LEVEL", "3"))
LOCALIZING_VARIANT = os.getenv("LOCALIZING_VARIANT", "paired")  # paired | literal

# Sweeps
DEFAULT_WORKERS = int(os.getenv("DEFAULT_WORKERS", "1"))
DEFAULT_BETA_STEPS = int(os.getenv("DEFAULT_BETA_STEPS", "20"))
DEFAULT_THETAS = (pi / 8, pi / 6, pi / 4)
OUTPUT_DIR = Path(os.getenv("OUTPUT_DIR", "out"))

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
GOLDEN_DIR = Path(os.getenv("GOLDEN_DIR", str(PROJECT_ROOT / "tests" / "golden")))

# Numerical slack when range-checking user input against L, Q and pi/4
RANGE_SLACK = 1e-9
THETA_SLACK = 1e-4


class RunConfig(BaseModel):
    scenario: str = "chsh"
    theta: float | None = None
    beta_min: float | None = None
    beta_max: float | None = None
    beta_steps: int = DEFAULT_BETA_STEPS
    mode: ConstraintMode = ConstraintMode.VALUE_EQUALS
    level: int | None = None  # None: DEFAULT_LEVEL for chsh, S' for tilted
    localizing: str = LOCALIZING_VARIANT
    tolerance: float = SOLVER_TOLERANCE
    workers: int = Field(default=DEFAULT_WORKERS, ge=1)
    output: Path | None = None
    timings: bool = False

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if self.scenario not in ("chsh", "tilted"):
            raise ValueError(f"scenario must be one of chsh, tilted; got {self.scenario!r}")
        if self.beta_steps < 1:
            raise ValueError(f"beta_steps must be >= 1; got {self.beta_steps}")
        if self.level is not None and self.level < 1:
            raise ValueError(f"level must be >= 1; got {self.level}")
        if self.localizing not in ("paired", "literal"):
            raise ValueError(f"localizing must be paired or literal; got {self.localizing!r}")
        if self.mode == ConstraintMode.FULL_CORRELATION:
            raise ValueError("FullCorrelation mode needs a target correlation and is not available for sweeps")
        if self.scenario == "chsh" and self.theta is not None:
            raise ValueError("theta applies to the tilted scenario only")
        if self.theta is not None and not 0 < self.theta <= pi / 4 + THETA_SLACK:
            raise ValueError(f"theta must lie in (0, pi/4] = (0, {pi / 4:.10f}]; got {self.theta}")
        for theta in self.thetas():
            low, high = scenario_range(self.scenario, theta)
            for name in ("beta_min", "beta_max"):
                value = getattr(self, name)
                if value is not None and not low - RANGE_SLACK <= value <= high + RANGE_SLACK:
                    raise ValueError(
                        f"{name} must lie in [L, Q] = [{low:.10f}, {high:.10f}] for {self.scenario}; got {value}"
                    )
            beta_min, beta_max = self.beta_bounds(theta)
            if beta_max < beta_min:
                raise ValueError(f"beta_min ({beta_min}) exceeds beta_max ({beta_max})")
            if self.beta_steps > 1 and beta_max == beta_min:
                raise ValueError("a single beta value needs beta_steps = 1")
        return self

    def thetas(self) -> tuple[float | None, ...]:
        if self.scenario == "chsh":
            return (None,)
        if self.theta is not None:
            return (min(self.theta, pi / 4),)
        return DEFAULT_THETAS

    def beta_bounds(self, theta: float | None) -> tuple[float, float]:
        low, high = scenario_range(self.scenario, theta)
        beta_min = low if self.beta_min is None else max(low, min(self.beta_min, high))
        beta_max = high if self.beta_max is None else max(low, min(self.beta_max, high))
        return beta_min, beta_max


def scenario_range(scenario: str, theta: float | None) -> tuple[float, float]:
    """Local bound L and quantum bound Q of the named scenario."""
    if scenario == "chsh":
        return 2.0, 2.0 * 2.0**0.5
    alpha = alpha_from_theta(min(theta, pi / 4))
    return 2.0 + alpha, (8.0 + 2.0 * alpha**2) ** 0.5


def load_run_config(path: Path | None, overrides: dict) -> RunConfig:
    """Merge a flat `key = value` file with CLI overrides (flags win)."""
    values: dict = {}
    if path is not None:
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        values.update({k: v for k, v in dotenv_values(path).items() if v not in (None, "")})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)
