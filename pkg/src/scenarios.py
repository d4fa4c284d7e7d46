"""Bell scenarios: functional, bounds, reference state, Choi grids and sequence presets."""

import logging
from math import cos, pi, sin, sqrt

from pydantic import BaseModel, ConfigDict

from src.config import DEFAULT_LEVEL, LOCALIZING_VARIANT, RANGE_SLACK
from src.fidelity import ChoiBlockGrid, FidelityFunctional, choi_blocks, fidelity_polynomial
from src.models import InvalidParameter, ReferenceState, TiltedParameters
from src.ncpoly import OperatorPolynomial, alice, bob, parse_polynomial
from src.relaxation import SequenceSet, build_level_sequence, sequence_from_monomials, tilted_sequence
from src.strategy import (
    QuantumStrategy,
    chsh_optimal_strategy,
    chsh_reference_amplitudes,
    check_theta,
    tilted_optimal_strategy,
    tilted_parameters,
    tilted_reference_amplitudes,
)

logger = logging.getLogger(__name__)

SCENARIOS = ("chsh", "tilted")
LOCALIZING_VARIANTS = ("paired", "literal")


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    parameters: TiltedParameters | None = None
    bell: OperatorPolynomial
    local_bound: float
    quantum_bound: float
    reference: ReferenceState
    alice_choi: ChoiBlockGrid
    bob_choi: ChoiBlockGrid
    sequence: SequenceSet
    localizing_sequence: SequenceSet | None = None
    localizing_operators: tuple[tuple[str, OperatorPolynomial], ...] = ()

    @property
    def theta(self) -> float | None:
        return self.parameters.theta if self.parameters else None

    @property
    def bob_settings(self) -> int:
        return 4 if self.name == "tilted" else 2

    @property
    def descriptor(self) -> str:
        if self.parameters is None:
            return self.name
        return f"{self.name}(theta={self.parameters.theta:.6f})"

    @property
    def sequence_descriptor(self) -> str:
        text = f"{self.sequence.name} [{len(self.sequence)}]"
        if self.localizing_sequence is not None:
            names = "+".join(name for name, _ in self.localizing_operators)
            text += f", {names} on {self.localizing_sequence.name} [{len(self.localizing_sequence)}]"
        return text

    def fidelity(self) -> FidelityFunctional:
        return fidelity_polynomial(self.reference, self.alice_choi, self.bob_choi)

    def optimal_strategy(self) -> QuantumStrategy:
        if self.parameters is None:
            return chsh_optimal_strategy()
        return tilted_optimal_strategy(self.parameters.theta)

    def check_beta(self, beta: float) -> None:
        if not self.local_bound - RANGE_SLACK <= beta <= self.quantum_bound + RANGE_SLACK:
            raise InvalidParameter(
                f"beta must lie in [L, Q] = [{self.local_bound:.10f}, {self.quantum_bound:.10f}] "
                f"for {self.descriptor}; got {beta}"
            )


def chsh_functional() -> OperatorPolynomial:
    return parse_polynomial("1 A1*B1\n1 A1*B2\n1 A2*B1\n-1 A2*B2\n")


def tilted_functional(alpha: float) -> OperatorPolynomial:
    if not 0 <= alpha < 2:
        raise InvalidParameter(f"alpha must lie in [0, 2); got {alpha}")
    return chsh_functional() + alpha * OperatorPolynomial.from_letter(alice(1))


def chsh_scenario(level: int = DEFAULT_LEVEL) -> Scenario:
    return Scenario(
        name="chsh",
        bell=chsh_functional(),
        local_bound=2.0,
        quantum_bound=2 * sqrt(2),
        reference=ReferenceState(amplitudes=chsh_reference_amplitudes()),
        alice_choi=choi_blocks(alice(1), alice(2)),
        bob_choi=choi_blocks(bob(1), bob(2)),
        sequence=build_level_sequence(level, bob_settings=2),
    )


def localizing_operators(mu: float, variant: str = LOCALIZING_VARIANT) -> tuple[tuple[str, OperatorPolynomial], ...]:
    """B3(B1+B2)/cos mu and B4(B1-B2)/sin mu; `literal` puts B3 in both."""
    if variant not in LOCALIZING_VARIANTS:
        raise InvalidParameter(f"localizing variant must be one of {', '.join(LOCALIZING_VARIANTS)}; got {variant!r}")
    b1, b2, b3, b4 = (OperatorPolynomial.from_letter(bob(i)) for i in range(1, 5))
    second = b4 if variant == "paired" else b3
    return (
        ("L1", b3 * (b1 + b2) / cos(mu)),
        ("L2", second * (b1 - b2) / sin(mu)),
    )


def tilted_scenario(theta: float, variant: str = LOCALIZING_VARIANT, level: int | None = None) -> Scenario:
    """Tilted-CHSH scenario; `level` grows the moment sequence past S' with all words up to that length."""
    check_theta(theta)
    params = tilted_parameters(theta)
    sprime = tilted_sequence()
    sequence = sprime
    if level is not None:
        grown = build_level_sequence(level, bob_settings=4)
        sequence = sequence_from_monomials([*sprime.monomials, *grown.monomials], name=f"S'+level-{level}")
    return Scenario(
        name="tilted",
        parameters=params,
        bell=tilted_functional(params.alpha),
        local_bound=2.0 + params.alpha,
        quantum_bound=sqrt(8.0 + 2.0 * params.alpha**2),
        reference=ReferenceState(amplitudes=tilted_reference_amplitudes(theta)),
        alice_choi=choi_blocks(alice(1), alice(2)),
        bob_choi=choi_blocks(bob(3), bob(4)),
        sequence=sequence,
        localizing_sequence=sprime,
        localizing_operators=localizing_operators(params.mu, variant),
    )


def get_scenario(
    name: str,
    theta: float | None = None,
    level: int | None = None,
    variant: str = LOCALIZING_VARIANT,
) -> Scenario:
    if name == "chsh":
        if theta is not None:
            raise InvalidParameter("theta applies to the tilted scenario only")
        return chsh_scenario(level if level is not None else DEFAULT_LEVEL)
    if name == "tilted":
        if theta is None:
            raise InvalidParameter(f"tilted scenario needs theta in (0, pi/4] = (0, {pi / 4:.10f}]")
        return tilted_scenario(theta, variant=variant, level=level)
    raise InvalidParameter(f"scenario must be one of {', '.join(SCENARIOS)}; got {name!r}")
