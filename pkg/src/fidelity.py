"""Device-independent fidelity objective.

The identity channel's Choi matrix |phi+><phi+| is written blockwise in a
party's two observables, F and S:

    [[(1 + F)/2,     (S - S F)/2],
     [(S - F S)/2,   (1 - F)/2  ]]

Contracting Alice's and Bob's blocks against the reference amplitudes gives
the fidelity as a polynomial in the relaxed observables.
"""

import logging
from math import cos, pi, sin

from pydantic import BaseModel, ConfigDict, model_validator

from src.models import InvalidLetter, ReferenceState
from src.ncpoly import (
    IDENTITY,
    OperatorLetter,
    OperatorPolynomial,
    hermitian_part,
    parse_monomial,
    poly_add,
    poly_scale,
)
from src.strategy import QuantumStrategy, bell_value, check_theta

logger = logging.getLogger(__name__)

OVERLAP_SLACK = 1e-9


class ChoiBlockGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    party: str
    blocks: tuple[tuple[OperatorPolynomial, OperatorPolynomial], tuple[OperatorPolynomial, OperatorPolynomial]]

    @model_validator(mode="after")
    def _check(self) -> "ChoiBlockGrid":
        trace = poly_add(self.blocks[0][0], self.blocks[1][1])
        if trace.terms != {IDENTITY: 1.0}:
            raise InvalidLetter(f"Choi blocks of {self.party} are not trace preserving: diagonal sums to {trace}")
        for i in range(2):
            for j in range(2):
                if (self.blocks[j][i] - self.blocks[i][j].adjoint()).terms:
                    raise InvalidLetter(f"Choi block ({j},{i}) of {self.party} is not the adjoint of ({i},{j})")
        return self


class FidelityFunctional(BaseModel):
    model_config = ConfigDict(frozen=True)

    polynomial: OperatorPolynomial

    @model_validator(mode="after")
    def _check_hermitian(self) -> "FidelityFunctional":
        if not self.polynomial.is_hermitian():
            raise InvalidLetter("fidelity polynomial must be Hermitian")
        return self


def choi_blocks(first: OperatorLetter, second: OperatorLetter) -> ChoiBlockGrid:
    if first.party != second.party:
        raise InvalidLetter(f"Choi blocks need two letters of one party; got {first} and {second}")
    one = OperatorPolynomial.constant(1.0)
    f = OperatorPolynomial.from_letter(first)
    s = OperatorPolynomial.from_letter(second)
    blocks = (
        ((one + f) / 2, (s - s * f) / 2),
        ((s - f * s) / 2, (one - f) / 2),
    )
    return ChoiBlockGrid(party="Alice" if first.party == "A" else "Bob", blocks=blocks)


def fidelity_polynomial(ref: ReferenceState, alice: ChoiBlockGrid, bob: ChoiBlockGrid) -> FidelityFunctional:
    """Sum over i,j,k,l of <psi|(|i><j| x |k><l|)|psi> * alice[i][j] * bob[k][l]."""
    total = OperatorPolynomial()
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    weight = ref.amplitude(i, k) * ref.amplitude(j, l)
                    if weight == 0.0:
                        continue
                    total = poly_add(total, poly_scale(alice.blocks[i][j] * bob.blocks[k][l], weight))
    # rho^T is absorbed by <w^T> = <w^dagger> under real moments
    return FidelityFunctional(polynomial=hermitian_part(total))


def evaluate_fidelity(f: FidelityFunctional, s: QuantumStrategy) -> float:
    value = bell_value(s, f.polynomial)
    if not -OVERLAP_SLACK <= value <= 1 + OVERLAP_SLACK:
        logger.warning(f"fidelity {value:.12f} on {s.label} lies outside [0, 1]")
    return value


# --- Closed forms, transcribed term by term ---

# (prefactor selector, signed words) for the maximally entangled reference
_CHSH_GROUPS = (
    ("cc", "+1 +A1 +B1 +A1*B1"),
    ("cs", "+B2 +A1*B2 -B2.B1 -A1*B2.B1"),
    ("cs", "+B2 +A1*B2 -B1.B2 -A1*B1.B2"),
    ("ss", "+A1 -B1 -A1*B1 +1"),
    ("cs", "+A2 -A2.A1 +A2*B1 -A2.A1*B1"),
    ("-cc", "+A2*B2 -A2.A1*B2 -A2*B2.B1 +A2.A1*B2.B1"),
    ("ss", "+A2*B2 -A2.A1*B2 -A2*B1.B2 +A2.A1*B1.B2"),
    ("-cs", "+A2 -A2.A1 -A2*B1 +A2.A1*B1"),
    ("cs", "+A2 -A1.A2 +A2*B1 -A1.A2*B1"),
    ("ss", "+A2*B2 -A1.A2*B2 -A2*B2.B1 +A1.A2*B2.B1"),
    ("-cc", "+A2*B2 -A1.A2*B2 -A2*B1.B2 +A1.A2*B1.B2"),
    ("-cs", "+A2 -A1.A2 -A2*B1 +A1.A2*B1"),
    ("ss", "+B1 -A1 -A1*B1 +1"),
    ("-cs", "+B2 -A1*B2 -B2.B1 +A1*B2.B1"),
    ("-cs", "+B2 -A1*B2 -B1.B2 +A1*B1.B2"),
    ("cc", "+A1*B1 -B1 -A1 +1"),
)

_TILTED_GROUPS = (
    ("cc", "+1 +A1 +B3 +A1*B3"),
    ("cs", "+A2*B4 -A2*B4.B3 -A2.A1*B4 +A2.A1*B4.B3"),
    ("cs", "+A2*B4 -A2*B3.B4 -A1.A2*B4 +A1.A2*B3.B4"),
    ("ss", "+1 -A1 -B3 +A1*B3"),
)


def _from_groups(groups, c: float, s: float, prefactor: float) -> OperatorPolynomial:
    weights = {"cc": c * c, "cs": c * s, "ss": s * s}
    total = OperatorPolynomial()
    for selector, words in groups:
        sign = -1.0 if selector.startswith("-") else 1.0
        weight = sign * weights[selector.lstrip("-")] * prefactor
        for token in words.split():
            m = parse_monomial(token[1:])
            total = poly_add(total, OperatorPolynomial.from_monomial(m, weight if token[0] == "+" else -weight))
    return total


def chsh_fidelity_oracle() -> FidelityFunctional:
    return FidelityFunctional(polynomial=_from_groups(_CHSH_GROUPS, cos(pi / 8), sin(pi / 8), 1 / 8))


def tilted_fidelity_oracle(theta: float) -> FidelityFunctional:
    check_theta(theta)
    return FidelityFunctional(polynomial=_from_groups(_TILTED_GROUPS, cos(theta), sin(theta), 1 / 4))


def max_coefficient_gap(p: OperatorPolynomial, q: OperatorPolynomial) -> float:
    """Largest coefficient difference; inf when the monomial sets differ."""
    if set(p.terms) != set(q.terms):
        return float("inf")
    return max((abs(p.terms[m] - q.terms[m]) for m in p.terms), default=0.0)
