"""Words in dichotomic observables and real polynomials over them.

Letters are Hermitian with X^2 = 1, and Alice letters commute with Bob letters,
so every word reduces to a canonical (alice_word, bob_word) pair with no two
adjacent equal letters.
"""

import logging
from collections.abc import Iterable, Mapping
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models import InvalidLetter

logger = logging.getLogger(__name__)

ALICE_SETTINGS = 2
MAX_BOB_SETTINGS = 4

# Coefficients below this are treated as exact cancellations
ZERO_TOLERANCE = 1e-13


class OperatorLetter(BaseModel):
    model_config = ConfigDict(frozen=True)

    party: Literal["A", "B"]
    index: int

    @model_validator(mode="after")
    def _check_index(self) -> "OperatorLetter":
        limit = ALICE_SETTINGS if self.party == "A" else MAX_BOB_SETTINGS
        if not 1 <= self.index <= limit:
            raise InvalidLetter(f"{self.party}{self.index}: index must lie in 1..{limit}")
        return self

    def __str__(self) -> str:
        return f"{self.party}{self.index}"


def alice(index: int) -> OperatorLetter:
    return OperatorLetter(party="A", index=index)


def bob(index: int) -> OperatorLetter:
    return OperatorLetter(party="B", index=index)


def _reduce(word: Iterable[int]) -> tuple[int, ...]:
    stack: list[int] = []
    for letter in word:
        if stack and stack[-1] == letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


class Monomial(BaseModel):
    model_config = ConfigDict(frozen=True)

    alice: tuple[int, ...] = ()
    bob: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_canonical(self) -> "Monomial":
        for party, word, limit in (("A", self.alice, ALICE_SETTINGS), ("B", self.bob, MAX_BOB_SETTINGS)):
            if any(not 1 <= i <= limit for i in word):
                raise InvalidLetter(f"{party} word {word} has an index outside 1..{limit}")
            if any(a == b for a, b in zip(word, word[1:])):
                raise InvalidLetter(f"{party} word {word} is not reduced")
        return self

    @classmethod
    def _make(cls, alice_word: tuple[int, ...], bob_word: tuple[int, ...]) -> "Monomial":
        # inputs already reduced
        return cls.model_construct(alice=alice_word, bob=bob_word)

    @property
    def degree(self) -> int:
        return len(self.alice) + len(self.bob)

    @property
    def is_identity(self) -> bool:
        return not self.alice and not self.bob

    def sort_key(self) -> tuple:
        return (self.degree, -len(self.alice), self.alice, self.bob)

    def __lt__(self, other: "Monomial") -> bool:
        return self.sort_key() < other.sort_key()

    def letters(self) -> list[OperatorLetter]:
        return [alice(i) for i in self.alice] + [bob(i) for i in self.bob]

    def bob_settings_needed(self) -> int:
        return max(self.bob, default=0)

    def __str__(self) -> str:
        return format_monomial(self)

    def __repr__(self) -> str:
        return f"Monomial({format_monomial(self)})"


IDENTITY = Monomial._make((), ())


class MomentKey(BaseModel):
    """Identifies <w> with <w^dagger>; the representative is the smaller of the two."""

    model_config = ConfigDict(frozen=True)

    representative: Monomial

    def __lt__(self, other: "MomentKey") -> bool:
        return self.representative < other.representative

    def __str__(self) -> str:
        return format_monomial(self.representative)


def canonicalize(raw_word: Iterable[OperatorLetter], bob_settings: int = MAX_BOB_SETTINGS) -> Monomial:
    alice_word: list[int] = []
    bob_word: list[int] = []
    for letter in raw_word:
        if letter.party == "A":
            alice_word.append(letter.index)
        else:
            if letter.index > bob_settings:
                raise InvalidLetter(f"{letter}: Bob has only {bob_settings} settings in this scenario")
            bob_word.append(letter.index)
    return Monomial._make(_reduce(alice_word), _reduce(bob_word))


def adjoint(m: Monomial) -> Monomial:
    return Monomial._make(m.alice[::-1], m.bob[::-1])


def multiply(m1: Monomial, m2: Monomial) -> Monomial:
    return Monomial._make(_reduce(m1.alice + m2.alice), _reduce(m1.bob + m2.bob))


def moment_key(m: Monomial) -> MomentKey:
    other = adjoint(m)
    return MomentKey.model_construct(representative=other if other < m else m)


class OperatorPolynomial(BaseModel):
    model_config = ConfigDict(frozen=True)

    terms: dict[Monomial, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _purge_zeros(self) -> "OperatorPolynomial":
        for m in [m for m, c in self.terms.items() if abs(c) <= ZERO_TOLERANCE]:
            del self.terms[m]
        return self

    @classmethod
    def _from_terms(cls, terms: Mapping[Monomial, float]) -> "OperatorPolynomial":
        return cls.model_construct(terms={m: c for m, c in terms.items() if abs(c) > ZERO_TOLERANCE})

    @classmethod
    def constant(cls, value: float) -> "OperatorPolynomial":
        return cls._from_terms({IDENTITY: value})

    @classmethod
    def from_monomial(cls, m: Monomial, coefficient: float = 1.0) -> "OperatorPolynomial":
        return cls._from_terms({m: coefficient})

    @classmethod
    def from_letter(cls, letter: OperatorLetter) -> "OperatorPolynomial":
        return cls.from_monomial(canonicalize([letter]))

    def coefficient(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def monomials(self) -> list[Monomial]:
        return sorted(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def adjoint(self) -> "OperatorPolynomial":
        return OperatorPolynomial._from_terms({adjoint(m): c for m, c in self.terms.items()})

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(self.coefficient(adjoint(m)) - c) <= tol for m, c in self.terms.items())

    def key_form(self) -> dict[MomentKey, float]:
        """Linear form over moment variables, <w> and <w^dagger> merged."""
        form: dict[MomentKey, float] = {}
        for m, c in self.terms.items():
            key = moment_key(m)
            form[key] = form.get(key, 0.0) + c
        return {k: c for k, c in form.items() if abs(c) > ZERO_TOLERANCE}

    def bob_settings_needed(self) -> int:
        return max((m.bob_settings_needed() for m in self.terms), default=0)

    def __add__(self, other: "OperatorPolynomial | float") -> "OperatorPolynomial":
        return poly_add(self, _lift(other))

    __radd__ = __add__

    def __neg__(self) -> "OperatorPolynomial":
        return poly_scale(self, -1.0)

    def __sub__(self, other: "OperatorPolynomial | float") -> "OperatorPolynomial":
        return poly_add(self, poly_scale(_lift(other), -1.0))

    def __rsub__(self, other: float) -> "OperatorPolynomial":
        return poly_add(_lift(other), poly_scale(self, -1.0))

    def __mul__(self, other: "OperatorPolynomial | float") -> "OperatorPolynomial":
        if isinstance(other, OperatorPolynomial):
            return poly_multiply(self, other)
        return poly_scale(self, float(other))

    def __rmul__(self, other: float) -> "OperatorPolynomial":
        return poly_scale(self, float(other))

    def __truediv__(self, other: float) -> "OperatorPolynomial":
        return poly_scale(self, 1.0 / float(other))

    def __str__(self) -> str:
        return format_polynomial(self)


def _lift(value: "OperatorPolynomial | float") -> OperatorPolynomial:
    if isinstance(value, OperatorPolynomial):
        return value
    return OperatorPolynomial.constant(float(value))


def poly_add(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    terms = dict(p.terms)
    for m, c in q.terms.items():
        terms[m] = terms.get(m, 0.0) + c
    return OperatorPolynomial._from_terms(terms)


def poly_scale(p: OperatorPolynomial, factor: float) -> OperatorPolynomial:
    return OperatorPolynomial._from_terms({m: factor * c for m, c in p.terms.items()})


def poly_multiply(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    terms: dict[Monomial, float] = {}
    for m1, c1 in p.terms.items():
        for m2, c2 in q.terms.items():
            m = multiply(m1, m2)
            terms[m] = terms.get(m, 0.0) + c1 * c2
    return OperatorPolynomial._from_terms(terms)


def hermitian_part(p: OperatorPolynomial) -> OperatorPolynomial:
    return poly_scale(poly_add(p, p.adjoint()), 0.5)


# --- Text format ---
#
#   1              identity
#   A1.A2*B1       A1 A2 on Alice's side, B1 on Bob's
#   B2.B1          Bob-only word
#   <coeff> <monomial>   one polynomial term per line


def format_monomial(m: Monomial) -> str:
    if m.is_identity:
        return "1"
    parts = []
    if m.alice:
        parts.append(".".join(f"A{i}" for i in m.alice))
    if m.bob:
        parts.append(".".join(f"B{i}" for i in m.bob))
    return "*".join(parts)


def parse_monomial(text: str, bob_settings: int = MAX_BOB_SETTINGS) -> Monomial:
    text = text.strip()
    if text == "1":
        return IDENTITY
    letters: list[OperatorLetter] = []
    for part in text.split("*"):
        for token in part.split("."):
            token = token.strip()
            if len(token) < 2 or token[0] not in "AB" or not token[1:].isdigit():
                raise InvalidLetter(f"cannot parse letter {token!r} in monomial {text!r}")
            letters.append(OperatorLetter(party=token[0], index=int(token[1:])))
    return canonicalize(letters, bob_settings=bob_settings)


def format_polynomial(p: OperatorPolynomial) -> str:
    return "".join(f"{p.terms[m]:.17g} {format_monomial(m)}\n" for m in p.monomials())


def parse_polynomial(text: str) -> OperatorPolynomial:
    terms: dict[Monomial, float] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            coeff, word = line.split(None, 1)
            value = float(coeff)
        except ValueError as e:
            raise InvalidLetter(f"line {number}: expected '<coeff> <monomial>', got {line!r}") from e
        m = parse_monomial(word)
        terms[m] = terms.get(m, 0.0) + value
    return OperatorPolynomial._from_terms(terms)
