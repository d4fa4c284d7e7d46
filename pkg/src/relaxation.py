"""Operator sequences and the symbolic moment / localizing matrices built from them."""

import itertools
import logging
from collections.abc import Iterable, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models import InvalidParameter, SequenceContainment
from src.ncpoly import (
    ALICE_SETTINGS,
    IDENTITY,
    Monomial,
    MomentKey,
    OperatorPolynomial,
    adjoint,
    hermitian_part,
    moment_key,
    multiply,
    parse_monomial,
)

logger = logging.getLogger(__name__)

LinearForm = dict[MomentKey, float]

# Extra words of the partially-entangled-state relaxation, added on top of the
# level-3 CHSH sequence. Bob's B3, B4 stand for the unitaries that make
# B3(B1+B2) and B4(B1-B2) positive.
TILTED_EXTRA_WORDS = (
    "B3.B4", "B4.B3", "B1.B4", "B4.B1", "B3.B1", "B1.B3",
    "A1*B3", "A2*B3", "A1*B4", "A2*B4",
    "B3.B4.B3", "B4.B3.B4", "A1*B3.B4", "A2*B3.B4", "A1*B4.B3", "A2*B4.B3",
)


class SequenceSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    monomials: tuple[Monomial, ...]
    name: str = ""

    @model_validator(mode="after")
    def _check(self) -> "SequenceSet":
        if not self.monomials or not self.monomials[0].is_identity:
            raise InvalidParameter("a sequence must start with the identity")
        if len(set(self.monomials)) != len(self.monomials):
            raise InvalidParameter("a sequence must not contain duplicates")
        return self

    def __len__(self) -> int:
        return len(self.monomials)

    def __contains__(self, m: object) -> bool:
        return m in set(self.monomials)

    def issubset(self, other: "SequenceSet") -> bool:
        return set(self.monomials) <= set(other.monomials)


def _reduced_words(length: int, alphabet: int) -> list[tuple[int, ...]]:
    if length == 0:
        return [()]
    return [
        w for w in itertools.product(range(1, alphabet + 1), repeat=length)
        if all(a != b for a, b in zip(w, w[1:]))
    ]


def sequence_from_monomials(monomials: Iterable[Monomial], name: str = "") -> SequenceSet:
    unique = set(monomials) | {IDENTITY}
    return SequenceSet(monomials=tuple(sorted(unique)), name=name)


def build_level_sequence(level: int, bob_settings: int = 2) -> SequenceSet:
    """All canonical words of length <= level over A1, A2, B1..B_bob_settings."""
    if level < 1:
        raise InvalidParameter(f"level must be >= 1; got {level}")
    words = [
        Monomial._make(a, b)
        for n_alice in range(level + 1)
        for n_bob in range(level + 1 - n_alice)
        for a in _reduced_words(n_alice, ALICE_SETTINGS)
        for b in _reduced_words(n_bob, bob_settings)
    ]
    return sequence_from_monomials(words, name=f"level-{level}/{bob_settings}B")


def tilted_sequence() -> SequenceSet:
    extras = [parse_monomial(w) for w in TILTED_EXTRA_WORDS]
    base = build_level_sequence(3, bob_settings=2).monomials
    return sequence_from_monomials([*base, *extras], name="tilted-S'")


class VariableIndex:
    """Registry of moment variables, ids handed out in first-seen order."""

    def __init__(self) -> None:
        self._ids: dict[MomentKey, int] = {}

    def register(self, key: MomentKey) -> int:
        if key not in self._ids:
            self._ids[key] = len(self._ids)
        return self._ids[key]

    def __getitem__(self, key: MomentKey) -> int:
        return self._ids[key]

    def __contains__(self, key: object) -> bool:
        return key in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def keys(self) -> list[MomentKey]:
        return list(self._ids)


class MomentMatrixSkeleton(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sequence: SequenceSet
    entry_keys: tuple[tuple[MomentKey, ...], ...]
    variable_index: dict[MomentKey, int] = Field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.entry_keys)

    def entry_form(self, i: int, j: int) -> LinearForm:
        return {self.entry_keys[i][j]: 1.0}

    def keys(self) -> set[MomentKey]:
        return {k for row in self.entry_keys for k in row}


class LocalizingSkeleton(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    operator: OperatorPolynomial
    sequence: SequenceSet
    entry_polys: tuple[tuple[LinearForm, ...], ...]
    antisymmetric_forms: tuple[LinearForm, ...] = ()  # each must vanish: B equals its own adjoint
    name: str = ""

    @property
    def dimension(self) -> int:
        return len(self.entry_polys)

    def entry_form(self, i: int, j: int) -> LinearForm:
        return self.entry_polys[i][j]

    def keys(self) -> set[MomentKey]:
        return {k for row in self.entry_polys for form in row for k in form}


Skeleton = MomentMatrixSkeleton | LocalizingSkeleton


def build_moment_skeleton(s: SequenceSet, index: VariableIndex | None = None) -> MomentMatrixSkeleton:
    index = index if index is not None else VariableIndex()
    n = len(s)
    grid: list[list[MomentKey | None]] = [[None] * n for _ in range(n)]
    for i, si in enumerate(s.monomials):
        for j in range(i, n):
            key = moment_key(multiply(adjoint(s.monomials[j]), si))
            grid[i][j] = grid[j][i] = key
    for row in grid:
        for key in row:
            index.register(key)
    skeleton = MomentMatrixSkeleton(
        sequence=s,
        entry_keys=tuple(tuple(row) for row in grid),
        variable_index={k: index[k] for k in (key for row in grid for key in row)},
    )
    logger.info(f"moment skeleton {s.name or len(s)}: {n}x{n}, {len(skeleton.variable_index)} distinct moments")
    return skeleton


def build_localizing_skeleton(
    b: OperatorPolynomial,
    sprime: SequenceSet,
    s: SequenceSet | None = None,
    index: VariableIndex | None = None,
    name: str = "",
) -> LocalizingSkeleton:
    """Entries <S'_j^dagger H(B) S'_i> with H(B) the Hermitian part of B.

    With real moments the full matrix <S'_j^dagger B S'_i> splits into this symmetric
    block plus an antisymmetric one built from the anti-Hermitian part of B. B >= 0
    needs both: the block PSD and every antisymmetric entry zero. The nonzero,
    pairwise distinct antisymmetric entries (i < j) are kept in `antisymmetric_forms`.
    """
    if s is not None and not sprime.issubset(s):
        missing = [str(m) for m in sprime.monomials if m not in s]
        raise SequenceContainment(
            f"localizing sequence must be a subset of the moment sequence; missing {', '.join(missing[:5])}"
        )
    index = index if index is not None else VariableIndex()
    h = hermitian_part(b)
    skew = b - h
    n = len(sprime)
    grid: list[list[LinearForm | None]] = [[None] * n for _ in range(n)]
    antisymmetric: list[LinearForm] = []
    seen: set[tuple] = set()
    for i, si in enumerate(sprime.monomials):
        right = OperatorPolynomial.from_monomial(si)
        for j in range(i, n):
            left = OperatorPolynomial.from_monomial(adjoint(sprime.monomials[j]))
            form = (left * h * right).key_form()
            grid[i][j] = grid[j][i] = form
            if j == i or skew.is_zero():
                continue
            anti = (left * skew * right).key_form()
            signature = _form_signature(anti)
            if anti and signature not in seen:
                seen.add(signature)
                antisymmetric.append(anti)
    for row in grid:
        for form in row:
            for key in sorted(form):
                index.register(key)
    for form in antisymmetric:
        for key in sorted(form):
            index.register(key)
    skeleton = LocalizingSkeleton(
        operator=b,
        sequence=sprime,
        entry_polys=tuple(tuple(row) for row in grid),
        antisymmetric_forms=tuple(antisymmetric),
        name=name,
    )
    logger.info(
        f"localizing skeleton {name or 'L'}: {n}x{n}, {len(skeleton.keys())} distinct moments, "
        f"{len(antisymmetric)} antisymmetric entries"
    )
    return skeleton


def _form_signature(form: LinearForm) -> tuple:
    # equal up to an overall sign
    items = sorted(form.items())
    if not items:
        return ()
    sign = 1.0 if items[0][1] > 0 else -1.0
    return tuple((k, round(sign * c, 12)) for k, c in items)


def numeric_matrix(skeleton: Skeleton, moments: Mapping[MomentKey, float]) -> np.ndarray:
    n = skeleton.dimension
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            matrix[i, j] = sum(c * moments[k] for k, c in skeleton.entry_form(i, j).items())
    return matrix


def to_triplets(skeleton: Skeleton, index: VariableIndex) -> str:
    """Sparse `row col variable coefficient` lines, 0-based, upper triangle."""
    lines = []
    for i in range(skeleton.dimension):
        for j in range(i, skeleton.dimension):
            form = skeleton.entry_form(i, j)
            for key in sorted(form, key=lambda k: index[k]):
                lines.append(f"{i} {j} {index[key]} {form[key]:.17g}")
    return "\n".join(lines) + "\n"


def uncovered_keys(form: Iterable[MomentKey], skeletons: Iterable[Skeleton]) -> set[MomentKey]:
    covered: set[MomentKey] = set()
    for skeleton in skeletons:
        covered |= skeleton.keys()
    return set(form) - covered
