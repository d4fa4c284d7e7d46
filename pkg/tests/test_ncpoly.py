from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.models import InvalidLetter
from src.ncpoly import (
    IDENTITY,
    Monomial,
    OperatorLetter,
    OperatorPolynomial,
    adjoint,
    alice,
    bob,
    canonicalize,
    format_monomial,
    format_polynomial,
    hermitian_part,
    moment_key,
    multiply,
    parse_monomial,
    parse_polynomial,
)
from src.strategy import I2, chsh_textbook_strategy, tilted_optimal_strategy

LETTERS = [alice(1), alice(2)] + [bob(i) for i in range(1, 5)]
words = st.lists(st.sampled_from(LETTERS), max_size=6)


def m(text: str) -> Monomial:
    return parse_monomial(text)


def raw_product(strategy, raw):
    factors = [
        np.kron(strategy.alice[l.index - 1], I2) if l.party == "A" else np.kron(I2, strategy.bob[l.index - 1])
        for l in raw
    ]
    return reduce(np.matmul, factors, np.eye(4))


class TestCanonicalize:
    def test_square_cancels(self):
        assert canonicalize([alice(1), alice(1)]) == IDENTITY

    def test_cross_party_commutes(self):
        assert canonicalize([bob(1), alice(2)]) == m("A2*B1")

    def test_inner_cancellation(self):
        assert canonicalize([alice(1), alice(2), alice(2), bob(1)]) == m("A1*B1")

    def test_bob_letter_beyond_scenario(self):
        with pytest.raises(InvalidLetter, match="B3"):
            canonicalize([bob(3)], bob_settings=2)

    def test_letter_index_range(self):
        with pytest.raises(InvalidLetter):
            OperatorLetter(party="A", index=3)
        with pytest.raises(InvalidLetter):
            OperatorLetter(party="B", index=5)

    def test_non_reduced_monomial_rejected(self):
        with pytest.raises(InvalidLetter):
            Monomial(alice=(1, 1))

    @given(words)
    def test_idempotent(self, raw):
        once = canonicalize(raw)
        assert canonicalize(once.letters()) == once

    @given(words, st.integers(min_value=0, max_value=6), st.sampled_from(LETTERS))
    def test_inserting_square_is_invisible(self, raw, position, letter):
        position = min(position, len(raw))
        padded = raw[:position] + [letter, letter] + raw[position:]
        assert canonicalize(padded) == canonicalize(raw)

    @settings(max_examples=60)
    @given(words)
    def test_sound_against_matrices(self, raw):
        for strategy in (chsh_textbook_strategy(), tilted_optimal_strategy(np.pi / 6)):
            if any(l.party == "B" and l.index > strategy.bob_settings for l in raw):
                continue
            direct = raw_product(strategy, raw)
            reduced = strategy.word_operator(canonicalize(raw))
            assert np.allclose(direct, reduced, atol=1e-12)


class TestAdjointAndProducts:
    def test_adjoint_reverses(self):
        assert adjoint(m("A1.A2")) == m("A2.A1")
        assert adjoint(IDENTITY) == IDENTITY
        assert adjoint(m("A1*B1")) == m("A1*B1")

    @given(words)
    def test_adjoint_involution(self, raw):
        w = canonicalize(raw)
        assert adjoint(adjoint(w)) == w

    def test_multiply_examples(self):
        assert multiply(m("A1"), m("A1")) == IDENTITY
        assert multiply(m("A1*B1"), m("A2*B1")) == m("A1.A2")
        assert multiply(m("A2.A1"), m("B2")) == m("A2.A1*B2")

    @given(words, words, words)
    def test_multiply_associative_with_unit(self, a, b, c):
        x, y, z = canonicalize(a), canonicalize(b), canonicalize(c)
        assert multiply(multiply(x, y), z) == multiply(x, multiply(y, z))
        assert multiply(IDENTITY, x) == x == multiply(x, IDENTITY)

    @given(st.lists(st.sampled_from(LETTERS[:2]), max_size=6))
    def test_single_party_word_times_adjoint(self, raw):
        w = canonicalize(raw)
        assert multiply(w, adjoint(w)) == IDENTITY


class TestMomentKey:
    def test_adjoint_pairs_share_key(self):
        assert moment_key(m("A1.A2")) == moment_key(m("A2.A1"))
        assert moment_key(m("A1*B1.B2")) == moment_key(m("A1*B2.B1"))
        assert moment_key(IDENTITY).representative == IDENTITY

    @given(words)
    def test_key_of_adjoint(self, raw):
        w = canonicalize(raw)
        assert moment_key(w) == moment_key(adjoint(w))

    @given(words, words)
    def test_total_order(self, a, b):
        x, y = canonicalize(a), canonicalize(b)
        assert [x < y, y < x, x == y].count(True) == 1

    def test_order_is_length_then_alice_first(self):
        assert sorted([m("B1"), m("A1.A2"), m("A2"), IDENTITY, m("A1")]) == [
            IDENTITY, m("A1"), m("A2"), m("B1"), m("A1.A2")
        ]


class TestPolynomials:
    one = OperatorPolynomial.constant(1.0)
    a1 = OperatorPolynomial.from_letter(alice(1))

    def test_difference_of_squares_vanishes(self):
        assert ((self.one + self.a1) * (self.one - self.a1)).is_zero()

    def test_projector_idempotent(self):
        p = (self.one + self.a1) / 2
        assert (p * p).terms == p.terms

    def test_distribution(self):
        a2 = OperatorPolynomial.from_letter(alice(2))
        b2 = OperatorPolynomial.from_letter(bob(2))
        product = (a2 - a2 * self.a1) * b2
        assert product.terms == {m("A2*B2"): 1.0, m("A2.A1*B2"): -1.0}

    def test_zero_terms_purged(self):
        p = OperatorPolynomial(terms={m("A1"): 0.0, m("B1"): 2.0})
        assert p.terms == {m("B1"): 2.0}

    def test_hermitian_part(self):
        p = OperatorPolynomial.from_monomial(m("A1.A2"), 2.0)
        h = hermitian_part(p)
        assert not p.is_hermitian()
        assert h.is_hermitian()
        assert h.terms == {m("A1.A2"): 1.0, m("A2.A1"): 1.0}

    def test_key_form_merges_adjoints(self):
        p = parse_polynomial("0.5 A1.A2\n0.5 A2.A1\n1 1\n")
        assert p.key_form() == {moment_key(m("A1.A2")): 1.0, moment_key(IDENTITY): 1.0}


class TestTextFormat:
    @pytest.mark.parametrize("text", ["1", "A1", "B2.B1", "A1.A2*B1", "A2.A1*B4.B3"])
    def test_monomial_text(self, text):
        assert format_monomial(parse_monomial(text)) == text

    def test_parse_reduces(self):
        assert parse_monomial("A1.A1*B2") == m("B2")

    @pytest.mark.parametrize("bad", ["C1", "A", "A1*", "Ax"])
    def test_bad_monomial(self, bad):
        with pytest.raises(InvalidLetter):
            parse_monomial(bad)

    def test_polynomial_text_is_sorted(self):
        p = parse_polynomial("# comment\n-1 A2*B2\n0.25 1\n")
        assert format_polynomial(p) == "0.25 1\n-1 A2*B2\n"

    def test_bad_polynomial_line(self):
        with pytest.raises(InvalidLetter, match="line 1"):
            parse_polynomial("A1\n")
