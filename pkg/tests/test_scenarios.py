from math import pi, sqrt

import pytest

from src.models import InvalidParameter
from src.ncpoly import parse_monomial
from src.scenarios import (
    chsh_functional,
    chsh_scenario,
    get_scenario,
    localizing_operators,
    tilted_functional,
    tilted_scenario,
)
from src.strategy import alpha_from_theta, bell_value, local_bound, mu_from_theta


class TestChsh:
    def test_bounds(self):
        s = chsh_scenario()
        assert s.local_bound == 2.0
        assert s.quantum_bound == pytest.approx(2 * sqrt(2), abs=1e-15)

    def test_local_bound_matches_enumeration(self):
        s = chsh_scenario()
        assert local_bound(s.bell) == pytest.approx(s.local_bound, abs=1e-12)

    def test_defaults(self):
        s = chsh_scenario()
        assert s.descriptor == "chsh"
        assert s.theta is None
        assert len(s.sequence) == 25
        assert s.localizing_operators == ()

    @pytest.mark.parametrize("level,size", [(1, 5), (2, 13)])
    def test_level_choice(self, level, size):
        assert len(chsh_scenario(level).sequence) == size

    def test_optimal_strategy_reaches_q(self):
        s = chsh_scenario()
        assert bell_value(s.optimal_strategy(), s.bell) == pytest.approx(s.quantum_bound, abs=1e-10)

    @pytest.mark.parametrize("beta", [1.9, 2.9])
    def test_beta_out_of_range(self, beta):
        with pytest.raises(InvalidParameter, match=r"\[L, Q\]"):
            chsh_scenario().check_beta(beta)

    def test_beta_slack_at_ends(self):
        s = chsh_scenario()
        s.check_beta(2.0 - 1e-10)
        s.check_beta(2 * sqrt(2) + 1e-10)


class TestTilted:
    @pytest.mark.parametrize("theta", [pi / 8, pi / 6, pi / 4])
    def test_bounds(self, theta):
        s = tilted_scenario(theta)
        alpha = alpha_from_theta(theta)
        assert s.local_bound == pytest.approx(2 + alpha, abs=1e-15)
        assert s.quantum_bound == pytest.approx(sqrt(8 + 2 * alpha**2), abs=1e-15)
        assert local_bound(s.bell, bob_settings=2) == pytest.approx(s.local_bound, abs=1e-12)

    def test_functional_adds_marginal(self):
        f = tilted_functional(0.5)
        assert f.coefficient(parse_monomial("A1")) == 0.5
        assert (f - chsh_functional()).terms == {parse_monomial("A1"): 0.5}

    def test_alpha_range(self):
        with pytest.raises(InvalidParameter, match="alpha"):
            tilted_functional(2.0)

    def test_default_sequences(self):
        s = tilted_scenario(pi / 6)
        assert len(s.sequence) == 41
        assert s.localizing_sequence == s.sequence
        assert [name for name, _ in s.localizing_operators] == ["L1", "L2"]
        assert s.bob_settings == 4

    def test_grown_sequence_keeps_sprime(self):
        s = tilted_scenario(pi / 6, level=2)
        assert s.localizing_sequence.issubset(s.sequence)
        assert len(s.sequence) > 41
        assert s.sequence.name == "S'+level-2"

    def test_descriptor(self):
        s = tilted_scenario(pi / 6)
        assert s.descriptor == f"tilted(theta={pi / 6:.6f})"
        assert "L1+L2" in s.sequence_descriptor

    @pytest.mark.parametrize("theta", [0.0, 1.0])
    def test_theta_range(self, theta):
        with pytest.raises(InvalidParameter, match="theta"):
            tilted_scenario(theta)

    @pytest.mark.parametrize("theta", [pi / 8, pi / 6])
    def test_optimal_strategy_reaches_q(self, theta):
        s = tilted_scenario(theta)
        assert bell_value(s.optimal_strategy(), s.bell) == pytest.approx(s.quantum_bound, abs=1e-10)


class TestLocalizingOperators:
    def test_paired_uses_b3_then_b4(self):
        mu = mu_from_theta(pi / 6)
        (_, first), (_, second) = localizing_operators(mu, "paired")
        assert set(first.terms) == {parse_monomial("B3.B1"), parse_monomial("B3.B2")}
        assert set(second.terms) == {parse_monomial("B4.B1"), parse_monomial("B4.B2")}

    def test_literal_uses_b3_twice(self):
        mu = mu_from_theta(pi / 6)
        (_, second) = localizing_operators(mu, "literal")[1]
        assert all(4 not in m.bob for m in second.terms)

    def test_unknown_variant(self):
        with pytest.raises(InvalidParameter, match="paired"):
            localizing_operators(0.5, "other")


class TestGetScenario:
    def test_chsh(self):
        assert get_scenario("chsh").name == "chsh"

    def test_tilted(self):
        assert get_scenario("tilted", pi / 8).theta == pytest.approx(pi / 8)

    def test_chsh_rejects_theta(self):
        with pytest.raises(InvalidParameter, match="tilted scenario only"):
            get_scenario("chsh", pi / 8)

    def test_tilted_needs_theta(self):
        with pytest.raises(InvalidParameter, match="needs theta"):
            get_scenario("tilted")

    def test_unknown(self):
        with pytest.raises(InvalidParameter, match="scenario must be"):
            get_scenario("mermin")
