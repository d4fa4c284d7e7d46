from math import pi, sin, sqrt

import numpy as np
import pytest

from src.models import InvalidLetter, InvalidParameter, TiltedParameters
from src.ncpoly import IDENTITY, moment_key, parse_monomial
from src.relaxation import build_level_sequence, build_moment_skeleton, numeric_matrix
from src.scenarios import chsh_functional, tilted_functional
from src.strategy import (
    X,
    Z,
    QuantumStrategy,
    alpha_from_theta,
    bell_value,
    chsh_optimal_strategy,
    chsh_reference_amplitudes,
    chsh_textbook_strategy,
    deterministic_strategy,
    dump_strategy,
    evaluate_word,
    load_strategy,
    local_bound,
    mu_from_theta,
    noisy_strategy,
    populate_moments,
    pure_state,
    theta_from_alpha,
    tilted_optimal_strategy,
    tilted_parameters,
    werner_strategy,
)

THETA_GRID = [pi / 4 * k / 20 for k in range(1, 21)]


def w(text):
    return parse_monomial(text)


class TestOptimalStrategies:
    def test_chsh_value(self):
        assert abs(bell_value(chsh_optimal_strategy(), chsh_functional()) - 2 * sqrt(2)) < 1e-10

    def test_chsh_correlator(self):
        assert abs(evaluate_word(chsh_optimal_strategy(), w("A1*B1")) - 1 / sqrt(2)) < 1e-12

    def test_reference_is_normalised(self):
        assert abs(sum(a * a for a in chsh_reference_amplitudes()) - 1) < 1e-12
        assert evaluate_word(chsh_optimal_strategy(), IDENTITY) == pytest.approx(1.0, abs=1e-12)

    def test_textbook_frame_agrees(self):
        assert abs(bell_value(chsh_textbook_strategy(), chsh_functional()) - 2 * sqrt(2)) < 1e-10

    @pytest.mark.parametrize("theta", THETA_GRID)
    def test_tilted_value(self, theta):
        alpha = alpha_from_theta(theta)
        value = bell_value(tilted_optimal_strategy(theta), tilted_functional(alpha))
        assert abs(value - sqrt(8 + 2 * alpha**2)) < 1e-10

    def test_tilted_max_entangled_end(self):
        assert alpha_from_theta(pi / 4) == pytest.approx(0.0, abs=1e-7)
        assert mu_from_theta(pi / 4) == pytest.approx(pi / 4, abs=1e-12)

    def test_tilted_bob_extras(self):
        s = tilted_optimal_strategy(pi / 6)
        assert s.bob_settings == 4
        assert np.allclose(s.bob[2], Z) and np.allclose(s.bob[3], X)


class TestParameters:
    @pytest.mark.parametrize("theta", THETA_GRID)
    def test_relations_round_trip(self, theta):
        alpha = alpha_from_theta(theta)
        assert abs(theta_from_alpha(alpha) - theta) < 1e-10
        assert abs(np.tan(mu_from_theta(theta)) - sin(2 * theta)) < 1e-12
        assert abs(sin(2 * theta) - sqrt((4 - alpha**2) / (4 + alpha**2))) < 1e-12

    def test_pi_over_eight(self):
        s = sin(pi / 4)
        assert alpha_from_theta(pi / 8) == pytest.approx(2 * sqrt((1 - s * s) / (1 + s * s)), abs=1e-14)

    def test_validated_parameters(self):
        assert isinstance(tilted_parameters(pi / 6), TiltedParameters)
        with pytest.raises(InvalidParameter):
            TiltedParameters(theta=pi / 6, alpha=0.5, mu=0.3)

    @pytest.mark.parametrize("theta", [0.0, -0.1, pi / 4 + 0.01])
    def test_theta_out_of_range(self, theta):
        with pytest.raises(InvalidParameter, match="theta"):
            tilted_optimal_strategy(theta)

    @pytest.mark.parametrize("alpha", [-0.1, 2.0, 3.0])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(InvalidParameter):
            theta_from_alpha(alpha)


class TestNoise:
    @pytest.mark.parametrize("v", [0.0, 0.5, 0.8, 1.0])
    def test_werner_value_scales(self, v):
        assert abs(bell_value(werner_strategy(v), chsh_functional()) - 2 * sqrt(2) * v) < 1e-10

    def test_werner_correlator(self):
        assert evaluate_word(werner_strategy(0.6), w("A1*B1")) == pytest.approx(0.6 / sqrt(2), abs=1e-12)

    def test_werner_overlap(self):
        psi = pure_state(chsh_reference_amplitudes())
        assert np.trace(psi @ werner_strategy(0.9).rho) == pytest.approx(0.925, abs=1e-12)

    def test_visibility_range(self):
        with pytest.raises(InvalidParameter):
            werner_strategy(1.5)

    def test_noisy_keeps_measurements(self):
        base = tilted_optimal_strategy(pi / 8)
        noisy = noisy_strategy(base, 0.5)
        assert noisy.bob_settings == 4
        assert np.allclose(noisy.alice[1], base.alice[1])


class TestValidation:
    def test_rejects_non_dichotomic(self):
        with pytest.raises(InvalidParameter, match="square"):
            QuantumStrategy(label="bad", rho=pure_state((1, 0, 0, 0)), alice=(2 * Z,), bob=(Z,))

    def test_rejects_unnormalised_state(self):
        with pytest.raises(InvalidParameter, match="trace"):
            QuantumStrategy(label="bad", rho=2 * pure_state((1, 0, 0, 0)), alice=(Z,), bob=(Z,))

    def test_missing_observable(self):
        with pytest.raises(InvalidLetter, match="B3"):
            evaluate_word(chsh_optimal_strategy(), w("B3"))


class TestLocal:
    def test_all_z_is_local_bound(self):
        s = deterministic_strategy((1, 1), (1, 1))
        assert bell_value(s, chsh_functional()) == pytest.approx(2.0, abs=1e-12)

    def test_chsh_local_bound(self):
        assert local_bound(chsh_functional()) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("theta", [pi / 8, pi / 6, pi / 4])
    def test_tilted_local_bound(self, theta):
        alpha = alpha_from_theta(theta)
        assert local_bound(tilted_functional(alpha)) == pytest.approx(2 + alpha, abs=1e-12)

    def test_signs_checked(self):
        with pytest.raises(InvalidParameter):
            deterministic_strategy((1, 0), (1, 1))


class TestMoments:
    def test_identity_key(self):
        moments = populate_moments(werner_strategy(0.3), [moment_key(IDENTITY)])
        assert list(moments) == [moment_key(IDENTITY)]
        assert moments[moment_key(IDENTITY)] == pytest.approx(1.0, abs=1e-12)

    def test_symmetrised(self):
        s = tilted_optimal_strategy(pi / 6)
        key = moment_key(w("A1.A2*B3.B4"))
        m = key.representative
        expected = (evaluate_word(s, m) + evaluate_word(s, w("A2.A1*B4.B3"))) / 2
        assert populate_moments(s, [key])[key] == pytest.approx(expected, abs=1e-14)

    def test_level_one_values(self):
        s = chsh_optimal_strategy()
        skeleton = build_moment_skeleton(build_level_sequence(1))
        moments = populate_moments(s, skeleton.keys())
        assert moments[moment_key(w("A2*B2"))] == pytest.approx(-1 / sqrt(2), abs=1e-12)
        assert moments[moment_key(w("A1"))] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "strategy",
        [chsh_optimal_strategy(), chsh_textbook_strategy(), werner_strategy(0.4), deterministic_strategy((1, -1), (-1, 1))],
        ids=["optimal", "textbook", "werner", "deterministic"],
    )
    def test_level_three_matrix_psd(self, strategy):
        skeleton = build_moment_skeleton(build_level_sequence(3))
        matrix = numeric_matrix(skeleton, populate_moments(strategy, skeleton.keys()))
        assert np.linalg.eigvalsh(matrix).min() >= -1e-9


class TestDump:
    def test_round_trip(self):
        s = tilted_optimal_strategy(pi / 6)
        loaded = load_strategy(dump_strategy(s))
        assert loaded.label == s.label
        assert np.allclose(loaded.rho, s.rho, atol=1e-15)
        assert len(loaded.bob) == 4 and np.allclose(loaded.bob[0], s.bob[0], atol=1e-15)

    def test_rows_before_header(self):
        with pytest.raises(InvalidParameter):
            load_strategy("1 0\n0 1\n")

    def test_missing_state(self):
        with pytest.raises(InvalidParameter, match="rho"):
            load_strategy("# A1\n1 0\n0 -1\n")

    def test_malformed_number_names_line(self):
        with pytest.raises(InvalidParameter, match="line 3"):
            load_strategy("# rho\n1 0 0 0\nabc 0 0 0\n")

    def test_ragged_rows(self):
        with pytest.raises(InvalidParameter, match="line 3: rho row has 3 entries"):
            load_strategy("# rho\n1 0 0 0\n0 0 0\n")

    def test_unknown_header(self):
        with pytest.raises(InvalidParameter, match="Ax"):
            load_strategy("# rho\n1 0\n0 0\n# Ax\n1 0\n0 -1\n")
