from math import pi, sqrt

import pytest
from pydantic import ValidationError

from src.config import DEFAULT_THETAS, RunConfig, load_run_config, scenario_range
from src.models import ConstraintMode
from src.strategy import alpha_from_theta


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.scenario == "chsh"
        assert config.mode == ConstraintMode.VALUE_EQUALS
        assert config.thetas() == (None,)
        assert config.beta_bounds(None) == (2.0, pytest.approx(2 * sqrt(2)))

    def test_tilted_defaults_to_three_angles(self):
        assert RunConfig(scenario="tilted").thetas() == DEFAULT_THETAS

    def test_theta_just_above_pi_over_four_is_clamped(self):
        config = RunConfig(scenario="tilted", theta=pi / 4 + 5e-5)
        assert config.thetas() == (pi / 4,)

    def test_bounds_are_clipped(self):
        config = RunConfig(beta_min=2.0, beta_max=2 * sqrt(2) + 1e-10)
        assert config.beta_bounds(None)[1] == pytest.approx(2 * sqrt(2), abs=1e-15)

    def test_mode_from_string(self):
        assert RunConfig(mode="ValueAtLeast").mode == ConstraintMode.VALUE_AT_LEAST

    @pytest.mark.parametrize(
        "fields,message",
        [
            ({"beta_steps": 0}, "beta_steps"),
            ({"level": 0}, "level"),
            ({"scenario": "mermin"}, "scenario"),
            ({"localizing": "other"}, "localizing"),
            ({"mode": "FullCorrelation"}, "FullCorrelation"),
            ({"theta": 0.5}, "tilted scenario only"),
            ({"scenario": "tilted", "theta": 1.0}, "theta must lie"),
            ({"beta_min": 1.9}, r"\[L, Q\]"),
            ({"beta_min": 2.6, "beta_max": 2.4}, "exceeds"),
            ({"beta_min": 2.5, "beta_max": 2.5, "beta_steps": 5}, "beta_steps = 1"),
            ({"workers": 0}, "greater than or equal"),
        ],
    )
    def test_rejected(self, fields, message):
        with pytest.raises(ValidationError, match=message):
            RunConfig(**fields)

    def test_tilted_range_depends_on_theta(self):
        low, high = scenario_range("tilted", pi / 8)
        alpha = alpha_from_theta(pi / 8)
        assert low == pytest.approx(2 + alpha) and high == pytest.approx(sqrt(8 + 2 * alpha**2))
        with pytest.raises(ValidationError):
            RunConfig(scenario="tilted", theta=pi / 8, beta_min=2.1)


class TestLoadRunConfig:
    def test_file_values(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("scenario=tilted\ntheta=0.5\nbeta_steps=5\nmode=ValueAtLeast\n")
        config = load_run_config(path, {})
        assert config.scenario == "tilted"
        assert config.theta == 0.5
        assert config.beta_steps == 5
        assert config.mode == ConstraintMode.VALUE_AT_LEAST

    def test_flags_win(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("beta_steps=5\nworkers=3\n")
        config = load_run_config(path, {"beta_steps": 2, "workers": None})
        assert config.beta_steps == 2
        assert config.workers == 3

    def test_blank_values_ignored(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("theta=\n")
        assert load_run_config(path, {}).theta is None

    def test_no_file(self):
        assert load_run_config(None, {"beta_steps": 4}).beta_steps == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_run_config(tmp_path / "absent.env", {})
