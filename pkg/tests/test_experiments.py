"""Convergence studies and their reports."""

import json

import numpy as np
import pytest

from evanskit.errors import ConfigError
from evanskit.experiments import (ConvergenceReport, compare_methods, converge_in_m, fit_log_linear,
                                  kato_order_study, mesh_count_study, random_hermitian, stiefel_experiment)
from evanskit.kato import Contour
from evanskit.problems import ScalarTestbed, burgers_shock, convected_heat
from evanskit.shooting import MeshSpec


class TestFit:
    def test_exponential(self):
        x = np.arange(4.0, 10.0)
        slope, resid = fit_log_linear(x, 3.0 * np.exp(-1.5 * x))
        np.testing.assert_allclose(slope, -1.5)
        assert resid < 1e-12

    def test_power(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        slope, _ = fit_log_linear(x, 7.0 * x ** 0.25, log_x=True)
        np.testing.assert_allclose(slope, 0.25)

    def test_report_json_safe(self):
        r = ConvergenceReport("k", np.array([1.0]), np.array([0.0]), float("nan"), float("nan"))
        d = r.to_dict()
        assert d["fitted_rate"] is None
        json.dumps(d)


class TestConvergeInM:
    def test_rate_theta_one(self):
        report = converge_in_m(ScalarTestbed(1.0, 1.0, 1.0), truncations=range(4, 9))
        np.testing.assert_allclose(report.fitted_rate, 1.0, rtol=0.05)
        assert report.predicted == 1.0
        np.testing.assert_allclose(report.errors, report.extra["expected_errors"], rtol=1e-2)

    def test_degenerate_when_b_zero(self):
        report = converge_in_m(ScalarTestbed(1.0, 0.0, 1.0), truncations=(4, 5, 6))
        assert report.degenerate
        assert np.isnan(report.fitted_rate)

    def test_needs_testbed(self):
        with pytest.raises(ConfigError):
            converge_in_m(burgers_shock())


class TestStiefelExperiment:
    def test_hermitian_norm(self):
        h = random_hermitian(3, 1e-3, np.random.default_rng(0))
        np.testing.assert_allclose(h, h.conj().T)
        np.testing.assert_allclose(np.linalg.norm(h), 1e-3)

    def test_backward_decay_at_slowest_rate(self):
        report = stiefel_experiment(np.diag([-1.0, -2.0, 3.0]), 2, seed=1)
        np.testing.assert_allclose(report.extra["sylvester_rates"], [2.0, 3.0, 4.0])
        np.testing.assert_allclose(report.extra["initial_error"], 1e-3, rtol=1e-10)
        np.testing.assert_allclose(report.fitted_rate, -2.0, rtol=0.05)
        assert report.predicted == -2.0

    def test_forward_grows(self):
        report = stiefel_experiment(np.diag([-1.0, -2.0, 3.0]), 2, direction="forward")
        assert report.predicted == 4.0
        assert report.fitted_rate > 2.0
        assert report.errors[-1] >= 0.1

    def test_davey_flat(self):
        report = stiefel_experiment(np.diag([-1.0, -2.0, 3.0]), 2, variant="davey")
        assert abs(report.fitted_rate) <= 0.02

    def test_direction_checked(self):
        with pytest.raises(ValueError):
            stiefel_experiment(np.diag([-1.0, 1.0]), 1, direction="sideways")


class TestMeshStudy:
    def test_centered_at_floor(self):
        report = mesh_count_study((1.0, 4.0, 16.0))
        assert max(report.extra["centered_steps"]) <= 10
        assert np.all(np.diff(report.errors) > 0)


class TestKatoOrderStudy:
    @pytest.mark.parametrize("order, expected", [(1, 1.0), (2, 3.0)])
    def test_pointwise(self, order, expected):
        # the 2x2 structure cancels the leading second-order term here
        report = kato_order_study(convected_heat(0.0), 2.0, 1.0, (32, 64, 128), order, "pointwise")
        np.testing.assert_allclose(report.fitted_rate, expected, atol=0.2)
        assert report.extra["identity_defect"] < 1e-12

    @pytest.mark.parametrize("order", [1, 2])
    def test_closure_is_spectral(self, order):
        # halving the step gains far more than any fixed power of J
        report = kato_order_study(convected_heat(0.0), 2.0, 1.0, (16, 32), order, "closure")
        assert report.errors[1] < 2.0 ** -8 * report.errors[0] or report.errors[1] < 1e-14
        assert report.errors[1] < 1e-9

    def test_metric_checked(self):
        with pytest.raises(ValueError):
            kato_order_study(convected_heat(0.0), 2.0, 1.0, (8,), 1, "global")


class TestCompareMethods:
    def test_shooting_methods_agree(self):
        out = compare_methods(burgers_shock(), Contour.circle(0.5, 0.25, 16), ("exterior", "polar"),
                              MeshSpec(10.0), winding_checks=True)
        assert out["pairwise_max_rel"]["exterior|polar"] < 1e-6
        assert out["winding"] == [0, 0]
        assert set(out["seconds"]) == {"exterior", "polar"}
