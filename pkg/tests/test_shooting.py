"""Integrators and shooting in exterior and polar coordinates."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from evanskit.errors import DimensionError, StepSizeError
from evanskit.exterior import wedge_columns
from evanskit.kato import PolarState, init_exterior, init_polar, schur_frame
from evanskit.problems import ScalarTestbed, burgers_shock, constant_coefficient
from evanskit.shooting import (MeshSpec, backward_euler_step, default_truncation, integrate, integrate_polar,
                               midpoint_step, shoot_exterior, shoot_polar, stiefel_error, write_trajectory_csv)


def _decay(x, y):
    return -y


class TestMeshSpec:
    def test_step_must_divide(self):
        with pytest.raises(ValueError):
            MeshSpec(1.0, "fixed", "erk4embedded", 0.3)

    def test_adaptive_needs_rk(self):
        with pytest.raises(ValueError):
            MeshSpec(1.0, "adaptive", "midpoint")

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            MeshSpec(1.0, scheme="euler")

    def test_with_truncation_keeps_division(self):
        mesh = MeshSpec(10.0, "fixed", "midpoint", 0.01).with_truncation(7.3)
        assert round(7.3 / mesh.step) == 730

    def test_min_step_default(self):
        assert MeshSpec(20.0).min_step == pytest.approx(2e-9)


class TestSteps:
    def test_backward_euler_step(self):
        a = np.array([[-1.0, 0.5], [0.0, 2.0]])
        w_next = np.array([1.0, 1.0])
        w = backward_euler_step(a, w_next, 0.1)
        # stepping toward x=0: (I + h A) w = w_next
        np.testing.assert_allclose((np.eye(2) + 0.1 * a) @ w, w_next)

    def test_midpoint_step(self):
        a = np.array([[0.0, 1.0], [-1.0, 0.0]])
        w = midpoint_step(a, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.1)
        np.testing.assert_allclose(w, np.array([1.0, 0.0]) + 0.1 * a @ np.array([0.0, 1.0]))


class TestIntegrate:
    def test_adaptive_accuracy(self):
        mesh = MeshSpec(5.0, abs_tol=1e-10, rel_tol=1e-10)
        y, stats = integrate(_decay, np.array([1.0]), 0.0, 5.0, mesh)
        # error per unit step: global error at most about tol * span
        np.testing.assert_allclose(y.real, [np.exp(-5.0)], rtol=0, atol=5e-10)
        assert stats.steps > 0

    def test_adaptive_matches_reference(self):
        rhs = lambda x, y: np.array([y[1], -np.sin(x) * y[0]])
        mesh = MeshSpec(6.0, abs_tol=1e-11, rel_tol=1e-11)
        y, _ = integrate(rhs, np.array([1.0, 0.0]), 0.0, 6.0, mesh)
        ref = solve_ivp(lambda x, y: [y[1], -np.sin(x) * y[0]], (0, 6), [1.0, 0.0], rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(y.real, ref.y[:, -1], rtol=1e-8, atol=1e-9)

    def test_backward_direction(self):
        mesh = MeshSpec(2.0, abs_tol=1e-10, rel_tol=1e-10)
        y, _ = integrate(_decay, np.array([1.0]), 2.0, 0.0, mesh)
        np.testing.assert_allclose(y.real, [np.exp(2.0)], rtol=1e-8)

    @pytest.mark.parametrize("scheme, order", [("backwardEuler", 1), ("midpoint", 2), ("erk4embedded", 4)])
    def test_fixed_orders(self, scheme, order):
        steps = np.array([0.1, 0.05, 0.025])
        errs = []
        for h in steps:
            y, _ = integrate(_decay, np.array([1.0]), 0.0, 1.0, MeshSpec(1.0, "fixed", scheme, h),
                             linear=lambda x: np.array([[-1.0]]))
            errs.append(abs(y[0] - np.exp(-1.0)))
        rate = np.polyfit(np.log(steps), np.log(errs), 1)[0]
        np.testing.assert_allclose(rate, order, atol=0.15)

    def test_zero_rhs_single_step(self):
        y, stats = integrate(lambda x, y: 0 * y, np.array([2.0]), 0.0, 100.0, MeshSpec(100.0))
        assert stats.steps == 1
        np.testing.assert_array_equal(y, [2.0])

    def test_step_underflow(self):
        mesh = MeshSpec(1.0, abs_tol=1e-14, rel_tol=0.0, h_min=0.5)
        with pytest.raises(StepSizeError):
            integrate(lambda x, y: -50 * y, np.array([1.0]), 0.0, 1.0, mesh)

    def test_observer_sees_every_step(self):
        seen = []
        _, stats = integrate(_decay, np.array([1.0]), 0.0, 1.0, MeshSpec(1.0, "fixed", "erk4embedded", 0.1),
                             observer=lambda x, y: seen.append(x))
        assert len(seen) == stats.steps + 1
        np.testing.assert_allclose(seen[-1], 1.0)


class TestShootExterior:
    @pytest.mark.parametrize("scheme", ["backwardEuler", "midpoint", "erk4embedded"])
    def test_equilibrium_exact(self, scheme):
        a = np.diag([-1.0, -2.0, 3.0])
        system = constant_coefficient(a, 2)
        init = wedge_columns(np.eye(3)[:, :2])
        out = shoot_exterior(system, 0.0, "plus", init, MeshSpec(10.0, "fixed", scheme, 0.1))
        np.testing.assert_allclose(out.coords, init.coords, atol=1e-12)

    def test_scalar_testbed_closed_form(self):
        tb = ScalarTestbed(1.0, 1.0, 1.0)
        init = wedge_columns(np.ones((1, 1)))
        out = shoot_exterior(tb.system(), 0.0, "plus", init, MeshSpec(8.0, abs_tol=1e-12, rel_tol=1e-12))
        np.testing.assert_allclose(out.coords[0], tb.centered_value(8.0), rtol=1e-10)

    def test_degree_checked(self):
        system = constant_coefficient(np.diag([-1.0, 2.0]), 1)
        with pytest.raises(DimensionError):
            shoot_exterior(system, 0.0, "plus", wedge_columns(np.eye(2)), MeshSpec(1.0))

    def test_info_records_stats(self):
        info = {}
        system = burgers_shock()
        w, _ = init_exterior(schur_frame(system, 1.0, "plus"), schur_frame(system, 1.0, "minus"))
        shoot_exterior(system, 1.0, "plus", w, MeshSpec(10.0), info=info)
        assert info["truncation"] == 10.0 and info["steps"] > 0


class TestShootPolar:
    def _states(self, lam, mesh):
        system = burgers_shock()
        frame = schur_frame(system, lam, "plus")
        init = init_polar(frame, frame)
        polar = shoot_polar(system, lam, "plus", init, mesh)
        exterior = shoot_exterior(system, lam, "plus", wedge_columns(frame), mesh)
        return polar, exterior

    def test_agrees_with_exterior(self):
        mesh = MeshSpec(12.0, abs_tol=1e-11, rel_tol=1e-11)
        polar, exterior = self._states(0.7 + 0.2j, mesh)
        np.testing.assert_allclose(polar.wedge().coords, exterior.coords, rtol=1e-8)

    def test_stiefel_preserved(self):
        info = {}
        system = constant_coefficient(np.diag([-1.0, -2.0, 3.0]) + np.triu(np.ones((3, 3)), 1), 2)
        frame = schur_frame(system, 0.0, "plus")
        shoot_polar(system, 0.0, "plus", init_polar(frame, frame), MeshSpec(10.0, abs_tol=1e-10, rel_tol=1e-10),
                    info=info)
        assert info["stiefel_max"] < 1e-8

    def test_davey_matches_drury(self):
        system = burgers_shock()
        frame = schur_frame(system, 1.0, "plus")
        mesh = MeshSpec(10.0, abs_tol=1e-11, rel_tol=1e-11)
        a = shoot_polar(system, 1.0, "plus", init_polar(frame, frame), mesh, "drury")
        b = shoot_polar(system, 1.0, "plus", init_polar(frame, frame), mesh, "davey")
        np.testing.assert_allclose(a.wedge().coords, b.wedge().coords, rtol=1e-8)

    def test_requires_orthonormal_start(self):
        system = burgers_shock()
        with pytest.raises(ValueError):
            shoot_polar(system, 1.0, "plus", PolarState(np.array([[2.0], [0.0]]), 0.0), MeshSpec(1.0))

    def test_unknown_variant(self):
        system = burgers_shock()
        frame = schur_frame(system, 1.0, "plus")
        with pytest.raises(ValueError):
            shoot_polar(system, 1.0, "plus", init_polar(frame, frame), MeshSpec(1.0), "gram-schmidt")

    def test_trajectory_csv(self, tmp_path):
        system = constant_coefficient(np.diag([-1.0, 2.0]), 1)
        frame = schur_frame(system, 0.0, "plus")
        records = []
        integrate_polar(system, 0.0, "plus", init_polar(frame, frame), 1.0, 0.0,
                        MeshSpec(1.0, "fixed", "erk4embedded", 0.25),
                        observer=lambda x, st: records.append((x, st, stiefel_error(st.omega))))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, records)
        lines = path.read_text().splitlines()
        assert len(lines) == 6
        assert lines[0].split(",")[-1] == "stiefelError"


class TestStiefelError:
    def test_orthonormal_is_zero(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 3)))
        assert stiefel_error(q) < 1e-14

    def test_scaled(self):
        assert stiefel_error(2 * np.eye(3)[:, :2]) == pytest.approx(3 * np.sqrt(2))


class TestDefaultTruncation:
    def test_bounds_and_scaling(self):
        m = default_truncation(burgers_shock(), 1.0)
        assert 2.0 <= m <= 200.0
        assert default_truncation(burgers_shock(), 1.0, target=1e-12) > m
