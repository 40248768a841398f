"""Named numerical experiments and their convergence reports."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .evans import METHODS, EvansEvaluator, doubled, sample_contour, winding_number
from .kato import Contour, PolarState, kato_path, loop_closure_error, schur_frame
from .linalg import sylvester_spectrum
from .problems import ScalarTestbed, constant_coefficient, exact_truncation_error
from .shooting import MeshSpec, integrate, integrate_polar, stiefel_error


@dataclass
class ConvergenceReport:
    """Errors against an abscissa (M, node count, a, distance) with a log-linear fit.

    `fitted_rate` is the negated slope of log(error) vs abscissa for
    exponential fits, or the slope of log(error) vs log(abscissa) for power
    fits (negated when ``decreasing``).  `fit_residual` is the RMS residual
    of the least-squares fit in log space.
    """

    kind: str
    abscissae: np.ndarray
    errors: np.ndarray
    fitted_rate: float
    fit_residual: float
    predicted: float = float("nan")
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "abscissae": [float(v) for v in self.abscissae],
            "errors": [float(v) for v in self.errors],
            "fitted_rate": _num(self.fitted_rate),
            "fit_residual": _num(self.fit_residual),
            "predicted": _num(self.predicted),
            "degenerate": self.degenerate,
            "extra": self.extra,
        }


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def fit_log_linear(abscissae, errors, log_x=False):
    """Least-squares ``log(err) = c + s * x`` (or ``* log x``); returns ``(s, rms residual)``."""
    x = np.log(abscissae) if log_x else np.asarray(abscissae, float)
    y = np.log(np.asarray(errors, float))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


# ---------------------------------------------------------------------------
# convergence in M


#: Errors below this are treated as at the roundoff floor.
ERROR_FLOOR = 1e-14


def converge_in_m(testbed, truncations=tuple(range(4, 13)), method="exterior", tol_factor=1e-3):
    """Truncation error of the Evans value vs M on the scalar testbed.

    The mesh tolerance is `tol_factor` times the smallest expected truncation
    error (floored at 1e-15), so discretization error stays subdominant.
    """
    if not isinstance(testbed, ScalarTestbed):
        raise ConfigError("convergence in M needs a closed-form reference (scalar-testbed)")
    system = testbed.system()
    ms = np.asarray(truncations, dtype=float)
    expected = np.array([abs(exact_truncation_error(testbed, m)) for m in ms])
    tol = max(tol_factor * expected.min(), 1e-15)
    reference = testbed.limit_value()
    errors, steps = [], []
    for m in ms:
        ev = EvansEvaluator(system, method, MeshSpec(float(m), abs_tol=tol, rel_tol=tol),
                            bvp_mesh=MeshSpec(float(m), "fixed", "midpoint", float(m) / round(m / 1e-3)))
        sample = ev.evaluate(ev.node_at(0.0))
        errors.append(abs(sample.value / reference - 1.0))
        steps.append(sample.diagnostics.get("steps"))
    errors = np.array(errors)
    degenerate = bool(np.any(errors <= ERROR_FLOOR))
    if degenerate:
        rate, resid = float("nan"), float("nan")
    else:
        slope, resid = fit_log_linear(ms, errors)
        rate = -slope
    return ConvergenceReport("converge-m", ms, errors, rate, resid, predicted=testbed.theta,
                             degenerate=degenerate,
                             extra={"expected_errors": expected.tolist(), "mesh_tol": tol, "steps": steps,
                                    "method": method})


# ---------------------------------------------------------------------------
# Stiefel stability


def random_hermitian(p, norm, rng):
    g = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    h = g + g.conj().T
    return h * (norm / np.linalg.norm(h))


def stiefel_experiment(matrix, k, eps=1e-3, seed=0, truncation=10.0, variant="drury", direction="backward",
                       step=0.01):
    """Growth or decay of the Stiefel error ``|Omega^* Omega - I|`` under the polar flow.

    The orthonormal stable Schur frame of `matrix` is perturbed to
    ``Omega0 (I + E0)^(1/2)`` with a seeded random Hermitian ``E0`` of norm
    `eps`.  ``backward`` integrates from ``x = M`` to 0; ``forward`` from 0
    until the error reaches 0.1 (or ``x = M``).  Integration uses fixed
    Runge-Kutta steps so the error is resolved far below its initial size.
    `fitted_rate` is the slope of log error per unit distance travelled
    (negative for decay).
    """
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    system = constant_coefficient(matrix, k)
    omega0 = schur_frame(system, 0.0, "plus", real=False)
    rng = np.random.default_rng(seed)
    e0 = random_hermitian(k, eps, rng)
    omega = omega0 @ scipy.linalg.sqrtm(np.eye(k) + e0)
    alpha = omega0.conj().T @ system.limit("plus", 0.0) @ omega0
    rates = sylvester_spectrum(alpha).real
    if direction == "backward":
        x0, x1, predicted = truncation, 0.0, -rates.min()
    else:
        x0, x1, predicted = 0.0, truncation, rates.max()
    predicted = 0.0 if variant == "davey" else predicted
    records = []

    class _Saturated(Exception):
        pass

    def observe(x, st):
        err = stiefel_error(st.omega)
        records.append((abs(x - x0), err))
        if direction == "forward" and err > 0.1:
            raise _Saturated

    mesh = MeshSpec(truncation, "fixed", "erk4embedded", step)
    try:
        integrate_polar(system, 0.0, "plus", PolarState(omega, 0.0), x0, x1, mesh, variant, observer=observe)
    except _Saturated:
        pass
    dist, errs = (np.array(v) for v in zip(*records))
    mask = errs > 1e-13
    if direction == "backward" and variant == "drury":
        mask &= dist >= 0.5 * truncation
    if mask.sum() < 3:
        mask = errs > 0
    slope, resid = fit_log_linear(dist[mask], errs[mask])
    return ConvergenceReport(f"stiefel-{direction}-{variant}", dist, errs, slope, resid, predicted=predicted,
                             extra={"sylvester_rates": sorted(set(np.round(rates, 12).tolist())),
                                    "initial_error": float(errs[0]), "seed": seed})


# ---------------------------------------------------------------------------
# mesh-count scaling


def mesh_count_study(a_values=tuple(2.0 ** np.arange(9)), tol=1e-6, decay_lengths=20.0):
    """Accepted RKF45 steps for ``w' = -a w`` on ``[0, L/a]`` vs `a`.

    The interval spans a fixed number `L` of decay lengths so that the
    count measures accuracy-limited steps, not the stability-limited tail
    of an already-decayed solution.  The centered equation (drift removed)
    is recorded alongside.
    """
    a_values = np.asarray(a_values, dtype=float)
    counts, centered = [], []
    for a in a_values:
        m = decay_lengths / a
        mesh = MeshSpec(m, abs_tol=tol, rel_tol=tol)
        _, st = integrate(lambda x, y, a=a: -a * y, np.array([1.0]), 0.0, m, mesh)
        counts.append(st.steps)
        _, st = integrate(lambda x, y: 0.0 * y, np.array([1.0]), 0.0, m, mesh)
        centered.append(st.steps)
    counts = np.array(counts, dtype=float)
    slope, resid = fit_log_linear(a_values, counts, log_x=True)
    return ConvergenceReport("mesh-study", a_values, counts, slope, resid, predicted=0.25,
                             extra={"centered_steps": centered, "tol": tol, "decay_lengths": decay_lengths})


# ---------------------------------------------------------------------------
# Kato scheme orders


def kato_order_study(system, center, radius, node_counts=(64, 128, 256, 512), order=2, metric="closure",
                     reference_factor=8):
    """Error of Kato continuation vs node count on the circle ``|lam - center| = radius``.

    ``metric="closure"`` measures ``|R_J - R_0| / |R_0|`` after one circuit;
    ``metric="pointwise"`` measures the frame at the antipodal node against a
    run with `reference_factor` times as many nodes.  The fitted rate is the
    order (negated slope of log error vs log J).
    """
    counts = np.asarray(node_counts, dtype=int)
    errors, defects = [], []
    side = "plus"
    if metric == "pointwise":
        ref = kato_path(system, Contour.circle(center, radius, int(counts.max() * reference_factor)), side, order)
        ref_frame = ref.frames[len(ref.frames) // 2]
    for j in counts:
        path = kato_path(system, Contour.circle(center, radius, int(j)), side, order)
        defects.append(path.identity_defect())
        if metric == "closure":
            errors.append(loop_closure_error(path))
        elif metric == "pointwise":
            frame = path.frames[int(j) // 2]
            errors.append(np.linalg.norm(frame - ref_frame) / np.linalg.norm(ref_frame))
        else:
            raise ValueError("metric must be 'closure' or 'pointwise'")
    errors = np.array(errors)
    degenerate = bool(np.any(errors <= ERROR_FLOOR))
    slope, resid = fit_log_linear(counts, np.maximum(errors, 1e-300), log_x=True)
    return ConvergenceReport(f"kato-order-{order}-{metric}", counts.astype(float), errors, -slope, resid,
                             predicted=float(order), degenerate=degenerate,
                             extra={"identity_defect": float(max(defects))})


# ---------------------------------------------------------------------------
# method comparison


def compare_methods(system, contour, methods=METHODS, mesh=None, bvp_mesh=None, winding_checks=True):
    """Sample D with each method on `contour`; report pairwise relative gaps and timings."""
    values, timings = {}, {}
    for m in methods:
        start = time.perf_counter()
        samples = sample_contour(system, contour, m, mesh, bvp_mesh=bvp_mesh)
        timings[m] = time.perf_counter() - start
        values[m] = np.array([s.value for s in samples])
    pairs = {}
    for i, a in enumerate(methods):
        for b in methods[i + 1:]:
            pairs[f"{a}|{b}"] = float(np.max(np.abs(values[a] - values[b]) / np.abs(values[a])))
    out = {"pairwise_max_rel": pairs, "seconds": timings, "values": values}
    if winding_checks and contour.closed:
        out["winding"] = [winding_number(system, c, methods[0], mesh).winding
                          for c in (contour, doubled(contour))]
    return out
