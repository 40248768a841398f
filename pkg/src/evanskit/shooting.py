"""One-sided integration of Evans systems from x = +-M toward x = 0.

Two formulations are provided:

* centered exterior products: the lifted system ``W' = (A_k(x) - mu) W`` on
  degree-k wedges, where ``mu`` is the summed eigenvalue of the tracked
  subspace, so constant-coefficient data is an exact equilibrium;
* polar coordinates: continuous orthogonalization (Drury) in doubled form
  ``(Omega, Omega~)`` together with the centered radial coordinate
  ``log gamma``; the Davey variant uses the generalized inverse instead.

All integration runs toward x = 0; the general-direction integrator is
exposed only for the Stiefel stability experiments.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegeneracyError, DimensionError, StepSizeError, StiefelWarning
from .exterior import WedgeVector, centered_drift, leibniz_lift
from .kato import PolarState
from .linalg import as_matrix

SCHEMES = ("backwardEuler", "midpoint", "erk4embedded")
#: Stiefel error above which a trajectory is no longer trusted.
STIEFEL_TRUST = 1e-6
#: Stiefel error that triggers an instability warning.
STIEFEL_ALARM = 1e-3


@dataclass(frozen=True)
class MeshSpec:
    """Truncation length and discretization for one shot.

    ``mode="fixed"`` uses uniform steps of size `step` (which must divide
    `truncation`); ``mode="adaptive"`` uses the embedded Runge-Kutta pair with
    error-per-unit-step control.
    """

    truncation: float
    mode: str = "adaptive"
    scheme: str = "erk4embedded"
    step: Optional[float] = None
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    h_min: Optional[float] = None
    h_max: Optional[float] = None

    def __post_init__(self):
        if not self.truncation > 0:
            raise ValueError("truncation M must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.mode == "fixed":
            if self.step is None or not self.step > 0:
                raise ValueError("fixed-step mesh needs a positive step")
            ratio = self.truncation / self.step
            if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
                raise ValueError(f"step {self.step} does not divide M = {self.truncation}")
        elif self.mode == "adaptive":
            if self.scheme != "erk4embedded":
                raise ValueError("adaptive mode requires the erk4embedded scheme")
            if not (self.abs_tol > 0 and self.rel_tol >= 0):
                raise ValueError("tolerances must be positive")
            if self.h_min is not None and self.h_max is not None and self.h_min > self.h_max:
                raise ValueError("h_min exceeds h_max")
        else:
            raise ValueError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")

    def with_truncation(self, truncation):
        step = self.step
        if self.mode == "fixed":
            # keep the step, adjusting slightly so it divides the new M
            count = max(1, round(truncation / self.step))
            step = truncation / count
        return MeshSpec(truncation, self.mode, self.scheme, step, self.abs_tol, self.rel_tol,
                        self.h_min, self.h_max)

    @property
    def min_step(self):
        return self.h_min if self.h_min is not None else 1e-10 * self.truncation

    @property
    def max_step(self):
        return self.h_max if self.h_max is not None else np.inf

    def to_dict(self):
        return {k: getattr(self, k) for k in ("truncation", "mode", "scheme", "step", "abs_tol",
                                               "rel_tol", "h_min", "h_max")}


def default_truncation(system, lam, target=1e-8, bounds=(2.0, 200.0)):
    """Truncation ``M = log(C / target) / theta`` with ``C = max |A(0) - A_pm|``."""
    a0 = np.asarray(system.coefficient(0.0, lam), dtype=complex)
    c = max(np.linalg.norm(a0 - system.limit("plus", lam), 2),
            np.linalg.norm(a0 - system.limit("minus", lam), 2), 1e-300)
    m = np.log(max(c / target, 1.0)) / system.decay_rate
    return float(np.clip(m, *bounds))


# ---------------------------------------------------------------------------
# single steps


def backward_euler_step(a_j, w_next, h):
    """Implicit Euler step toward smaller x: solve ``(I + h a_j) w_j = w_next``.

    `a_j` is the coefficient at the new node ``x_j = x_{j+1} - h``.
    """
    a_j = as_matrix(a_j)
    w_next = np.asarray(w_next, dtype=complex)
    if h <= 0:
        raise ValueError("step must be positive")
    lhs = np.eye(a_j.shape[0]) + h * a_j
    try:
        cond = np.linalg.cond(lhs)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError(f"cond = {cond:.3e}")
        return np.linalg.solve(lhs, w_next)
    except np.linalg.LinAlgError as exc:
        raise StepSizeError(f"singular implicit Euler solve with h = {h:g}; reduce the step ({exc})") from exc


def midpoint_step(a_j, w_far, w_mid, span):
    """Two-step midpoint (leapfrog) update ``w_new = w_far + span * a_j @ w_mid``.

    `span` is the signed distance ``x_new - x_far`` (twice the step).
    """
    a_j = as_matrix(a_j)
    return np.asarray(w_far, dtype=complex) + span * (a_j @ np.asarray(w_mid, dtype=complex))


# Runge-Kutta-Fehlberg 4(5): propagate the 4th-order solution, estimate with the 5th.
_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_RKF_E = _RKF_B5 - _RKF_B4


def _rkf_stages(rhs, x, y, dx, f0=None):
    ks = [rhs(x, y) if f0 is None else f0]
    for i in range(1, 6):
        yi = y + dx * sum(a * k for a, k in zip(_RKF_A[i], ks))
        ks.append(rhs(x + _RKF_C[i] * dx, yi))
    return ks


def _rkf_step(rhs, x, y, dx, f0=None):
    ks = _rkf_stages(rhs, x, y, dx, f0)
    y4 = y + dx * sum(b * k for b, k in zip(_RKF_B4, ks) if b)
    err = dx * sum(e * k for e, k in zip(_RKF_E, ks) if e)
    return y4, err


@dataclass
class IntegrationStats:
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0

    def to_dict(self):
        return {"steps": self.steps, "rejected": self.rejected, "evaluations": self.evaluations}


def integrate(rhs, y0, x0, x1, mesh, linear=None, observer=None):
    """Integrate ``y' = rhs(x, y)`` from `x0` to `x1` with the scheme of `mesh`.

    Parameters
    ----------
    rhs : callable
        ``(x, y) -> dy/dx`` for arrays `y` of any fixed shape.
    linear : callable, optional
        ``x -> L(x)`` with ``rhs(x, y) = L(x) @ y`` for vector `y`; lets the
        implicit Euler scheme use a direct solve.
    observer : callable, optional
        Called as ``observer(x, y)`` at the start and after every accepted step.

    Returns
    -------
    y : ndarray
        Solution at `x1`.
    stats : IntegrationStats
    """
    y = np.array(y0, dtype=complex)
    stats = IntegrationStats()
    counted = _counting(rhs, stats)
    if observer is not None:
        observer(x0, y)
    if x1 == x0:
        return y, stats
    if mesh.mode == "fixed":
        y = _integrate_fixed(counted, y, x0, x1, mesh, linear, observer, stats)
    else:
        y = _integrate_adaptive(counted, y, x0, x1, mesh, observer, stats)
    return y, stats


def _counting(rhs, stats):
    def wrapped(x, y):
        stats.evaluations += 1
        return rhs(x, y)

    return wrapped


def _implicit_euler(rhs, linear, x_new, y, dx):
    if linear is not None:
        lhs = np.eye(y.size) - dx * np.asarray(linear(x_new), dtype=complex)
        try:
            return np.linalg.solve(lhs, y.reshape(-1)).reshape(y.shape)
        except np.linalg.LinAlgError as exc:
            raise StepSizeError(f"singular implicit Euler solve at x = {x_new:g}", x=x_new) from exc
    # nonlinear: fixed-point iteration on y_new = y + dx f(x_new, y_new)
    z = y + dx * rhs(x_new, y)
    scale = max(np.linalg.norm(y), 1.0)
    for _ in range(100):
        z_next = y + dx * rhs(x_new, z)
        if np.linalg.norm(z_next - z) <= 1e-14 * scale:
            return z_next
        z = z_next
    raise StepSizeError(f"implicit Euler iteration did not converge at x = {x_new:g}; reduce the step",
                        x=x_new)


def _integrate_fixed(rhs, y, x0, x1, mesh, linear, observer, stats):
    count = max(1, int(round(abs(x1 - x0) / mesh.step)))
    dx = (x1 - x0) / count
    xs = x0 + dx * np.arange(count + 1)
    xs[-1] = x1
    if mesh.scheme == "backwardEuler":
        for j in range(count):
            y = _implicit_euler(rhs, linear, xs[j + 1], y, dx)
            stats.steps += 1
            if observer is not None:
                observer(xs[j + 1], y)
    elif mesh.scheme == "erk4embedded":
        for j in range(count):
            y, _ = _rkf_step(rhs, xs[j], y, dx)
            stats.steps += 1
            if observer is not None:
                observer(xs[j + 1], y)
    else:  # leapfrog, started with one Runge-Kutta step
        y_prev = y
        y, _ = _rkf_step(rhs, xs[0], y, dx)
        stats.steps += 1
        if observer is not None:
            observer(xs[1], y)
        for j in range(1, count):
            y_prev, y = y, y_prev + 2.0 * dx * rhs(xs[j], y)
            stats.steps += 1
            if observer is not None:
                observer(xs[j + 1], y)
    if not np.all(np.isfinite(y)):
        raise StepSizeError(f"fixed-step {mesh.scheme} solution blew up", x=x1)
    return y


def _error_norm(err, y, y_new, mesh, dx):
    scale = mesh.abs_tol + mesh.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2))) / abs(dx)


def _initial_step(rhs, x0, y, f0, span, mesh):
    scale = mesh.abs_tol + mesh.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    if d1 == 0.0:
        return min(span, mesh.max_step)
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * span
    return float(np.clip(h, mesh.min_step, min(span, mesh.max_step)))


def _integrate_adaptive(rhs, y, x0, x1, mesh, observer, stats):
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    x = x0
    f0 = rhs(x, y)
    h = _initial_step(rhs, x0, y, f0, span, mesh)
    while direction * (x1 - x) > 0:
        last = h >= abs(x1 - x) * (1 - 1e-12)
        if last:
            h = abs(x1 - x)
        dx = direction * h
        y_new, err = _rkf_step(rhs, x, y, dx, f0)
        ratio = _error_norm(err, y, y_new, mesh, dx)
        if ratio <= 1.0 and np.all(np.isfinite(y_new)):
            x = x1 if last else x + dx
            y = y_new
            stats.steps += 1
            if observer is not None:
                observer(x, y)
            f0 = rhs(x, y) if direction * (x1 - x) > 0 else None
            factor = 5.0 if ratio == 0.0 else min(5.0, 0.9 * ratio ** -0.25)
            h = min(h * max(factor, 0.2), mesh.max_step)
        else:
            stats.rejected += 1
            factor = 0.2 if not np.isfinite(ratio) else max(0.2, 0.9 * ratio ** -0.25)
            h *= factor
            if h < mesh.min_step:
                raise StepSizeError(f"step size underflow at x = {x:.6g} (h = {h:.3e})", x=x)
    return y


# ---------------------------------------------------------------------------
# centered exterior products


def _side_start(side, mesh):
    if side == "plus":
        return float(mesh.truncation)
    if side == "minus":
        return -float(mesh.truncation)
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def shoot_exterior(system, lam, side, init, mesh, info=None, observer=None):
    """Propagate the centered wedge from ``x = +-M`` to ``x = 0``.

    Integrates ``W' = (A_k(x, lam) - mu) W`` with ``W(+-M) = init``, where
    ``A_k`` is the Leibniz lift to the degree of `init` and ``mu`` the sum of
    the tracked eigenvalues of the limiting matrix on that side.
    """
    p = system.tracked_dim(side)
    if init.degree != p or init.n != system.n:
        raise DimensionError(f"init has degree {init.degree} in C^{init.n}; expected {p} in C^{system.n}")
    mu = centered_drift(system.limit(side, lam), system.k, side)
    ident = np.eye(len(init.basis))

    def lifted(x):
        return leibniz_lift(system.coefficient(x, lam), p) - mu * ident

    def rhs(x, w):
        return lifted(x) @ w

    w, stats = integrate(rhs, init.coords, _side_start(side, mesh), 0.0, mesh, linear=lifted,
                         observer=observer)
    if info is not None:
        info.update(stats.to_dict(), truncation=mesh.truncation, drift=mu)
    return WedgeVector(init.basis, w)


# ---------------------------------------------------------------------------
# polar coordinates


def stiefel_error(omega):
    """Frobenius norm of ``Omega^* Omega - I``."""
    om = np.asarray(omega, dtype=complex)
    p = om.shape[1]
    return float(np.linalg.norm(om.conj().T @ om - np.eye(p)))


def _pack(state):
    return np.concatenate([state.omega.ravel(), state.omega_tilde.ravel(), [state.log_gamma]])


def _unpack(y, n, p):
    om = y[: n * p].reshape(n, p)
    omt = y[n * p: 2 * n * p].reshape(p, n)
    return om, omt, y[-1]


def polar_rhs(system, lam, side, variant="drury", homotopy=1.0):
    """Right-hand side of the doubled polar system (packed state vector).

    With ``homotopy = c`` the coefficient is ``A_pm + c (A - A_pm)``.
    """
    n = system.n
    p = system.tracked_dim(side)
    a_lim = system.limit(side, lam)
    mu = centered_drift(a_lim, system.k, side)
    eye = np.eye(n)

    def coefficient(x):
        a = np.asarray(system.coefficient(x, lam), dtype=complex)
        return a if homotopy == 1.0 else a_lim + homotopy * (a - a_lim)

    if variant == "drury":
        def rhs(x, y):
            om, omt, _ = _unpack(y, n, p)
            a = coefficient(x)
            proj = eye - om @ omt
            d_om = proj @ (a @ om)
            d_omt = (omt @ a.conj().T) @ proj
            d_lg = np.trace(omt @ a @ om) - mu
            return np.concatenate([d_om.ravel(), d_omt.ravel(), [d_lg]])
    elif variant == "davey":
        def rhs(x, y):
            om, _, _ = _unpack(y, n, p)
            a = coefficient(x)
            gram = om.conj().T @ om
            try:
                pinv = np.linalg.solve(gram, om.conj().T)
            except np.linalg.LinAlgError as exc:
                raise DegeneracyError(f"Omega^* Omega singular at x = {x:g}") from exc
            aom = a @ om
            d_om = aom - om @ (pinv @ aom)
            d_lg = np.trace(pinv @ aom) - mu
            d_omt = np.zeros((p, n), dtype=complex)
            return np.concatenate([d_om.ravel(), d_omt.ravel(), [d_lg]])
    else:
        raise ValueError(f"variant must be 'drury' or 'davey', got {variant!r}")
    return rhs


def integrate_polar(system, lam, side, state, x_start, x_end, mesh, variant="drury", observer=None):
    """Integrate polar coordinates between arbitrary points (either direction)."""
    n = system.n
    p = system.tracked_dim(side)
    if state.omega.shape != (n, p):
        raise DimensionError(f"omega has shape {state.omega.shape}; expected {(n, p)}")
    rhs = polar_rhs(system, lam, side, variant)
    wrapped = None
    if observer is not None:
        def wrapped(x, y):
            om, omt, lg = _unpack(y, n, p)
            observer(x, PolarState(om.copy(), lg, omt.copy()))
    y, stats = integrate(rhs, _pack(state), x_start, x_end, mesh, observer=wrapped)
    om, omt, lg = _unpack(y, n, p)
    if variant == "davey":
        omt = om.conj().T
    return PolarState(om.copy(), lg, omt.copy()), stats


def shoot_polar(system, lam, side, init, mesh, variant="drury", info=None, observer=None):
    """Propagate polar coordinates ``(Omega, Omega~, log gamma)`` from ``+-M`` to 0.

    The Stiefel error along the trajectory is recorded in ``info["stiefel_max"]``;
    if it exceeds ``STIEFEL_ALARM`` a :class:`StiefelWarning` is issued and the
    trajectory is left in ``info["trajectory"]``.
    """
    if stiefel_error(init.omega) > 1e-10:
        raise ValueError("initial Omega must be orthonormal to 1e-10")
    trajectory = []

    def record(x, st):
        trajectory.append((x, st, stiefel_error(st.omega)))
        if observer is not None:
            observer(x, st)

    out, stats = integrate_polar(system, lam, side, init, _side_start(side, mesh), 0.0, mesh,
                                 variant, observer=record)
    worst = max(e for _, _, e in trajectory)
    if info is not None:
        info.update(stats.to_dict(), truncation=mesh.truncation, stiefel_max=worst)
    if worst > STIEFEL_ALARM:
        if info is not None:
            info["trajectory"] = trajectory
        warnings.warn(
            f"Stiefel error reached {worst:.3e} at lambda = {complex(lam):.6g} ({side} side)",
            StiefelWarning,
            stacklevel=2,
        )
    return out


def write_trajectory_csv(path, trajectory):
    """Dump ``(x, state, stiefel)`` records: x, Re/Im of every state entry, stiefelError.

    `state` may be a PolarState or a plain coefficient array.
    """
    rows = []
    for x, state, err in trajectory:
        if isinstance(state, PolarState):
            vec = np.concatenate([state.omega.ravel(), [state.log_gamma]])
        else:
            vec = np.asarray(state, dtype=complex).ravel()
        rows.append((x, vec, err))
    width = rows[0][1].size if rows else 0
    header = ["x"] + [f"{part}{i}" for i in range(width) for part in ("re", "im")] + ["stiefelError"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, vec, err in rows:
            cells = [repr(float(x))]
            for v in vec:
                cells += [repr(float(v.real)), repr(float(v.imag))]
            cells.append(repr(float(err)) if err is not None else "")
            writer.writerow(cells)
