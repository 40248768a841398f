"""Boundary-value alternatives to shooting.

Both solvers discretize a first-order system ``y' = F(x, y)`` on the uniform
mesh ``x_j = +-j h``, ``j = 0..J``, ``x_J = +-M`` with the two-step midpoint
scheme in the interior, a second-order one-sided closure at ``x = 0`` and a
Dirichlet condition at ``x = +-M``.  The global residual is solved by damped
Newton with a banded Jacobian, continued in the homotopy
``A_c = A_pm + c (A - A_pm)`` from the exactly solvable ``c = 0``.

The conjugator ``P`` satisfies ``P' = A P - P A_pm`` with ``P(+-M) = I``, so
that ``W = P Z`` maps solutions of the limiting equation ``Z' = A_pm Z`` to
solutions of ``W' = A W``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, HomotopyError, StiefelWarning
from .exterior import centered_drift
from .kato import PolarState
from .linalg import as_matrix, numerical_rank
from .shooting import STIEFEL_ALARM, MeshSpec

#: Default uniform step for boundary-value meshes.
DEFAULT_BVP_STEP = 2e-3
#: Smallest homotopy increment reached by bisection.
MIN_HOMOTOPY_STEP = 1.0 / 160.0


@dataclass(frozen=True)
class HomotopySchedule:
    c_values: tuple = tuple(np.linspace(0.0, 1.0, 11))
    max_newton_iters: int = 20
    newton_tol: float = 1e-10

    def __post_init__(self):
        c = np.asarray(self.c_values, dtype=float)
        if c.size < 2 or c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) <= 0):
            raise ValueError("homotopy values must increase strictly from 0 to 1")
        if self.max_newton_iters < 1 or not self.newton_tol > 0:
            raise ValueError("need max_newton_iters >= 1 and newton_tol > 0")
        object.__setattr__(self, "c_values", tuple(float(v) for v in c))

    @classmethod
    def uniform(cls, stages=10, **kwargs):
        return cls(tuple(np.linspace(0.0, 1.0, stages + 1)), **kwargs)


@dataclass
class ConjugatorPath:
    """Conjugator values ``P_j`` at nodes ``x_j`` (``x_0 = 0``)."""

    side: str
    nodes: np.ndarray
    values: np.ndarray
    newton_iters: list = field(default_factory=list)

    def at_origin(self):
        return self.values[0]

    def defect(self):
        """``|P_j - I|`` (spectral norm) at every node."""
        n = self.values.shape[1]
        return np.linalg.norm(self.values - np.eye(n), ord=2, axis=(1, 2))

    def fitted_decay(self, window=(0.0, 0.5)):
        """Least-squares decay rate of ``|P_j - I|`` over a fraction of ``[0, M]``."""
        dist = np.abs(self.nodes)
        m = dist[-1]
        defect = self.defect()
        mask = (dist >= window[0] * m) & (dist <= window[1] * m) & (defect > 0)
        if mask.sum() < 3:
            raise ValueError("not enough nonzero samples to fit a decay rate")
        slope, _ = np.polyfit(dist[mask], np.log(defect[mask]), 1)
        return float(-slope)

    def max_condition(self):
        return float(max(np.linalg.cond(p) for p in self.values))


def _bvp_mesh(mesh):
    if mesh.mode == "fixed":
        return mesh
    count = max(1, int(np.ceil(mesh.truncation / DEFAULT_BVP_STEP)))
    return MeshSpec(mesh.truncation, "fixed", "midpoint", mesh.truncation / count)


def _nodes(side, mesh):
    mesh = _bvp_mesh(mesh)
    count = int(round(mesh.truncation / mesh.step))
    if count < 3:
        raise ValueError("boundary-value mesh needs at least three intervals")
    sign = 1.0 if side == "plus" else -1.0
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    return sign * mesh.truncation * np.arange(count + 1) / count


def _jacobian_pattern(count, m):
    """Row/column indices of the block Jacobian; block values are filled later.

    Unknowns are ``y_0 .. y_{J-1}``; rows are the closure at 0 and the
    midpoint equations at ``j = 1 .. J-1``.
    """
    rows, cols = [], []
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    eye = np.arange(m)
    # closure row: diag block on y0 (full), identities on y1, y2
    rows.append(ii); cols.append(jj)
    rows.append(eye); cols.append(m + eye)
    rows.append(eye); cols.append(2 * m + eye)
    # interior rows
    js = np.arange(1, count)
    rows.append((js[:, None] * m + eye).ravel()); cols.append(((js - 1)[:, None] * m + eye).ravel())
    rows.append((js[:, None] * m + ii).ravel()); cols.append((js[:, None] * m + jj).ravel())
    inner = js[js + 1 < count]
    rows.append((inner[:, None] * m + eye).ravel()); cols.append(((inner + 1)[:, None] * m + eye).ravel())
    return np.concatenate(rows), np.concatenate(cols), inner.size


class _MidpointBVP:
    """Global residual and Jacobian of the midpoint discretization."""

    def __init__(self, nodes, rhs, jac, boundary):
        self.nodes = nodes
        self.rhs = rhs  # (ys[J+1, m]) -> F[J+1, m]
        self.jac = jac  # (ys[J+1, m]) -> dF[J+1, m, m]
        self.boundary = np.asarray(boundary, dtype=complex)
        self.count = nodes.size - 1
        self.m = self.boundary.size
        self.dx = nodes[1] - nodes[0]
        self.pattern = _jacobian_pattern(self.count, self.m)

    def full(self, unknowns):
        return np.vstack([unknowns.reshape(self.count, self.m), self.boundary[None, :]])

    def residual(self, unknowns):
        ys = self.full(unknowns)
        f = self.rhs(ys)
        h2 = 2.0 * self.dx
        res = np.empty((self.count, self.m), dtype=complex)
        res[0] = -3.0 * ys[0] + 4.0 * ys[1] - ys[2] - h2 * f[0]
        res[1:] = ys[2:] - ys[:-2] - h2 * f[1:-1]
        return res.ravel()

    def jacobian(self, unknowns):
        ys = self.full(unknowns)
        df = self.jac(ys)
        h2 = 2.0 * self.dx
        m = self.m
        rows, cols, n_inner = self.pattern
        eye = np.eye(m)
        vals = [
            (-3.0 * eye - h2 * df[0]).ravel(),
            np.full(m, 4.0),
            np.full(m, -1.0),
            np.full((self.count - 1) * m, -1.0),
            (-h2 * df[1:self.count]).reshape(-1),
            np.ones(n_inner * m),
        ]
        # LAPACK band storage: lower bandwidth m, upper 2m (closure row)
        lower, upper = m, 2 * m
        band = np.zeros((lower + upper + 1, self.count * m), dtype=complex)
        band[upper + rows - cols, cols] = np.concatenate(vals)
        return (lower, upper), band

    def solve(self, unknowns, rhs):
        bands, band = self.jacobian(unknowns)
        return scipy.linalg.solve_banded(bands, band, rhs, check_finite=False)


def _newton(problem, guess, schedule):
    """Damped Newton; returns ``(solution, iterations)`` or raises RuntimeError."""
    y = guess.copy()
    res = problem.residual(y)
    rnorm = np.linalg.norm(res)
    for it in range(schedule.max_newton_iters + 1):
        if rnorm <= schedule.newton_tol * max(1.0, np.linalg.norm(y)) * np.sqrt(problem.count):
            return y, it
        if it == schedule.max_newton_iters:
            break
        try:
            step = problem.solve(y, -res)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise RuntimeError(f"singular Newton system: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise RuntimeError("singular Newton system")
        t = 1.0
        for _ in range(9):
            trial = y + t * step
            trial_res = problem.residual(trial)
            trial_norm = np.linalg.norm(trial_res)
            if np.isfinite(trial_norm) and trial_norm < rnorm:
                break
            t *= 0.5
        else:
            raise RuntimeError(f"damping failed to reduce the residual ({rnorm:.3e})")
        y, res, rnorm = trial, trial_res, trial_norm
        if np.linalg.norm(t * step) <= 1e-15 * max(1.0, np.linalg.norm(y)):
            return y, it + 1
    raise RuntimeError(f"Newton did not converge in {schedule.max_newton_iters} iterations "
                       f"(residual {rnorm:.3e})")


def _continue(build, seed, schedule):
    """Run the homotopy ``c: 0 -> 1`` warm-starting Newton; bisect failed stages."""
    y = seed
    c_done = 0.0
    iters = []
    targets = list(schedule.c_values[1:])
    while targets:
        c = targets[0]
        try:
            y_new, it = _newton(build(c), y, schedule)
        except RuntimeError as exc:
            gap = c - c_done
            if gap / 2.0 < MIN_HOMOTOPY_STEP * (1 - 1e-9):
                raise HomotopyError(f"homotopy failed at c = {c:.6g}: {exc}", last_good_c=c_done) from exc
            targets.insert(0, c_done + gap / 2.0)
            continue
        y, c_done = y_new, c
        iters.append(it)
        targets.pop(0)
    return y, iters


# ---------------------------------------------------------------------------
# conjugator


def solve_conjugator(system, lam, side, mesh, schedule=None):
    """Conjugator ``P`` on ``[0, +-M]`` with ``P(+-M) = I``.

    Solves ``P' = A_c P - P A_pm`` stage by stage for ``A_c = A_pm + c (A - A_pm)``.
    """
    schedule = schedule or HomotopySchedule()
    nodes = _nodes(side, mesh)
    n = system.n
    a_lim = system.limit(side, lam)
    a_nodes = np.array([system.coefficient(x, lam) for x in nodes], dtype=complex)
    eye_n = np.eye(n)
    # vec (row-major) of A P - P A_lim is (A kron I - I kron A_lim^T) vec P
    lim_part = np.kron(eye_n, a_lim.T)

    def build(c):
        a_c = a_lim + c * (a_nodes - a_lim)
        blocks = np.einsum("jab,cd->jacbd", a_c, eye_n).reshape(-1, n * n, n * n) - lim_part
        rhs = lambda ys: np.einsum("jab,jb->ja", blocks, ys)
        jac = lambda ys: blocks
        return _MidpointBVP(nodes, rhs, jac, eye_n.ravel())

    seed = np.tile(eye_n.ravel(), nodes.size - 1)
    y, iters = _continue(build, seed, schedule)
    values = np.vstack([y.reshape(-1, n, n), eye_n[None]])
    return ConjugatorPath(side, nodes, values, iters)


# ---------------------------------------------------------------------------
# polar boundary-value problem


def _polar_fields(a, omega, omega_t, mu):
    """Batched right side of the doubled polar system."""
    ah = np.conj(np.swapaxes(a, 1, 2))
    n = a.shape[1]
    a_om = a @ omega
    proj = np.eye(n) - omega @ omega_t
    d_om = proj @ a_om
    d_omt = (omega_t @ ah) @ proj
    d_lg = np.trace(omega_t @ a_om, axis1=1, axis2=2) - mu
    return d_om, d_omt, d_lg


def _polar_jvp(a, omega, omega_t, d_om, d_omt):
    """Directional derivative of the doubled polar field at ``(omega, omega_t)``."""
    ah = np.conj(np.swapaxes(a, 1, 2))
    a_om = a @ omega
    alpha = omega_t @ a_om
    j_om = a @ d_om - d_om @ alpha - omega @ (d_omt @ a_om) - omega @ (omega_t @ (a @ d_om))
    omt_ah = omega_t @ ah
    j_omt = (d_omt @ ah - d_omt @ (ah @ omega) @ omega_t - omt_ah @ d_om @ omega_t
             - (omt_ah @ omega) @ d_omt)
    j_lg = np.trace(d_omt @ a_om, axis1=1, axis2=2) + np.trace(omega_t @ (a @ d_om), axis1=1, axis2=2)
    return j_om, j_omt, j_lg


def solve_polar_bvp(system, lam, side, init, mesh, schedule=None, info=None):
    """Doubled polar system on ``[0, +-M]`` with ``(Omega, Omega~, log gamma)(+-M)`` fixed.

    `init` supplies the boundary data (typically from :func:`kato.init_polar`);
    the constant state is the exact solution of the ``c = 0`` stage.
    """
    schedule = schedule or HomotopySchedule()
    nodes = _nodes(side, mesh)
    n = system.n
    p = system.tracked_dim(side)
    if init.omega.shape != (n, p):
        raise DimensionError(f"omega has shape {init.omega.shape}; expected {(n, p)}")
    a_lim = system.limit(side, lam)
    mu = centered_drift(a_lim, system.k, side)
    a_nodes = np.array([system.coefficient(x, lam) for x in nodes], dtype=complex)
    np_ = n * p
    m = 2 * np_ + 1

    def split(ys):
        return (ys[:, :np_].reshape(-1, n, p), ys[:, np_:2 * np_].reshape(-1, p, n), ys[:, -1])

    def build(c):
        a_c = a_lim + c * (a_nodes - a_lim)

        def rhs(ys):
            om, omt, _ = split(ys)
            d_om, d_omt, d_lg = _polar_fields(a_c, om, omt, mu)
            return np.concatenate([d_om.reshape(-1, np_), d_omt.reshape(-1, np_), d_lg[:, None]], axis=1)

        def jac(ys):
            om, omt, _ = split(ys)
            count = ys.shape[0]
            out = np.zeros((count, m, m), dtype=complex)
            for col in range(2 * np_):
                e = np.zeros(2 * np_)
                e[col] = 1.0
                d_om = np.broadcast_to(e[:np_].reshape(n, p), (count, n, p))
                d_omt = np.broadcast_to(e[np_:].reshape(p, n), (count, p, n))
                j_om, j_omt, j_lg = _polar_jvp(a_c, om, omt, d_om, d_omt)
                out[:, :np_, col] = j_om.reshape(count, np_)
                out[:, np_:2 * np_, col] = j_omt.reshape(count, np_)
                out[:, -1, col] = j_lg
            return out

        return _MidpointBVP(nodes, rhs, jac, boundary)

    boundary = np.concatenate([init.omega.ravel(), init.omega_tilde.ravel(), [init.log_gamma]])
    seed = np.tile(boundary, nodes.size - 1)
    y, iters = _continue(build, seed, schedule)
    ys = np.vstack([y.reshape(-1, m), boundary[None, :]])
    om, omt, lg = split(ys)
    gram = np.conj(np.swapaxes(om, 1, 2)) @ om
    drift = np.linalg.norm(gram - np.eye(p), axis=(1, 2)).max() if p else 0.0
    if info is not None:
        info.update(newton_iters=iters, nodes=int(nodes.size), truncation=float(abs(nodes[-1])),
                    stiefel_max=float(drift))
    if drift > STIEFEL_ALARM:
        warnings.warn(f"Stiefel error reached {drift:.3e} in the polar BVP at lambda = {complex(lam):.6g}",
                      StiefelWarning, stacklevel=2)
    return PolarState(om[0].copy(), lg[0], omt[0].copy())


# ---------------------------------------------------------------------------
# well-posedness


def lopatinski_check(pi0, complement_basis):
    """``|det|`` of ``pi0`` restricted to the span of `complement_basis`.

    Both the subspace and the range of `pi0` are given orthonormal bases, so
    the value lies in ``[0, 1]`` for orthogonal projectors; values below
    ``1e-8`` signal ill-posed projective boundary conditions.
    """
    pi0 = as_matrix(pi0, name="pi0")
    basis = as_matrix(complement_basis, square=False, name="complement_basis")
    n = pi0.shape[0]
    if basis.shape[0] != n:
        raise DimensionError(f"basis has {basis.shape[0]} rows; projector is {n} x {n}")
    if np.linalg.norm(pi0 @ pi0 - pi0) > 1e-8 * max(1.0, np.linalg.norm(pi0)):
        raise ValueError("pi0 is not idempotent to 1e-8")
    m = basis.shape[1]
    if numerical_rank(pi0) != m:
        raise DimensionError(f"projector rank {numerical_rank(pi0)} differs from subspace dimension {m}")
    if numerical_rank(basis) != m:
        raise ValueError("complement basis is rank deficient")
    s_orth, _ = np.linalg.qr(basis)
    u, _, _ = np.linalg.svd(pi0)
    return float(abs(np.linalg.det(u[:, :m].conj().T @ pi0 @ s_orth)))
