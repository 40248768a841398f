"""Analytic continuation of invariant-subspace bases in the spectral parameter.

Discretizations of Kato's ODE ``R' = Pi' R`` along a contour in the
lambda-plane, and conversion of the continued bases into initial data for the
exterior-product and polar shooting methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegeneracyError, DimensionError, SingularityError, SplitError, SubspaceError
from .exterior import wedge_columns
from .linalg import eigenprojections, ordered_schur, realify_basis

#: Relative singular-value floor below which a continued frame is declared degenerate.
COLLAPSE_TOL = 1e-10


@dataclass(frozen=True)
class Contour:
    """Ordered nodes ``lam_0 .. lam_J`` in the spectral plane.

    `ts` are parameter values in ``[0, 1]`` used to place refinement nodes;
    `shape` maps a parameter to a point (a circle, say) so bisection stays on
    the curve.  Without `shape`, segments are straight.
    """

    points: np.ndarray
    closed: bool = False
    ts: Optional[np.ndarray] = None
    shape: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).reshape(-1)
        if pts.size < 2:
            raise ValueError("a contour needs at least two points")
        if np.any(pts[1:] == pts[:-1]):
            raise ValueError("consecutive contour points must be distinct")
        if self.closed and pts[0] != pts[-1]:
            raise ValueError("closed contour must repeat its first point exactly")
        ts = np.linspace(0.0, 1.0, pts.size) if self.ts is None else np.asarray(self.ts, float)
        if ts.shape != pts.shape:
            raise DimensionError("ts must match points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ts", ts)

    def __len__(self):
        return self.points.size

    def point_at(self, t, left, right):
        """Point at parameter `t` between neighbouring nodes `left`, `right`."""
        if self.shape is not None:
            return complex(self.shape(t))
        t0, t1 = self.ts[left], self.ts[right]
        w = (t - t0) / (t1 - t0)
        return complex((1 - w) * self.points[left] + w * self.points[right])

    @classmethod
    def circle(cls, center, radius, nodes=64):
        """Counterclockwise circle with `nodes` distinct points, closed."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        if nodes < 2:
            raise ValueError("need at least two nodes")
        center = complex(center)
        shape = lambda t: center + radius * np.exp(2j * np.pi * np.asarray(t))
        ts = np.arange(nodes + 1) / nodes
        pts = shape(ts)
        pts[-1] = pts[0]
        return cls(pts, closed=True, ts=ts, shape=shape)

    @classmethod
    def polyline(cls, vertices, nodes=None, closed=False):
        """Straight segments through `vertices`, optionally subdivided to about `nodes` points."""
        verts = np.asarray(vertices, dtype=complex).reshape(-1)
        if closed and verts[0] != verts[-1]:
            verts = np.append(verts, verts[0])
        if nodes is None or nodes <= verts.size:
            pts = verts
        else:
            lengths = np.abs(np.diff(verts))
            per = np.maximum(1, np.round(lengths / lengths.sum() * (nodes - 1)).astype(int))
            pieces = [verts[i] + (verts[i + 1] - verts[i]) * np.arange(per[i]) / per[i]
                      for i in range(verts.size - 1)]
            pts = np.concatenate(pieces + [verts[-1:]])
        return cls(pts, closed=closed)

    @classmethod
    def parse(cls, text, nodes=64):
        """Parse ``circle:center,radius`` or ``polyline:l1;l2;...``."""
        kind, _, body = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "circle":
                center, radius = body.split(",")
                return cls.circle(complex(center.strip().replace(" ", "")), float(radius), nodes)
            if kind == "polyline":
                verts = [complex(v.strip().replace(" ", "")) for v in body.split(";") if v.strip()]
                closed = len(verts) > 2 and verts[0] == verts[-1]
                return cls.polyline(verts, nodes=nodes, closed=closed)
        except ValueError as exc:
            raise ValueError(f"cannot parse contour {text!r}: {exc}") from exc
        raise ValueError(f"unknown contour kind {kind!r}; expected circle:c,r or polyline:l1;l2;...")


@dataclass
class KatoPath:
    contour: Contour
    side: str
    projectors: list
    frames: list

    def identity_defect(self):
        """Largest relative ``|Pi_j R_j - R_j|`` along the path."""
        return max(
            np.linalg.norm(p @ r - r) / max(np.linalg.norm(r), 1e-300)
            for p, r in zip(self.projectors, self.frames)
        )


def side_projector(system, lam, side):
    """Projector onto the decaying subspace at one end: stable of A_+ or unstable of A_-."""
    try:
        pair = eigenprojections(system.limit(side, lam), system.k)
    except SplitError as exc:
        raise SplitError(f"splitting fails at lambda = {complex(lam):.6g}: {exc}", lam=lam,
                         condition=exc.condition) from exc
    return pair.side(side)


def projector_path(system, contour, side):
    """Relevant eigenprojection at every contour node (see :func:`side_projector`)."""
    return [side_projector(system, lam, side) for lam in contour.points]


def schur_frame(system, lam, side, real=None):
    """Orthonormal Schur basis of the tracked subspace at `lam`.

    With ``real=True`` (the default when the system has real coefficients and
    `lam` is real) the basis is chosen real so conjugate symmetry of the
    Evans function is preserved.
    """
    a = system.limit(side, lam)
    m = system.tracked_dim(side)
    basis = ordered_schur(a if side == "plus" else -a).leading_basis(m)
    if real is None:
        real = system.real_coefficients and complex(lam).imag == 0
    if real:
        rb = realify_basis(basis)
        if rb is not None:
            basis = rb
    return basis


def _check_frame(frame, where):
    s = np.linalg.svd(frame, compute_uv=False)
    if s.size and (s[0] == 0.0 or s[-1] < COLLAPSE_TOL * s[0]):
        smin = s[-1] if s.size else 0.0
        raise DegeneracyError(f"Kato frame lost rank at node {where} (sigma_min = {smin:.3e})")


def _start(projectors, r0):
    r = np.asarray(r0, dtype=complex)
    if r.ndim == 1:
        r = r[:, None]
    p0 = projectors[0]
    if r.shape[0] != p0.shape[0]:
        raise DimensionError("frame and projector dimensions differ")
    if np.linalg.norm(p0 @ r - r) > 1e-8 * max(np.linalg.norm(r), 1.0):
        raise SubspaceError("initial frame is not in the range of the initial projector")
    _check_frame(r, 0)
    return r


def continue_first_order(projectors, r0):
    """Greedy continuation ``R_{j+1} = Pi_{j+1} R_j``."""
    r = _start(projectors, r0)
    frames = [r]
    for j in range(1, len(projectors)):
        r = projectors[j] @ r
        _check_frame(r, j)
        frames.append(r)
    return frames


def kato_step(p_prev, p_next, r):
    """One second-order step ``R <- Pi_next [I + Pi_prev (I - Pi_next) / 2] R``."""
    n = p_next.shape[0]
    return p_next @ (r + 0.5 * (p_prev @ ((np.eye(n) - p_next) @ r)))


def continue_second_order(projectors, r0):
    """Reduced second-order explicit continuation of Kato's ODE."""
    r = _start(projectors, r0)
    frames = [r]
    for j in range(1, len(projectors)):
        r = kato_step(projectors[j - 1], projectors[j], r)
        _check_frame(r, j)
        frames.append(r)
    return frames


def kato_path(system, contour, side, order=2, r0=None):
    """Continue the tracked basis of `system` along `contour` from its first node."""
    projectors = projector_path(system, contour, side)
    if r0 is None:
        r0 = schur_frame(system, contour.points[0], side)
        r0 = projectors[0] @ r0
    if order == 1:
        frames = continue_first_order(projectors, r0)
    elif order == 2:
        frames = continue_second_order(projectors, r0)
    else:
        raise ValueError("order must be 1 or 2")
    return KatoPath(contour, side, projectors, frames)


def loop_closure_error(path):
    """``|R_J - R_0| / |R_0|`` after one circuit of a closed contour."""
    if not path.contour.closed:
        raise ValueError("loop closure is only defined on closed contours")
    r0, rj = path.frames[0], path.frames[-1]
    return float(np.linalg.norm(rj - r0) / np.linalg.norm(r0))


def branch_rescale(frames, eta, contour):
    """Multiply frame ``j`` by ``(eta^2 + 4 lam_j)^(1/4)`` (principal branch).

    Trades the quartic-root blow-up of the Kato basis at a square-root branch
    point for a bounded, square-root-singular basis.
    """
    if len(frames) != len(contour):
        raise DimensionError("one frame per contour node required")
    out = []
    for lam, frame in zip(contour.points, frames):
        base = eta * eta + 4.0 * complex(lam)
        if base == 0:
            raise SingularityError(f"lambda = {complex(lam)} is the branch point")
        out.append(frame * base ** 0.25)
    return out


def init_exterior(frame_plus, frame_minus):
    """Initial wedges ``R_1^+ ^ .. ^ R_k^+`` and ``R_1^- ^ .. ^ R_{n-k}^-``."""
    fp = np.asarray(frame_plus, dtype=complex)
    fm = np.asarray(frame_minus, dtype=complex)
    for name, f in (("plus", fp), ("minus", fm)):
        if f.ndim != 2:
            raise DimensionError(f"{name} frame must be 2-D")
        if f.shape[1]:
            _check_frame(f, name)
    return wedge_columns(fp), wedge_columns(fm)


@dataclass
class PolarState:
    """Polar coordinates ``(Omega, log gamma)`` of a wedge: ``gamma * (Omega_1 ^ .. ^ Omega_p)``.

    `omega_tilde` is the independent adjoint variable of the doubled system;
    it equals ``omega^*`` on exact trajectories.
    """

    omega: np.ndarray
    log_gamma: complex
    omega_tilde: Optional[np.ndarray] = None

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=complex)
        if self.omega_tilde is None:
            self.omega_tilde = self.omega.conj().T.copy()
        self.log_gamma = complex(self.log_gamma)

    def wedge(self):
        return wedge_columns(self.omega).scaled(np.exp(self.log_gamma))


def init_polar(frame, omega):
    """Polar data ``(Omega, log det(Omega^* R))`` representing the wedge of `frame`."""
    r = np.asarray(frame, dtype=complex)
    om = np.asarray(omega, dtype=complex)
    if r.shape != om.shape:
        raise DimensionError(f"frame {r.shape} and omega {om.shape} differ in shape")
    if r.shape[1] == 0:
        return PolarState(om, 0.0)
    if np.linalg.norm(om.conj().T @ om - np.eye(om.shape[1])) > 1e-10:
        raise SubspaceError("omega columns are not orthonormal")
    resid = np.linalg.norm(r - om @ (om.conj().T @ r))
    if resid > 1e-8 * np.linalg.norm(r):
        raise SubspaceError(f"frame is not in the span of omega (residual {resid:.3e})")
    det = np.linalg.det(om.conj().T @ r)
    if det == 0:
        raise DegeneracyError("frame is rank deficient")
    return PolarState(om, np.log(det))
