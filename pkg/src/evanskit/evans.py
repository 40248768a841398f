"""Evans function assembly, contour sampling and winding numbers."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bvp import HomotopySchedule, solve_conjugator, solve_polar_bvp
from .errors import BudgetError, DimensionError, EvansError, NearZeroError, SingularityError
from .exterior import coordinatize_top, wedge_columns
from .kato import init_exterior, init_polar, kato_path, kato_step, schur_frame, side_projector
from .problems import check_splitting
from .shooting import MeshSpec, default_truncation, shoot_exterior, shoot_polar

METHODS = ("exterior", "polar", "polar-bvp", "conjugation")
#: Largest accepted relative change of D between consecutive contour samples.
ROUCHE_STEP = 0.1
#: Default cap on the number of samples per contour.
SAMPLE_BUDGET = 4096
#: |D| below this fraction of max |D| counts as a zero on the contour.
NEAR_ZERO = 1e-13


def evans_from_exterior(w_plus, w_minus):
    """``D = <W+ ^ W->`` at x = 0."""
    return coordinatize_top(w_plus, w_minus)


def evans_from_polar(state_plus, state_minus):
    """``D = gamma+ gamma- det(Omega+, Omega-)``."""
    om_p, om_m = state_plus.omega, state_minus.omega
    if om_p.shape[0] != om_m.shape[0] or om_p.shape[1] + om_m.shape[1] != om_p.shape[0]:
        raise DimensionError(f"polar frames {om_p.shape} and {om_m.shape} do not fill C^n")
    det = np.linalg.det(np.hstack([om_p, om_m])) if om_p.shape[0] else 1.0
    return complex(np.exp(state_plus.log_gamma + state_minus.log_gamma) * det)


def evans_from_conjugators(p_plus, p_minus, r_plus, r_minus):
    """``D = det(P+ R+, P- R-)`` at x = 0."""
    p_plus, p_minus = np.asarray(p_plus, complex), np.asarray(p_minus, complex)
    r_plus, r_minus = np.atleast_2d(np.asarray(r_plus, complex)), np.atleast_2d(np.asarray(r_minus, complex))
    n = p_plus.shape[0]
    if p_minus.shape != (n, n) or p_plus.shape != (n, n):
        raise DimensionError("conjugators must both be n x n")
    if r_plus.shape[0] != n or r_minus.shape[0] != n or r_plus.shape[1] + r_minus.shape[1] != n:
        raise DimensionError("frames do not fill C^n")
    return complex(np.linalg.det(np.hstack([p_plus @ r_plus, p_minus @ r_minus])))


@dataclass
class EvansSample:
    """One evaluation ``D(lam)``; failed nodes carry ``value = nan`` and an ``error`` entry."""

    lam: complex
    value: complex
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self):
        return bool(np.isfinite(self.value))

    def to_dict(self):
        return {"lambda": [self.lam.real, self.lam.imag], "value": [self.value.real, self.value.imag],
                "method": self.method, "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if k != "trajectory"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class NodeData:
    """Kato data at one contour node: projectors and continued frames per side."""

    lam: complex
    t: float
    proj_plus: np.ndarray
    frame_plus: np.ndarray
    proj_minus: np.ndarray
    frame_minus: np.ndarray


def default_workers():
    try:
        return max(1, int(os.environ.get("EVANS_WORKERS", "1")))
    except ValueError:
        return 1


class EvansEvaluator:
    """Evaluate D at Kato-initialized nodes with a chosen method.

    Parameters
    ----------
    mesh : MeshSpec, optional
        Shooting mesh; the boundary-value methods use `bvp_mesh` (or a fixed
        mesh on the same truncation).  Defaults: adaptive RKF45 with
        tolerances 1e-8 on ``M = default_truncation``.
    """

    def __init__(self, system, method="exterior", mesh=None, bvp_mesh=None, order=2,
                 schedule=None, variant="drury", exclusion_radius=1e-4, workers=None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
        self.system = system
        self.method = method
        self.mesh = mesh
        self.bvp_mesh = bvp_mesh
        self.order = order
        self.schedule = schedule or HomotopySchedule()
        self.variant = variant
        self.exclusion_radius = exclusion_radius
        self.workers = workers or default_workers()

    def _mesh_for(self, lam):
        mesh = self.mesh or MeshSpec(default_truncation(self.system, lam))
        if self.method in ("polar-bvp", "conjugation"):
            return self.bvp_mesh or mesh
        return mesh

    def check_node(self, lam):
        for sp in self.system.singular_points:
            if abs(lam - sp) < self.exclusion_radius:
                raise SingularityError(
                    f"lambda = {lam:.6g} lies within {self.exclusion_radius:g} of singular point {sp}; "
                    "move the contour or lower the exclusion radius")

    # -- Kato data ------------------------------------------------------------

    def kato_nodes(self, contour):
        for lam in contour.points:
            self.check_node(complex(lam))
        paths = {side: kato_path(self.system, contour, side, self.order) for side in ("plus", "minus")}
        return [
            NodeData(complex(lam), float(t), paths["plus"].projectors[j], paths["plus"].frames[j],
                     paths["minus"].projectors[j], paths["minus"].frames[j])
            for j, (lam, t) in enumerate(zip(contour.points, contour.ts))
        ]

    def node_at(self, lam):
        """Kato data at a single point, taking the Schur frame as the base frame."""
        lam = complex(lam)
        self.check_node(lam)
        pp = side_projector(self.system, lam, "plus")
        pm = side_projector(self.system, lam, "minus")
        return NodeData(lam, 0.0, pp, pp @ schur_frame(self.system, lam, "plus"),
                        pm, pm @ schur_frame(self.system, lam, "minus"))

    def refine_node(self, left, lam, t):
        """Kato data at a new node by one second-order step from `left`."""
        self.check_node(lam)
        pp = side_projector(self.system, lam, "plus")
        pm = side_projector(self.system, lam, "minus")
        return NodeData(lam, t, pp, kato_step(left.proj_plus, pp, left.frame_plus),
                        pm, kato_step(left.proj_minus, pm, left.frame_minus))

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, node):
        lam = node.lam
        mesh = self._mesh_for(lam)
        diag = {"truncation": mesh.truncation}
        start = time.perf_counter()
        if self.method == "exterior":
            w_p, w_m = init_exterior(node.frame_plus, node.frame_minus)
            ip, im = {}, {}
            w_p = shoot_exterior(self.system, lam, "plus", w_p, mesh, info=ip)
            w_m = shoot_exterior(self.system, lam, "minus", w_m, mesh, info=im)
            value = evans_from_exterior(w_p, w_m)
            diag.update(steps=ip["steps"] + im["steps"], rejected=ip["rejected"] + im["rejected"])
        elif self.method in ("polar", "polar-bvp"):
            states, infos = [], []
            for side, frame in (("plus", node.frame_plus), ("minus", node.frame_minus)):
                omega, _ = np.linalg.qr(frame)
                init = init_polar(frame, omega)
                info = {}
                if self.method == "polar":
                    states.append(shoot_polar(self.system, lam, side, init, mesh, self.variant, info=info))
                else:
                    states.append(solve_polar_bvp(self.system, lam, side, init, mesh, self.schedule, info=info))
                infos.append(info)
            value = evans_from_polar(*states)
            diag["stiefel_max"] = max(i.get("stiefel_max", 0.0) for i in infos)
            if self.method == "polar":
                diag["steps"] = sum(i["steps"] for i in infos)
            else:
                diag["newton_iters"] = [i["newton_iters"] for i in infos]
        else:
            pp = solve_conjugator(self.system, lam, "plus", mesh, self.schedule)
            pm = solve_conjugator(self.system, lam, "minus", mesh, self.schedule)
            value = evans_from_conjugators(pp.at_origin(), pm.at_origin(), node.frame_plus, node.frame_minus)
            diag["newton_iters"] = [pp.newton_iters, pm.newton_iters]
        diag["seconds"] = time.perf_counter() - start
        if not check_splitting(self.system, lam):
            diag["essential_spectrum"] = True
        return EvansSample(lam, complex(value), self.method, diag)

    def evaluate_many(self, nodes):
        """Evaluate nodes concurrently, keeping order; failures become nan samples."""

        def safe(node):
            try:
                return self.evaluate(node)
            except EvansError as exc:
                return EvansSample(node.lam, complex(np.nan, np.nan), self.method,
                                   {"error": f"{type(exc).__name__}: {exc}"})

        if self.workers > 1 and len(nodes) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                return list(pool.map(safe, nodes))
        return [safe(node) for node in nodes]


def doubled(contour):
    """The same contour with twice as many segments."""
    ts = np.linspace(contour.ts[0], contour.ts[-1], 2 * (len(contour) - 1) + 1)
    if contour.shape is not None:
        pts = np.array([contour.shape(t) for t in ts], dtype=complex)
    else:
        pts = np.interp(ts, contour.ts, contour.points.real) + 1j * np.interp(ts, contour.ts, contour.points.imag)
    if contour.closed:
        pts[-1] = pts[0]
    return type(contour)(pts, closed=contour.closed, ts=ts, shape=contour.shape)


def sample_contour(system, contour, method="exterior", mesh=None, **kwargs):
    """D at every contour node, in contour order.

    Nodes that fail carry ``value = nan`` and ``diagnostics["error"]``.
    """
    ev = EvansEvaluator(system, method, mesh, **kwargs)
    return ev.evaluate_many(ev.kato_nodes(contour))


# ---------------------------------------------------------------------------
# winding


@dataclass
class WindingResult:
    samples: list
    winding: int
    max_rel_step: float
    history: list = field(default_factory=list)
    raw_winding: float = 0.0

    def to_dict(self):
        return {"winding": self.winding, "raw_winding": self.raw_winding, "max_rel_step": self.max_rel_step,
                "refinement_history": self.history, "samples": [s.to_dict() for s in self.samples]}


def relative_steps(values):
    v = np.asarray(values, dtype=complex)
    return np.abs(np.diff(v)) / np.abs(v[:-1])


def phase_winding(values):
    """``(1/2 pi) sum arg(D_{j+1} / D_j)`` over consecutive values."""
    v = np.asarray(values, dtype=complex)
    return float(np.sum(np.angle(v[1:] / v[:-1])) / (2 * np.pi))


def _midpoint(contour, left, right):
    t = 0.5 * (left.t + right.t)
    if contour.shape is not None:
        return complex(contour.shape(t)), t
    return 0.5 * (left.lam + right.lam), t


def _check_values(nodes, values):
    mags = np.abs(values)
    bad = [i for i, v in enumerate(values) if not np.isfinite(v)]
    if bad:
        raise EvansError(f"evaluation failed at lambda = {nodes[bad[0]].lam:.6g}")
    floor = NEAR_ZERO * mags.max()
    low = np.flatnonzero(mags <= floor)
    if low.size:
        lam = nodes[low[0]].lam
        raise NearZeroError(f"|D| = {mags[low[0]]:.3e} is numerically zero at lambda = {lam:.6g}; "
                            "an eigenvalue lies on the contour, move it", lam=lam)


def adaptive_winding(contour, initial, evaluate, refine, max_step=ROUCHE_STEP, budget=SAMPLE_BUDGET,
                     make_sample=None):
    """Winding number with Rouche step control.

    `initial` are node objects with attributes ``lam`` and ``t``;
    ``evaluate(list_of_nodes) -> values``; ``refine(left, lam, t) -> node``.
    Segments whose relative change exceeds `max_step` are bisected until all
    pass; the phase is then summed from the ratios ``D_{j+1}/D_j``.
    """
    if not contour.closed:
        raise ValueError("winding numbers need a closed contour")
    nodes = list(initial)
    values = list(evaluate(nodes))
    history = [len(nodes)]
    while True:
        _check_values(nodes, np.array(values))
        steps = relative_steps(values)
        failing = np.flatnonzero(steps > max_step)
        if failing.size == 0:
            break
        if len(nodes) + failing.size > budget:
            worst = int(np.argmax(steps))
            raise BudgetError(
                f"refinement budget of {budget} samples exhausted; worst segment "
                f"[{nodes[worst].lam:.6g}, {nodes[worst + 1].lam:.6g}] with relative change {steps[worst]:.3g}",
                worst_segment=(nodes[worst].lam, nodes[worst + 1].lam))
        new_nodes = []
        for i in failing:
            lam, t = _midpoint(contour, nodes[i], nodes[i + 1])
            new_nodes.append(refine(nodes[i], lam, t))
        new_values = list(evaluate(new_nodes))
        # splice in from the back so indices stay valid
        for i, node, val in sorted(zip(failing, new_nodes, new_values), key=lambda z: -z[0]):
            nodes.insert(i + 1, node)
            values.insert(i + 1, val)
        history.append(len(nodes))
    raw = phase_winding(values)
    steps = relative_steps(values)
    samples = [make_sample(n, v) if make_sample else v for n, v in zip(nodes, values)]
    return WindingResult(samples, int(round(raw)), float(steps.max()), history, raw)


@dataclass
class _PlainNode:
    lam: complex
    t: float


def winding_of_function(func: Callable, contour, **kwargs):
    """Winding of ``func(lam)`` around `contour` (synthetic samplers, tests)."""
    nodes = [_PlainNode(complex(l), float(t)) for l, t in zip(contour.points, contour.ts)]
    return adaptive_winding(
        contour, nodes,
        evaluate=lambda ns: [complex(func(n.lam)) for n in ns],
        refine=lambda left, lam, t: _PlainNode(lam, t),
        make_sample=lambda n, v: EvansSample(n.lam, complex(v), "function"),
        **kwargs,
    )


def winding_number(system, contour, method="exterior", mesh=None, budget=SAMPLE_BUDGET, **kwargs):
    """Winding of the Evans function of `system` around a closed `contour`."""
    ev = EvansEvaluator(system, method, mesh, **kwargs)
    samples = {}

    def evaluate(nodes):
        out = ev.evaluate_many(nodes)
        for node, s in zip(nodes, out):
            if not s.ok:
                raise EvansError(f"evaluation failed at lambda = {node.lam:.6g}: {s.diagnostics['error']}")
            samples[id(node)] = s
        return [s.value for s in out]

    return adaptive_winding(contour, ev.kato_nodes(contour), evaluate, ev.refine_node, budget=budget,
                            make_sample=lambda node, v: samples[id(node)])
