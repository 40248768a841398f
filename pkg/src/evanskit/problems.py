"""Eigenvalue systems ``W' = A(x, lam) W`` and the built-in problem catalog."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import as_matrix


@dataclass(frozen=True)
class EvansSystem:
    """A first-order eigenvalue problem with exponentially converging coefficients.

    Attributes
    ----------
    n, k : int
        Phase-space dimension and dimension of the stable subspace of ``A_+``.
    coefficient : callable
        ``(x, lam) -> (n, n)`` complex array.
    limit_plus, limit_minus : callable
        ``lam -> A_+(lam)``, ``lam -> A_-(lam)``.
    decay_rate : float
        Rate ``theta`` with ``|A - A_pm| <= C exp(-theta |x|)``.
    singular_points : tuple of complex
        Points where the splitting degenerates; contour nodes are kept away
        from them.
    real_coefficients : bool
        True when ``A(x, lam)`` is real for real ``lam``.
    """

    name: str
    n: int
    k: int
    coefficient: Callable
    limit_plus: Callable
    limit_minus: Callable
    decay_rate: float
    description: str = ""
    singular_points: tuple = ()
    real_coefficients: bool = True
    params: dict = field(default_factory=dict)

    def limit(self, side, lam):
        if side == "plus":
            return np.asarray(self.limit_plus(lam), dtype=complex)
        if side == "minus":
            return np.asarray(self.limit_minus(lam), dtype=complex)
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")

    def tracked_dim(self, side):
        """Dimension of the decaying-solution manifold on the given side."""
        return self.k if side == "plus" else self.n - self.k


def decay_constants(system, lam, points=(2.0, 5.0, 10.0)):
    """Estimated ``C`` in ``|A(x) - A_pm| <= C exp(-theta |x|)`` at sample points.

    Returns ``(c0, plus, minus)`` where ``c0`` is the worst estimate at
    ``x = 0`` and ``plus``/``minus`` hold the estimates at ``+-points``.
    """
    theta = system.decay_rate
    a_plus = system.limit("plus", lam)
    a_minus = system.limit("minus", lam)
    a0 = np.asarray(system.coefficient(0.0, lam), dtype=complex)
    c0 = max(np.linalg.norm(a0 - a_plus, 2), np.linalg.norm(a0 - a_minus, 2))
    plus = [np.linalg.norm(system.coefficient(x, lam) - a_plus, 2) * np.exp(theta * x) for x in points]
    minus = [np.linalg.norm(system.coefficient(-x, lam) - a_minus, 2) * np.exp(theta * x) for x in points]
    return c0, np.array(plus), np.array(minus)


def check_decay(system, lam, slack=5.0):
    """Spot-check the declared decay rate: estimates at x=2,5,10 stay within slack*C(0)."""
    c0, plus, minus = decay_constants(system, lam)
    bound = slack * max(c0, 1e-300)
    return bool(np.all(plus <= bound) and np.all(minus <= bound))


def check_splitting(system, lam):
    """True when A_+ has k stable and A_- has n-k unstable eigenvalues (by sign)."""
    ep = np.linalg.eigvals(system.limit("plus", lam)) if system.n else np.zeros(0)
    em = np.linalg.eigvals(system.limit("minus", lam)) if system.n else np.zeros(0)
    return bool(np.sum(ep.real < 0) == system.k and np.sum(em.real > 0) == system.n - system.k)


# ---------------------------------------------------------------------------
# catalog


def _const(a):
    return lambda lam: a


def constant_coefficient(a, k, name="constant"):
    a = as_matrix(a)
    n = a.shape[0]
    if not 0 <= k <= n:
        raise DimensionError(f"k={k} out of range for n={n}")
    return EvansSystem(
        name=name,
        n=n,
        k=int(k),
        coefficient=lambda x, lam: a,
        limit_plus=_const(a),
        limit_minus=_const(a),
        decay_rate=1.0,
        description="constant coefficient system",
        real_coefficients=bool(np.all(a.imag == 0)),
        params={"matrix": a.tolist(), "k": int(k)},
    )


def convected_heat(eta):
    """Eigenvalue problem ``lam u + eta u' = u''``; branch point at ``lam = -eta^2/4``."""
    eta = float(eta)

    def a_of(lam):
        return np.array([[0.0, 1.0], [lam, eta]], dtype=complex)

    return EvansSystem(
        name="convected-heat",
        n=2,
        k=1,
        coefficient=lambda x, lam: a_of(lam),
        limit_plus=a_of,
        limit_minus=a_of,
        decay_rate=1.0,
        description=f"convected heat equation, eta={eta}",
        singular_points=(-eta * eta / 4.0,),
        params={"eta": eta},
    )


def convected_heat_kato_vector(eta, lam, base=1.0):
    """Closed-form Kato-continued stable eigenvector of the convected heat matrix.

    Eigenvalues of ``[[0, 1], [lam, eta]]`` are ``eta/2 -+ s`` with
    ``s = sqrt(eta^2/4 + lam)``; the stable one is ``eta/2 - s`` with
    eigenvector ``(1, eta/2 - s)``.  The Kato normalization is
    ``c(lam) = (s^2)^(-1/4)`` up to a constant, fixed here by ``c(base) = 1``.
    Principal branches; valid on simply connected regions avoiding the cut
    of ``s`` through the branch point.
    """
    lam = complex(lam)
    s2 = eta * eta / 4.0 + lam
    s = np.sqrt(s2)
    scale = (eta * eta / 4.0 + base) ** 0.25 / s2 ** 0.25
    return scale * np.array([1.0, eta / 2.0 - s], dtype=complex)


def exp_perturbed(a_limit, b, theta, k=None, name="exp-perturbed"):
    """``A(x) = a_limit + exp(-theta |x|) b`` on both half-lines (lam-independent)."""
    a_limit = as_matrix(a_limit, name="a_limit")
    b = as_matrix(b, name="b")
    if a_limit.shape != b.shape:
        raise DimensionError("a_limit and b must have the same shape")
    if theta <= 0:
        raise ValueError("theta must be positive")
    n = a_limit.shape[0]
    if k is None:
        k = int(np.sum(np.linalg.eigvals(a_limit).real < 0))
    theta = float(theta)
    return EvansSystem(
        name=name,
        n=n,
        k=int(k),
        coefficient=lambda x, lam: a_limit + np.exp(-theta * abs(x)) * b,
        limit_plus=_const(a_limit),
        limit_minus=_const(a_limit),
        decay_rate=theta,
        description="exponentially perturbed constant system",
        real_coefficients=bool(np.all(a_limit.imag == 0) and np.all(b.imag == 0)),
        params={"a_limit": a_limit.tolist(), "b": b.tolist(), "theta": theta, "k": int(k)},
    )


def burgers_shock():
    """Standing viscous Burgers shock ``u = -tanh(x/2)`` in flux variables ``(u, u' - u_hat u)``."""

    def coefficient(x, lam):
        return np.array([[-np.tanh(x / 2.0), 1.0], [lam, 0.0]], dtype=complex)

    return EvansSystem(
        name="burgers",
        n=2,
        k=1,
        coefficient=coefficient,
        limit_plus=lambda lam: np.array([[-1.0, 1.0], [lam, 0.0]], dtype=complex),
        limit_minus=lambda lam: np.array([[1.0, 1.0], [lam, 0.0]], dtype=complex),
        decay_rate=1.0,
        description="viscous Burgers standing shock",
        singular_points=(0.0, -0.25),
    )


def sech_potential(depth=2.0):
    """Scalar operator ``L u = u'' + depth sech(x)^2 u`` as a first-order system.

    Eigenvalues of L above the essential spectrum ``(-inf, 0]`` are zeros of
    the Evans function.
    """
    depth = float(depth)

    def coefficient(x, lam):
        return np.array([[0.0, 1.0], [lam - depth / np.cosh(x) ** 2, 0.0]], dtype=complex)

    limit = lambda lam: np.array([[0.0, 1.0], [lam, 0.0]], dtype=complex)
    return EvansSystem(
        name="sech-potential",
        n=2,
        k=1,
        coefficient=coefficient,
        limit_plus=limit,
        limit_minus=limit,
        decay_rate=2.0,
        description=f"Schrodinger operator with potential {depth} sech^2",
        singular_points=(0.0,),
        params={"depth": depth},
    )


@dataclass(frozen=True)
class ScalarTestbed:
    """``w' = (-a_inf + b exp(-theta x)) w``: a scalar gap-lemma testbed with closed forms."""

    a_inf: float
    b: float
    theta: float

    def __post_init__(self):
        if self.a_inf <= 0 or self.theta <= 0:
            raise ValueError("a_inf and theta must be positive")

    def system(self):
        sys = exp_perturbed([[-self.a_inf]], [[self.b]], self.theta, k=1, name="scalar-testbed")
        return replace(sys, params={"a": self.a_inf, "b": self.b, "theta": self.theta})

    def centered_value(self, truncation):
        """Exact ``z(0)`` for ``z' = b exp(-theta x) z`` with ``z(M) = 1``."""
        return np.exp((self.b / self.theta) * (np.exp(-self.theta * truncation) - 1.0))

    def limit_value(self):
        """``z(0)`` of the untruncated problem (``M -> infinity``)."""
        return np.exp(-self.b / self.theta)


def exact_truncation_error(tb, truncation):
    """Relative error of the truncated centered value against the ``M = inf`` value.

    Equals ``exp((b/theta) exp(-theta M)) - 1``.
    """
    if truncation < 0:
        raise ValueError("truncation length must be nonnegative")
    return complex(np.expm1((tb.b / tb.theta) * np.exp(-tb.theta * truncation)))


def _matrix_param(value, name):
    if value is None:
        raise ConfigError(f"problem parameter {name!r} is required")
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = np.diag(arr)
    return arr


def build_problem(name, **params):
    """Look up a catalog problem by name (as used by the CLI)."""
    key = name.lower().replace("_", "-")
    try:
        if key == "burgers":
            return burgers_shock()
        if key == "convected-heat":
            return convected_heat(float(params.get("eta", 0.0)))
        if key == "sech-potential":
            return sech_potential(float(params.get("depth", 2.0)))
        if key == "scalar-testbed":
            return ScalarTestbed(
                float(params.get("a", 1.0)), float(params.get("b", 1.0)), float(params.get("theta", 1.0))
            ).system()
        if key == "constant":
            a = _matrix_param(params.get("matrix"), "matrix")
            k = params.get("k")
            if k is None:
                k = int(np.sum(np.linalg.eigvals(a).real < 0))
            return constant_coefficient(a, int(k))
        if key == "exp-perturbed":
            a = _matrix_param(params.get("a_limit"), "a_limit")
            b = _matrix_param(params.get("b"), "b")
            k = params.get("k")
            return exp_perturbed(a, b, float(params.get("theta", 1.0)), None if k is None else int(k))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for problem {name!r}: {exc}") from exc
    raise ConfigError(
        f"unknown problem {name!r}; choose from "
        "burgers, convected-heat, sech-potential, scalar-testbed, constant, exp-perturbed"
    )


PROBLEM_NAMES = ("burgers", "convected-heat", "sech-potential", "scalar-testbed", "constant", "exp-perturbed")
