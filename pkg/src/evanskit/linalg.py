"""Dense complex linear algebra: ordered Schur forms and spectral projectors.

Projectors are always formed from orthonormal Schur bases of the right and
left invariant subspaces,

    Pi_s = R_s (L_s^* R_s)^{-1} L_s^*,

never from sums of eigenvector outer products, which degrade badly where
eigenvalues in the same group collide.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DimensionError, NumericalError, SplitError

#: Relative singular-value threshold used for every rank decision.
RANK_TOL = 1e-8
#: Minimum real-part separation between the two sides of a split.
SPLIT_TOL = 1e-10
#: Largest acceptable condition number of L^* R in the projector formula.
MAX_SPLIT_COND = 1e12


def as_matrix(a, square=True, name="matrix"):
    """Return `a` as a finite complex 2-D array, validating its shape."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} has non-finite entries")
    return arr


def numerical_rank(a, tol=RANK_TOL):
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


@dataclass(frozen=True)
class OrderedSchur:
    """Schur form ``a = q @ u @ q^*`` with the diagonal of `u` sorted by real part."""

    q: np.ndarray
    u: np.ndarray
    ascending: bool = True

    @property
    def eigenvalues(self):
        return np.diag(self.u).copy()

    def leading_basis(self, m):
        """Orthonormal basis of the invariant subspace of the first `m` eigenvalues."""
        return self.q[:, :m].copy()


def ordered_schur(a, ascending=True):
    """Complex Schur decomposition with eigenvalues ordered by real part.

    Parameters
    ----------
    a : (n, n) array_like
        Matrix to decompose.
    ascending : bool
        Sort the diagonal of ``u`` by nondecreasing real part (the default),
        otherwise by nonincreasing real part.

    Returns
    -------
    OrderedSchur
        Unitary ``q`` and upper-triangular ``u`` with ``a = q u q^*``.
        Leading columns of ``q`` span the invariant subspace belonging to the
        leading diagonal entries.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if n == 0:
        return OrderedSchur(np.zeros((0, 0), complex), np.zeros((0, 0), complex), ascending)
    try:
        u, q = scipy.linalg.schur(a, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        norm = np.linalg.norm(a)
        raise NumericalError(f"Schur iteration failed (||A||_F = {norm:.3e}): {exc}") from exc

    sign = 1.0 if ascending else -1.0
    u = np.asfortranarray(u)
    q = np.asfortranarray(q)
    # selection sort by swaps; stable for ties
    for i in range(n - 1):
        keys = sign * np.diag(u).real[i:]
        j = i + int(np.argmin(keys))
        if j != i and keys[j - i] < keys[0]:
            u, q, info = lapack.ztrexc(u, q, j + 1, i + 1)
            if info != 0:
                raise NumericalError(f"ztrexc failed to reorder Schur form (info={info})")
    u = np.triu(np.asarray(u))
    return OrderedSchur(np.asarray(q), u, ascending)


@dataclass(frozen=True)
class ProjectorPair:
    """Complementary spectral projectors of a matrix split by real part."""

    stable: np.ndarray
    unstable: np.ndarray
    stable_rank: int

    def side(self, which):
        """Projector for the ``"plus"`` (stable) or ``"minus"`` (unstable) side."""
        if which == "plus":
            return self.stable
        if which == "minus":
            return self.unstable
        raise ValueError(f"side must be 'plus' or 'minus', got {which!r}")


def _check_split(eigs, k):
    n = len(eigs)
    if not 0 <= k <= n:
        raise DimensionError(f"stable rank {k} out of range for n={n}")
    if 0 < k < n:
        re = np.sort(eigs.real)
        gap = re[k] - re[k - 1]
        if gap <= SPLIT_TOL:
            raise SplitError(
                f"no real-part gap between eigenvalue {k} and {k + 1} "
                f"(Re = {re[k - 1]:.6g}, {re[k]:.6g})",
                condition=np.inf,
            )


def _oblique_projector(right, left):
    if right.shape[1] == 0:
        n = right.shape[0]
        return np.zeros((n, n), complex)
    gram = left.conj().T @ right
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_SPLIT_COND:
        raise SplitError(
            f"left/right invariant bases nearly orthogonal (cond(L*R) = {cond:.3e})",
            condition=cond,
        )
    return right @ np.linalg.solve(gram, left.conj().T)


def spectral_bases(a, stable_rank):
    """Orthonormal right bases ``(R_s, R_u)`` of the stable and unstable subspaces."""
    a = as_matrix(a)
    n = a.shape[0]
    k = int(stable_rank)
    right_s = ordered_schur(a).leading_basis(k)
    right_u = ordered_schur(-a).leading_basis(n - k)
    return right_s, right_u


def eigenprojections(a, stable_rank):
    """Spectral projectors onto the `stable_rank` leftmost eigenvalues and the rest.

    The "stable" group is the `stable_rank` eigenvalues with smallest real
    parts, regardless of sign; callers tracking a fixed-dimension subspace
    across the imaginary axis rely on this.

    Raises
    ------
    SplitError
        The two groups have no real-part gap, or ``L^* R`` is singular.
    """
    a = as_matrix(a)
    n = a.shape[0]
    k = int(stable_rank)
    _check_split(np.linalg.eigvals(a) if n else np.zeros(0), k)
    ah = a.conj().T
    right_s = ordered_schur(a).leading_basis(k)
    right_u = ordered_schur(-a).leading_basis(n - k)
    left_s = ordered_schur(ah).leading_basis(k)
    left_u = ordered_schur(-ah).leading_basis(n - k)
    stable = _oblique_projector(right_s, left_s)
    unstable = _oblique_projector(right_u, left_u)
    return ProjectorPair(stable, unstable, k)


def sylvester_spectrum(alpha):
    """Eigenvalues ``-(conj(a_j) + a_k)`` of ``E -> -E alpha - alpha^* E``.

    These govern the decay of the Stiefel error ``Omega^* Omega - I`` in
    continuous orthogonalization when `alpha` is the restriction of the
    limiting coefficient to the tracked subspace.
    """
    alpha = as_matrix(alpha, name="alpha")
    vals, vecs = np.linalg.eig(alpha)
    if alpha.shape[0] and np.linalg.cond(vecs) > 1e8:
        warnings.warn("alpha is not diagonalizable to working precision", RuntimeWarning, stacklevel=2)
    return np.array([-(np.conj(aj) + ak) for aj in vals for ak in vals])


def realify_basis(basis):
    """Real orthonormal basis of a conjugation-invariant column space.

    Returns None if the span of `basis` is not closed under conjugation.
    """
    basis = np.asarray(basis, dtype=complex)
    m = basis.shape[1]
    if m == 0:
        return basis.real.astype(complex)
    stacked = np.hstack([basis.real, basis.imag])
    uu, s, _ = np.linalg.svd(stacked, full_matrices=False)
    if numerical_rank(stacked) != m:
        return None
    return uu[:, :m].astype(complex)
