"""Exterior algebra of C^n in the lexicographic multi-index basis.

A degree-k element is stored as its coordinates on ``e_I = e_{i1} ^ ... ^ e_{ik}``
for strictly increasing ``I``, ordered lexicographically.  Indices are
0-based.  Signs live entirely in the coordinates (minors); the basis itself
never carries a sign.

Dense lifts have size C(n, k); past C(n, k) ~ 252 (n = 10) they become the
bottleneck and the polar method should be preferred.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import DimensionError, NumericalError, SplitError
from .linalg import SPLIT_TOL, as_matrix


@lru_cache(maxsize=None)
def _indices(n, k):
    return tuple(combinations(range(n), k))


@dataclass(frozen=True)
class MultiIndexBasis:
    n: int
    k: int
    indices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise DimensionError(f"degree {self.k} invalid for ambient dimension {self.n}")
        object.__setattr__(self, "indices", _indices(self.n, self.k))

    def __len__(self):
        return comb(self.n, self.k)

    def position(self, index):
        return _positions(self.n, self.k)[tuple(index)]


@lru_cache(maxsize=None)
def _positions(n, k):
    return {idx: i for i, idx in enumerate(_indices(n, k))}


@dataclass(frozen=True)
class WedgeVector:
    basis: MultiIndexBasis
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).reshape(-1)
        if c.size != len(self.basis):
            raise DimensionError(f"{c.size} coordinates for a basis of size {len(self.basis)}")
        if not np.all(np.isfinite(c)):
            raise NumericalError("wedge coordinates are not finite")
        object.__setattr__(self, "coords", c)

    @property
    def n(self):
        return self.basis.n

    @property
    def degree(self):
        return self.basis.k

    def scaled(self, factor):
        return WedgeVector(self.basis, self.coords * factor)

    def norm(self):
        return float(np.linalg.norm(self.coords))


def wedge_columns(vectors):
    """Wedge product of the columns of an ``(n, k)`` matrix.

    The coordinate on ``e_I`` is the ``k x k`` minor on rows ``I``.  ``k = 0``
    gives the scalar 1 in degree 0.
    """
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise DimensionError(f"expected an (n, k) matrix of columns, got shape {v.shape}")
    n, k = v.shape
    if k > n:
        raise DimensionError(f"cannot wedge {k} vectors in C^{n}")
    basis = MultiIndexBasis(n, k)
    if k == 0:
        return WedgeVector(basis, np.ones(1))
    rows = np.array(basis.indices)
    minors = np.linalg.det(v[rows, :])
    return WedgeVector(basis, minors)


def _permutation_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _lift_pattern(n, k):
    """Sparse recipe for the Leibniz lift: tuples (row, col, p, q, sign).

    Entry ``lift[row, col] += sign * a[p, q]``.
    """
    basis = _indices(n, k)
    pos = _positions(n, k)
    pattern = []
    for col, idx in enumerate(basis):
        for slot, q in enumerate(idx):
            others = idx[:slot] + idx[slot + 1:]
            for p in range(n):
                if p in others:
                    continue
                replaced = idx[:slot] + (p,) + idx[slot + 1:]
                pattern.append((pos[tuple(sorted(replaced))], col, p, q, _permutation_sign(replaced)))
    return tuple(np.array(c) for c in zip(*pattern)) if pattern else None


def leibniz_lift(a, k):
    """Matrix of the derivation ``v1^..^vk -> sum_i v1^..^(a vi)^..^vk`` on degree k.

    For diagonalizable `a` with eigenpairs ``(a_j, r_j)`` the lift has
    eigenvectors ``r_{i1}^..^r_{ik}`` with eigenvalues ``a_{i1}+..+a_{ik}``.
    """
    a = as_matrix(a)
    n = a.shape[0]
    size = comb(n, k) if 0 <= k <= n else -1
    if size < 0:
        raise DimensionError(f"degree {k} invalid for n={n}")
    lift = np.zeros((size, size), dtype=complex)
    pattern = _lift_pattern(n, k)
    if pattern is None:
        return lift
    rows, cols, ps, qs, signs = pattern
    np.add.at(lift, (rows, cols), signs * a[ps, qs])
    return lift


@lru_cache(maxsize=None)
def _top_pairing(n, k):
    left = _indices(n, k)
    pos_right = _positions(n, n - k)
    right_pos = np.empty(len(left), dtype=int)
    signs = np.empty(len(left))
    for i, idx in enumerate(left):
        rest = tuple(j for j in range(n) if j not in idx)
        right_pos[i] = pos_right[rest]
        # parity of the shuffle (I, I^c) -> (0, 1, ..., n-1)
        signs[i] = -1.0 if sum(j - m for m, j in enumerate(idx)) % 2 else 1.0
    return right_pos, signs


def coordinatize_top(left, right):
    """Coefficient of ``e_1 ^ ... ^ e_n`` in ``left ^ right``."""
    if left.n != right.n:
        raise DimensionError(f"ambient dimensions differ ({left.n} vs {right.n})")
    if left.degree + right.degree != left.n:
        raise DimensionError(
            f"degrees {left.degree} + {right.degree} do not sum to n = {left.n}"
        )
    right_pos, signs = _top_pairing(left.n, left.degree)
    return complex(np.sum(signs * left.coords * right.coords[right_pos]))


def centered_drift(a_limit, stable_rank, side="plus"):
    """Sum of the eigenvalues of the tracked subspace of a limiting matrix.

    ``side="plus"``: the `stable_rank` eigenvalues with smallest real part.
    ``side="minus"``: the ``n - stable_rank`` eigenvalues with largest real part.
    """
    a = as_matrix(a_limit)
    n = a.shape[0]
    k = int(stable_rank)
    if not 0 <= k <= n:
        raise DimensionError(f"stable rank {k} out of range for n={n}")
    eigs = np.linalg.eigvals(a) if n else np.zeros(0, complex)
    eigs = eigs[np.argsort(eigs.real, kind="stable")]
    if 0 < k < n and eigs[k].real - eigs[k - 1].real <= SPLIT_TOL:
        raise SplitError(f"eigenvalue real parts tie at the split ({eigs[k - 1]}, {eigs[k]})")
    if side == "plus":
        return complex(np.sum(eigs[:k]))
    if side == "minus":
        return complex(np.sum(eigs[k:]))
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
