"""Exterior algebra: wedges, Leibniz lifts, top-degree pairing."""

from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evanskit.errors import DimensionError, SplitError
from evanskit.exterior import (MultiIndexBasis, WedgeVector, centered_drift, coordinatize_top, leibniz_lift,
                               wedge_columns)


def _cols(seed, n, k):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))


dims = st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n)))


class TestBasis:
    def test_lexicographic(self):
        b = MultiIndexBasis(4, 2)
        assert b.indices == tuple(combinations(range(4), 2))
        assert len(b) == 6
        assert b.position((1, 3)) == 4

    def test_invalid_degree(self):
        with pytest.raises(DimensionError):
            MultiIndexBasis(3, 4)

    def test_coordinate_count_checked(self):
        with pytest.raises(DimensionError):
            WedgeVector(MultiIndexBasis(3, 2), np.ones(2))


class TestWedge:
    def test_minors_known_values(self):
        v = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]])
        w = wedge_columns(v)
        # rows (0,1), (0,2), (1,2)
        np.testing.assert_allclose(w.coords, [1.0, 3.0, -2.0])

    def test_top_degree_is_determinant(self):
        v = _cols(0, 5, 5)
        w = wedge_columns(v)
        np.testing.assert_allclose(w.coords, [np.linalg.det(v)], rtol=1e-12)

    def test_degree_zero(self):
        w = wedge_columns(np.zeros((3, 0)))
        assert w.degree == 0
        np.testing.assert_array_equal(w.coords, [1.0])

    @given(dims, st.integers(0, 10_000))
    def test_antisymmetry(self, nk, seed):
        n, k = nk
        if k < 2:
            return
        v = _cols(seed, n, k)
        swapped = v[:, [1, 0] + list(range(2, k))]
        np.testing.assert_allclose(wedge_columns(swapped).coords, -wedge_columns(v).coords, atol=1e-10)
        repeated = v.copy()
        repeated[:, 1] = repeated[:, 0]
        np.testing.assert_allclose(wedge_columns(repeated).coords, 0.0, atol=1e-10)

    @given(dims, st.integers(0, 10_000))
    def test_multilinear_under_change_of_basis(self, nk, seed):
        n, k = nk
        v = _cols(seed, n, k)
        g = _cols(seed + 1, k, k)
        np.testing.assert_allclose(wedge_columns(v @ g).coords, np.linalg.det(g) * wedge_columns(v).coords,
                                   rtol=1e-8, atol=1e-8)


class TestLeibnizLift:
    def test_degree_one_is_identity_map(self):
        a = _cols(1, 4, 4)
        np.testing.assert_allclose(leibniz_lift(a, 1), a)

    def test_top_degree_is_trace(self):
        a = _cols(2, 4, 4)
        np.testing.assert_allclose(leibniz_lift(a, 4), [[np.trace(a)]])

    def test_size(self):
        assert leibniz_lift(np.eye(6), 3).shape == (comb(6, 3), comb(6, 3))

    @given(dims, st.integers(0, 10_000))
    def test_derivation_rule(self, nk, seed):
        n, k = nk
        a = _cols(seed, n, n)
        v = _cols(seed + 7, n, k)
        expected = sum(
            wedge_columns(np.column_stack([a @ v[:, i] if i == j else v[:, i] for i in range(k)])).coords
            for j in range(k))
        np.testing.assert_allclose(leibniz_lift(a, k) @ wedge_columns(v).coords, expected, atol=1e-8)

    @given(dims, st.integers(0, 10_000))
    def test_spectrum_is_k_sums(self, nk, seed):
        n, k = nk
        a = _cols(seed, n, n)
        eigs = np.linalg.eigvals(a)
        sums = np.array([eigs[list(idx)].sum() for idx in combinations(range(n), k)])
        lifted = np.linalg.eigvals(leibniz_lift(a, k))
        # match each k-sum to a distinct lifted eigenvalue
        remaining = list(lifted)
        for s in sums:
            j = int(np.argmin(np.abs(np.array(remaining) - s)))
            assert abs(remaining.pop(j) - s) < 1e-7 * max(1.0, abs(s))

    def test_exponential_is_compound(self):
        from scipy.linalg import expm
        a = 0.3 * _cols(4, 4, 4)
        v = _cols(5, 4, 2)
        np.testing.assert_allclose(expm(leibniz_lift(a, 2)) @ wedge_columns(v).coords,
                                   wedge_columns(expm(a) @ v).coords, atol=1e-10)


class TestTopPairing:
    @given(dims, st.integers(0, 10_000))
    def test_pairing_is_determinant(self, nk, seed):
        n, k = nk
        v = _cols(seed, n, n)
        left, right = wedge_columns(v[:, :k]), wedge_columns(v[:, k:])
        np.testing.assert_allclose(coordinatize_top(left, right), np.linalg.det(v), rtol=1e-8, atol=1e-10)

    def test_degree_mismatch(self):
        with pytest.raises(DimensionError):
            coordinatize_top(wedge_columns(np.eye(3)[:, :1]), wedge_columns(np.eye(3)[:, :1]))


class TestCenteredDrift:
    def test_sides(self):
        a = np.diag([-1.0, -2.0, 3.0])
        assert centered_drift(a, 2, "plus") == -3.0
        assert centered_drift(a, 2, "minus") == 3.0

    def test_tie_raises(self):
        with pytest.raises(SplitError):
            centered_drift(np.diag([-1.0, -1.0]), 1)
