from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shearlab3d.geometry import (LatticeConstants, PyramidId, as_alpha, classify_frequency, classify_grid,
                                 count_shear_cells, enumerate_indices, scaling_matrix, shear_matrix,
                                 shear_range, shears)


def test_scaling_identity_at_scale_zero():
    for a in (2, Fraction(3, 2), 1.2):
        for pair in (0, 1, 2):
            assert np.array_equal(scaling_matrix(0, a, pair), np.eye(3))


def test_scaling_parabolic():
    assert np.allclose(scaling_matrix(2, 2, 0), np.diag([4.0, 2.0, 2.0]), rtol=0, atol=0)


def test_scaling_third_pair_against_mpmath():
    mpmath.mp.dps = 40
    want = [mpmath.mpf(2) ** mpmath.mpf("1.5"), mpmath.mpf(2) ** mpmath.mpf("1.5"),
            mpmath.mpf(2) ** mpmath.mpf("2.25")]
    got = np.diag(scaling_matrix(3, Fraction(3, 2), 2))
    for g, w in zip(got, want):
        assert abs(g - float(w)) < 1e-14 * float(w)


def test_shear_examples():
    assert np.array_equal(shear_matrix((0, 0)), np.eye(3))
    assert np.array_equal(shear_matrix((1, 2), 0), np.array([[1, 1, 2], [0, 1, 0], [0, 0, 1]]))
    assert np.array_equal(shear_matrix((-3, 5)) @ shear_matrix((3, -5)), np.eye(3))


@given(st.integers(-20, 20), st.integers(-20, 20), st.sampled_from([0, 1, 2]))
def test_shear_group_inverse_and_unimodular(k1, k2, pair):
    S = shear_matrix((k1, k2), pair)
    assert np.array_equal(S @ shear_matrix((-k1, -k2), pair), np.eye(3))
    assert round(np.linalg.det(S)) == 1


def test_classify_examples():
    assert classify_frequency((2, 1, 0)) is PyramidId.P1
    assert classify_frequency((0.5, 0.5, 0.5)) is PyramidId.CenterCube
    # (-1,-1,-1) lies in P4, P5 and P6
    assert classify_frequency((-1, -1, -1)) is PyramidId.P4


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_classify_grid_matches_scalar(xi):
    assert int(classify_grid(np.array(xi))) == int(classify_frequency(xi))


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_classified_point_lies_in_its_pyramid(xi):
    p = classify_frequency(xi)
    if p is PyramidId.CenterCube:
        assert max(abs(v) for v in xi) < 1
    else:
        ax = (int(p) - 1) % 3
        lead = xi[ax] if int(p) <= 3 else -xi[ax]
        assert lead >= 1 and all(abs(xi[b]) <= lead for b in range(3) if b != ax)


def test_shear_range_examples():
    assert shear_range(0, 2) == 1
    assert shear_range(4, 2) == 4
    mpmath.mp.dps = 40
    assert shear_range(5, Fraction(3, 2)) == int(mpmath.ceil(mpmath.mpf(2) ** mpmath.mpf("1.25"))) == 3


def test_index_counts():
    idx = enumerate_indices(0, 0, 2)
    assert sum(1 for i in idx if i.pair == 0) == 9
    assert len(shears(4, 2)) == 81
    counts = [count_shear_cells(0, J, 2) for J in range(6)]
    assert counts == sorted(counts)


def test_enumeration_order_is_lexicographic():
    idx = enumerate_indices(0, 2, Fraction(3, 2))
    keys = [(i.pair, i.j, i.k) for i in idx]
    assert keys == sorted(keys)


def test_lattice_constants():
    c = LatticeConstants(0.25, 0.125)
    assert c.det == 0.25 * 0.125 ** 2
    with pytest.raises(ValueError):
        LatticeConstants(0.1, 0.2)
    with pytest.raises(ValueError):
        LatticeConstants(0.0, 0.0)


def test_alpha_validation():
    assert as_alpha("3/2") == Fraction(3, 2)
    assert as_alpha(1.5) == Fraction(3, 2)
    for bad in (1, 2.5, "1"):
        with pytest.raises(ValueError):
            as_alpha(bad)


@settings(max_examples=30)
@given(st.integers(0, 12), st.sampled_from([Fraction(3, 2), Fraction(5, 4), 2, Fraction(7, 4)]))
def test_shear_range_is_ceiling(j, a):
    K = shear_range(j, a)
    x = 2.0 ** (j * float(a - 1) / 2)
    assert K - 1 < x <= K + 1e-12
