import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shearlab3d.errors import PreconditionError
from shearlab3d.generators import (FeasibilityProfile, FilterDesign, FrequencyGrid, LowpassFilter,
                                   binomial_weights, design_filter, scaling_function_hat,
                                   separable_generator, shearlet_hat, vanishing_moment_order,
                                   verify_feasibility, zero_generator)

mpmath.mp.dps = 50


def mp_m0_sq(x, K=15, L=10):
    x = mpmath.mpf(x)
    c, s = mpmath.cos(mpmath.pi * x) ** 2, mpmath.sin(mpmath.pi * x) ** 2
    return c ** K * mpmath.fsum(mpmath.binomial(K - 1 + n, n) * s ** n for n in range(L))


@pytest.fixture(scope="module")
def filt():
    return design_filter(FilterDesign(15, 10))


def test_endpoint_values_exact(filt):
    assert filt.m0_sq(0.0) == 1.0
    assert filt.m1_sq(0.0) == 0.0


def test_m0_against_extended_precision(filt):
    want = mp_m0_sq("0.1")
    assert abs(filt.m0_sq(0.1) - float(want)) < 1e-14


@given(st.floats(-1, 1))
def test_power_complementary_with_normalised_pair(x):
    # the maximally flat family satisfies |m0|^2 + |m1|^2 <= 1 once normalised
    f = LowpassFilter(15, 10)
    assert f.m0_sq(x) + f.m1_sq(x) <= 1.0 + 1e-12


def test_binomial_weights_exact():
    assert binomial_weights(15, 3) == [1, 15, 120]


def test_design_window():
    for K, L in ((15, 10), (28, 10), (18, 12)):
        FilterDesign(K, L)
    for K, L in ((14, 10), (29, 10), (5, 3)):
        with pytest.raises(PreconditionError):
            FilterDesign(K, L)


def test_scaling_function(filt, rng):
    assert scaling_function_hat(0.0, filt) == 1.0
    x = rng.uniform(-8, 8, 1000)
    assert np.all(np.abs(scaling_function_hat(x, filt)) <= 1 + 1e-12)
    # refinement: phi(2x) = m0(2x) phi(x) up to one extra factor at the truncation end
    x0 = 0.3
    lhs = scaling_function_hat(2 * x0, filt, 24)
    rhs = filt.m0(2 * x0) * scaling_function_hat(x0, filt, 23)
    assert abs(lhs - rhs) < 1e-15


def test_shearlet_hat_against_extended_precision(filt):
    # m1(4 * 0.125) = 1, so the value reduces to the product for phi_hat(0.125)
    want = mpmath.fprod(mpmath.sqrt(mp_m0_sq(mpmath.mpf("0.125") / 2 ** j)) for j in range(24))
    got = abs(shearlet_hat(np.array([0.125, 0.0, 0.0]), filt, 24))
    assert abs(got - float(want)) < 1e-13


def test_shearlet_hat_properties(gen, filt):
    assert shearlet_hat(np.array([0.0, 0.3, -0.7]), filt) == 0.0
    xi = np.array([0.2, 0.1, 0.4])
    lhs = shearlet_hat(xi, filt)
    rhs = (shearlet_hat(np.array([0.2, 0, 0]), filt) * scaling_function_hat(0.2, filt)
           * scaling_function_hat(0.8, filt) / scaling_function_hat(0.0, filt) ** 2)
    assert abs(lhs - rhs) < 1e-15
    a = np.array([0.1, 0.2, 0.3])
    assert gen.psi_hat(a, pair=1) == gen.psi_hat(np.array([0.2, 0.1, 0.3]), pair=0)
    assert gen.psi_hat(np.array([0.1, 0.2, 0.0]), pair=2) == 0.0
    assert gen.psi_hat(xi) == pytest.approx(lhs, abs=1e-15)


def test_separable_matches_filter_based(gen, filt):
    phi = lambda x: scaling_function_hat(x, filt)  # noqa: E731
    sep = separable_generator(lambda w: filt.m1(4 * np.asarray(w)) * phi(w), lambda t: phi(2 * np.asarray(t)))
    xi = np.array([0.2, 0.1, -0.3])
    assert sep.psi_hat(xi) == pytest.approx(gen.psi_hat(xi), abs=1e-15)


def test_feasibility(gen):
    z = verify_feasibility(zero_generator(), FeasibilityProfile(), calibrate=False)
    assert z.passes and z.worst_ratio == 0.0
    rep = verify_feasibility(gen, FeasibilityProfile(delta=8.5, gamma=4.0), FrequencyGrid.log_cube(64, 2.0 ** -10, 32))
    assert rep.passes
    bad = verify_feasibility(gen, FeasibilityProfile(delta=8.5, gamma=50.0))
    assert not bad.passes
    # the profile cannot follow the slow cross-axis tail
    assert abs(bad.worst_point[1]) > 16


def test_profile_validation():
    with pytest.raises(PreconditionError):
        FeasibilityProfile(q=1.0, q_prime=2.0)
    with pytest.raises(PreconditionError):
        FeasibilityProfile(delta=0.0)


def test_vanishing_moment_order(gen):
    mono = separable_generator(lambda w: np.asarray(w, dtype=float), lambda t: np.ones_like(np.asarray(t, dtype=float)))
    assert vanishing_moment_order(mono) == pytest.approx(1.0, abs=0.01)
    assert vanishing_moment_order(gen) >= 8


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_vanishing_order_scale_invariant(s):
    f = LowpassFilter(15, 10)
    g = separable_generator(lambda w: s * f.m1(4 * np.asarray(w)), lambda t: np.ones_like(np.asarray(t, dtype=float)))
    g0 = separable_generator(lambda w: f.m1(4 * np.asarray(w)), lambda t: np.ones_like(np.asarray(t, dtype=float)))
    assert math.isclose(vanishing_moment_order(g), vanishing_moment_order(g0), abs_tol=1e-9)
