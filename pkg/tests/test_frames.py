import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shearlab3d.errors import PreconditionError
from shearlab3d.frames import (C_gamma, OverlapTables, TruncationPolicy, analytic_lsup_bound,
                               analytic_rc_bound, covering_check, dyadic_sum_exact, dyadic_sum_large,
                               dyadic_sum_small, frame_bound_interval, gamma_sup, l_bounds, phi_overlap,
                               r_of_c, zeta)
from shearlab3d.generators import FeasibilityProfile, verify_feasibility, zero_generator
from shearlab3d.geometry import LatticeConstants, scaling_matrix, shear_matrix, shear_range

SMALL = TruncationPolicy(n_xi1=16, n_cross=16)


@pytest.fixture(scope="module")
def tables(gen, profile):
    return OverlapTables(gen, 2.0, SMALL, profile)


# ---------------------------------------------------------------------------
# special functions


def test_zeta_four():
    assert abs(zeta(4.0) - math.pi ** 4 / 90) < 1e-12


@given(st.floats(1.05, 30))
def test_zeta_against_mpmath(s):
    assert zeta(s) == pytest.approx(float(mpmath.zeta(s)), rel=1e-12, abs=1e-12)


def test_zeta_domain():
    with pytest.raises(PreconditionError):
        zeta(1.0)


def test_c_gamma():
    assert C_gamma(4) == pytest.approx(11 / 3, abs=1e-15)
    assert C_gamma(2) == 5.0
    assert abs(C_gamma(1e6) - 3) < 1e-5
    with pytest.raises(PreconditionError):
        C_gamma(1.0)


@pytest.mark.parametrize("iota", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("t", [1 / 8, 1 / 2, 1.0])
def test_dyadic_estimates(iota, t):
    assert dyadic_sum_exact(t, iota, small=False) <= dyadic_sum_large(t, iota) * (1 + 1e-12) + 1e-12
    assert dyadic_sum_exact(t, iota, small=True) <= dyadic_sum_small(t, iota) * (1 + 1e-12)


@given(st.floats(1e-4, 1.0), st.floats(0.1, 5.0))
def test_dyadic_estimates_property(t, iota):
    assert dyadic_sum_exact(t, iota, small=False) <= dyadic_sum_large(t, iota) * (1 + 1e-9) + 1e-12
    assert dyadic_sum_exact(t, iota, small=True) <= dyadic_sum_small(t, iota) * (1 + 1e-9)


# ---------------------------------------------------------------------------
# analytic bounds


def test_lsup_bound_limit():
    p = FeasibilityProfile(delta=50, gamma=4, q=1, q_prime=1, r=1, s=1)
    mpmath.mp.dps = 40
    c8 = 3 + mpmath.mpf(2) / 7
    want = c8 ** 2 * (1 / (1 - mpmath.mpf(2) ** -98) + 0 + 1)
    assert analytic_lsup_bound(p, 2) == pytest.approx(float(want), rel=1e-14)


def test_lsup_bound_monotone_and_finite():
    a = analytic_lsup_bound(FeasibilityProfile(q=2, q_prime=2), 2)
    b = analytic_lsup_bound(FeasibilityProfile(q=8, q_prime=2), 2)
    assert b > a
    assert math.isfinite(analytic_lsup_bound(FeasibilityProfile(delta=8.5, gamma=4), 1.01))


def _rc_oracle(c1, c2, q, qp, r, s, delta, g, gp):
    """Term-by-term evaluation of the printed R(c) estimate in extended precision."""
    mpmath.mp.dps = 40
    q, qp, r, s, delta, g, gp = (mpmath.mpf(v) for v in (q, qp, r, s, delta, g, gp))
    C = lambda x: 3 + 2 / (x - 1)  # noqa: E731
    cl = mpmath.ceil(mpmath.log(q / qp, 2))
    lead = q ** 2 / (r * s)
    T1 = lead * C(g) ** 2 * (2 * c1 / qp) ** g * (cl + 1 / (1 - 2 ** (-delta + 2 * g)) + 1 / (1 - 2 ** -g))
    T2 = lead * C(g) * C(gp) * (2 * q * c2 / (qp * min(r, s))) ** (g - gp) * (
        2 * cl + 1 / (1 - 2 ** (-delta + 2 * g)) + 1 / (1 - 2 ** -g)
        + 1 / (1 - 2 ** (-delta + g + gp)) + 1 / (1 - 2 ** -gp))
    T3 = lead * C(g) ** 2 * (2 * c1 / qp) ** g / (1 - 2 ** -g)
    z = mpmath.zeta
    R = (T1 * (8 * z(g - 2) - 4 * z(g - 1) + 2 * z(g))
         + 3 * min(mpmath.ceil(mpmath.mpf(c1) / c2), 2) * T2 * (16 * z(g - 2) - 4 * z(g - 1))
         + T3 * (24 * z(g - 2) + 2 * z(g)))
    return float(R), float(T1), float(T2), float(T3)


def test_rc_bound_dual_path():
    p = FeasibilityProfile(delta=9, gamma=4, q=1, q_prime=0.5, r=0.5, s=0.5)
    got = analytic_rc_bound(LatticeConstants(0.25, 0.125), p, 2, gamma_prime=1.5)
    want = _rc_oracle(0.25, 0.125, 1, 0.5, 0.5, 0.5, 9, 4, 1.5)
    assert got.value == pytest.approx(want[0], rel=1e-12)
    assert (got.T1, got.T2, got.T3) == pytest.approx(want[1:], rel=1e-12)


def test_rc_bound_scaling_law():
    p = FeasibilityProfile(delta=9, gamma=4)
    a = analytic_rc_bound(LatticeConstants(0.5, 0.25), p, 2, gamma_prime=1.5)
    b = analytic_rc_bound(LatticeConstants(0.25, 0.125), p, 2, gamma_prime=1.5)
    assert math.log2(a.T1 / b.T1) == pytest.approx(4.0, abs=1e-12)
    assert math.log2(a.T3 / b.T3) == pytest.approx(4.0, abs=1e-12)
    assert math.log2(a.T2 / b.T2) == pytest.approx(4.0 - 1.5, abs=1e-12)


def test_rc_bound_hypotheses():
    with pytest.raises(PreconditionError):
        analytic_rc_bound(LatticeConstants(0.25, 0.125), FeasibilityProfile(delta=7, gamma=4), 2)
    with pytest.raises(PreconditionError):
        analytic_rc_bound(LatticeConstants(0.25, 0.125), FeasibilityProfile(delta=9, gamma=4), 2, gamma_prime=2.5)


# ---------------------------------------------------------------------------
# covering quantities


def _phi_oracle(xi, gen, alpha, j_max):
    """Plain double loop over (j, k) with the matrices applied explicitly (batched over k)."""
    total = 0.0
    for j in range(j_max + 1):
        Ainv = np.linalg.inv(scaling_matrix(j, alpha, 0))
        K = shear_range(j, alpha)
        mats = np.array([shear_matrix((-k1, -k2), 0).T @ Ainv
                         for k1 in range(-K, K + 1) for k2 in range(-K, K + 1)])
        y = mats @ np.asarray(xi, dtype=float)
        total += float(np.sum(np.abs(gen.psi_hat(y)) ** 2))
    return total


def test_phi_overlap_oracle(gen):
    pol = TruncationPolicy(j_max_sum=12)
    got = phi_overlap((4.0, 0.0, 0.0), (0, 0, 0), gen, 2, pol)
    assert got == pytest.approx(_phi_oracle((4.0, 0.0, 0.0), gen, 2, 12), rel=1e-12)
    assert got > 0


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 200.0), st.floats(-1, 1), st.floats(-1, 1))
def test_phi_dominates_single_term(gen, x1, u2, u3):
    xi = (x1, u2 * x1, u3 * x1)
    v = phi_overlap(xi, (0, 0, 0), gen, 2, SMALL)
    assert v >= abs(float(gen.psi_hat(np.array(xi)))) ** 2 * (1 - 1e-12)


def test_zero_generator_everything_vanishes():
    z = zero_generator()
    assert phi_overlap((3, 1, 0), (0, 0, 0), z, 2, SMALL) == 0.0
    t = OverlapTables(z, 2.0, SMALL)
    assert gamma_sup((1, 0, 0), z, 2, SMALL, t)[0] == 0.0
    assert l_bounds(z, 2, SMALL, t) == (0.0, 0.0)
    assert r_of_c(LatticeConstants(0.25, 0.125), z, 2, SMALL, t).value == 0.0
    assert not covering_check(z, 0.1, 2, SMALL, t)
    cert = frame_bound_interval(z, 2, LatticeConstants(0.25, 0.125), SMALL, tables=t)
    assert not cert.certified and cert.flag
    assert cert.L_inf == cert.L_sup == cert.R_c == cert.lower == cert.upper == 0.0


def test_tables_match_pointwise_overlap(gen, tables):
    v = tables.phi((0.0, 0.0, 0.0))
    for idx in [(0, 0, 0), (5, 3, 11), (15, 15, 0), (9, 8, 8)]:
        pt = tables.points(idx)
        assert v[idx] == pytest.approx(phi_overlap(pt, (0, 0, 0), gen, 2, SMALL), rel=1e-10)


def test_gamma_sup_matches_scan(gen, profile):
    pol = TruncationPolicy(n_xi1=8, n_cross=6)
    tables = OverlapTables(gen, 2.0, pol, profile)
    w = (10.0, 0.0, 0.0)
    val, where = gamma_sup(w, gen, 2, pol, tables)
    scan = 0.0
    for i in range(len(tables.xi1)):
        for a in range(len(tables.u)):
            for b in range(len(tables.u)):
                pt = np.array(tables.points((i, a, b)))
                for sgn in (1, -1):
                    scan = max(scan, phi_overlap(sgn * pt, w, gen, 2, pol))
    assert val == pytest.approx(scan, rel=1e-10)


def test_gamma_zero_is_lsup(gen, tables):
    assert gamma_sup((0, 0, 0), gen, 2, SMALL, tables)[0] == l_bounds(gen, 2, SMALL, tables)[1]


def test_covering_implies_lower(gen, tables):
    rho = 0.1
    assert covering_check(gen, rho, 2, SMALL, tables)
    assert l_bounds(gen, 2, SMALL, tables)[0] > rho ** 2


def test_policy_validation():
    with pytest.raises(PreconditionError):
        TruncationPolicy(j_max_sum=6)
    with pytest.raises(PreconditionError):
        TruncationPolicy(lattice_radius=2)


def test_certificate_flags_coarse_lattice(gen, profile, tables):
    cert = frame_bound_interval(gen, 2, LatticeConstants(5, 5), SMALL, profile, tables=tables)
    assert not cert.certified and cert.flag == "no lower-bound certificate"


def test_certificate_invariants_random_configs(gen, profile):
    pol = TruncationPolicy(n_xi1=8, n_cross=8)
    tables = OverlapTables(gen, 2.0, pol, profile)
    c_fit = verify_feasibility(gen, profile).c_fit
    r = np.random.default_rng(7)
    for _ in range(10):
        c1 = float(r.uniform(0.05, 0.6))
        c2 = float(r.uniform(0.3, 1.0) * c1)
        cert = frame_bound_interval(gen, 2, LatticeConstants(c1, c2), pol, profile, c_fit=c_fit,
                                    tables=tables)
        assert cert.L_inf <= cert.L_sup
        assert cert.L_sup <= cert.analytic_Lsup * 1.05
        assert cert.R_c <= cert.analytic_Rc * 1.05
        assert cert.lower <= cert.upper
        assert cert.certified == (cert.lower > 0)
