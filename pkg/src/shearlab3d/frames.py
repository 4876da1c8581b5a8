"""Covering quantities and frame-bound certificates for one pyramid pair.

For the separable generators used here |psi_hat(y)| = e(y1) g(y2) g(y3), and
for pair P the argument S^T_{-k} A_{2^-j} xi is

    y = (xi1 / a1, xi2 / a2 - k1 xi1 / a1, xi3 / a2 - k2 xi1 / a1)

with a1 = 2^{j alpha/2}, a2 = 2^{j/2}. The overlap function therefore splits
into a per-scale product

    Phi(xi, w) = sum_j E_j(xi1) H_j(xi1, xi2) H_j(xi1, xi3),

which is evaluated on an outer-product grid (xi1 log-spaced, cross axes as
ratios xi2/xi1 and xi3/xi1 in [-1, 1]).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from .errors import PreconditionError, ConvergenceError
from .generators import FeasibilityProfile, GeneratorModel
from .geometry import LatticeConstants, axis_scales, shear_range

# ---------------------------------------------------------------------------
# special functions and elementary estimates

# Bernoulli numbers B_2, B_4, ..., B_16
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)


def zeta(s: float, n_direct: int = 12) -> float:
    """Riemann zeta for real s > 1 by Euler-Maclaurin summation.

    Direct sum up to n_direct - 1, integral and half-term corrections, then
    eight Bernoulli terms; the remainder is far below 1e-13 for s > 1.
    """
    if not s > 1:
        raise PreconditionError("zeta is evaluated only for s > 1")
    N = n_direct
    total = math.fsum(n ** -s for n in range(1, N))
    total += N ** (1 - s) / (s - 1) + 0.5 * N ** -s
    # sum_k B_{2k}/(2k)! * s(s+1)...(s+2k-2) * N^{-s-2k+1}
    rising = s
    fact = 2.0
    for k, b in enumerate(_BERNOULLI, start=1):
        total += b / fact * rising * N ** (-s - 2 * k + 1)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return total


def C_gamma(gamma: float) -> float:
    """C(gamma) = 3 + 2 / (gamma - 1)."""
    if not gamma > 1:
        raise PreconditionError("C(gamma) requires gamma > 1")
    return 3.0 + 2.0 / (gamma - 1.0)


def dyadic_sum_large(t: float, iota: float) -> float:
    """Upper estimate of sum over j >= 0 with 2^-j >= t of (2^-j)^-iota."""
    if t > 1:
        return 0.0
    return (t ** -iota - 2.0 ** -iota) / (1.0 - 2.0 ** -iota)


def dyadic_sum_small(t: float, iota: float) -> float:
    """Upper estimate of sum over j >= 0 with 2^-j <= t of (2^-j)^iota."""
    if t > 1:
        return 1.0 / (1.0 - 2.0 ** -iota)
    return t ** iota / (1.0 - 2.0 ** -iota)


def dyadic_sum_exact(t: float, iota: float, small: bool, j_cap: int = 4096) -> float:
    """Direct evaluation of the two dyadic sums above (for cross-checks)."""
    out = 0.0
    for j in range(j_cap):
        x = 2.0 ** -j
        if small and x <= t:
            out += x ** iota
        if not small and x >= t:
            out += x ** -iota
    return out


# ---------------------------------------------------------------------------
# truncation policy and overlap tables


@dataclass(frozen=True)
class TruncationPolicy:
    j_max_sum: int = 14
    lattice_radius: int = 4
    n_xi1: int = 64
    n_cross: int = 64
    xi1_top: float | None = None
    tail_tol: float = 1e-6
    max_radius: int = 12

    def __post_init__(self):
        if self.j_max_sum < 8:
            raise PreconditionError("j_max_sum must be at least 8")
        if self.lattice_radius < 4:
            raise PreconditionError("lattice_radius must be at least 4")
        if self.n_xi1 < 2 or self.n_cross < 2:
            raise PreconditionError("policy grid needs at least 2 points per axis")

    def refined(self, factor: int = 2) -> "TruncationPolicy":
        return TruncationPolicy(self.j_max_sum, self.lattice_radius, self.n_xi1 * factor,
                                self.n_cross * factor, self.xi1_top, self.tail_tol, self.max_radius)

    def to_dict(self) -> dict:
        return asdict(self)


def default_xi1_top(alpha: float, j_max_sum: int, profile: FeasibilityProfile, tol: float = 1e-6) -> float:
    """Largest pyramid-axis frequency whose omitted scales j > j_max_sum stay below ``tol``.

    The first omitted scale sees y1 = xi1 / 2^{(J+1) alpha/2}; requiring
    (q y1)^delta <= tol keeps its factor under the tolerance.
    """
    y = tol ** (1.0 / profile.delta) / profile.q
    return y * 2.0 ** ((j_max_sum + 1) * alpha / 2.0)


class OverlapTables:
    """Per-scale factors of Phi on an outer-product grid for one generator."""

    def __init__(self, gen: GeneratorModel, alpha, policy: TruncationPolicy,
                 profile: FeasibilityProfile | None = None):
        self.gen = gen
        self.alpha = float(alpha)
        self.policy = policy
        self.profile = profile or FeasibilityProfile()
        top = policy.xi1_top or default_xi1_top(self.alpha, policy.j_max_sum, self.profile)
        if top <= 1:
            raise PreconditionError("policy grid does not reach past xi1 = 1")
        self.xi1 = np.geomspace(1.0, top, policy.n_xi1)
        self.u = np.linspace(-1.0, 1.0, policy.n_cross)
        self.js = list(range(policy.j_max_sum + 1))
        self._e: dict[float, np.ndarray] = {}
        self._h: dict[float, np.ndarray] = {}

    # E_j(xi1; w1) = |e(y1) e(y1 + w1)|
    def E(self, w1: float) -> np.ndarray:
        w1 = float(w1)
        if w1 not in self._e:
            rows = []
            for j in self.js:
                a1, _ = axis_scales(j, self.alpha)
                y1 = self.xi1 / a1
                rows.append(np.abs(self.gen.eta_hat(y1) * self.gen.eta_hat(y1 + w1)))
            self._e[w1] = np.array(rows)
        return self._e[w1]

    # H_j(xi1, u; w) = sum_k |g(y) g(y + w)| with y = u xi1 / a2 - k xi1 / a1
    def H(self, w: float) -> np.ndarray:
        w = float(w)
        if w not in self._h:
            out = np.zeros((len(self.js), len(self.xi1), len(self.u)))
            for jj, j in enumerate(self.js):
                a1, a2 = axis_scales(j, self.alpha)
                K = shear_range(j, self.alpha)
                base = (self.xi1[:, None] * self.u[None, :]) / a2
                step = self.xi1[:, None] / a1
                for k in range(-K, K + 1):
                    y = base - k * step
                    out[jj] += np.abs(self.gen.cross_hat(y) * self.gen.cross_hat(y + w))
            self._h[w] = out
        return self._h[w]

    def phi(self, omega=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Phi(xi, omega) on the grid, shape (n_xi1, n_cross, n_cross)."""
        w1, w2, w3 = (float(v) for v in omega)
        return np.einsum("ja,jab,jac->abc", self.E(w1), self.H(w2), self.H(w3), optimize=True)

    def points(self, idx) -> tuple[float, float, float]:
        a, b, c = idx
        x1 = self.xi1[a]
        return (float(x1), float(self.u[b] * x1), float(self.u[c] * x1))

    def cover(self) -> np.ndarray:
        """max_{j,k} |psi_hat(y)| on the grid."""
        best = np.zeros((len(self.xi1), len(self.u), len(self.u)))
        for jj, j in enumerate(self.js):
            a1, a2 = axis_scales(j, self.alpha)
            K = shear_range(j, self.alpha)
            e = np.abs(self.gen.eta_hat(self.xi1 / a1))
            base = (self.xi1[:, None] * self.u[None, :]) / a2
            step = self.xi1[:, None] / a1
            g = np.zeros((len(self.xi1), len(self.u)))
            for k in range(-K, K + 1):
                g = np.maximum(g, np.abs(self.gen.cross_hat(base - k * step)))
            best = np.maximum(best, e[:, None, None] * g[:, :, None] * g[:, None, :])
        return best


def phi_tail_bound(alpha: float, policy: TruncationPolicy, profile: FeasibilityProfile,
                   c_fit: float, xi1_top: float) -> float:
    """Estimate of the omitted scales j > j_max_sum at the top of the grid.

    Each omitted scale contributes at most c_fit^2 (q^2/(rs)) C(2 gamma)^2
    (q xi1 2^{-j alpha/2})^{2 delta}; the dyadic sum over j uses the small-t
    estimate with iota = alpha delta.
    """
    p = profile
    t = 2.0 ** -(policy.j_max_sum + 1)
    iota = alpha * p.delta
    geo = (p.q * xi1_top) ** (2 * p.delta) * dyadic_sum_small(t, iota)
    return c_fit ** 2 * p.q ** 2 / (p.r * p.s) * C_gamma(2 * p.gamma) ** 2 * geo


# ---------------------------------------------------------------------------
# public covering quantities


def phi_overlap(xi, omega, gen: GeneratorModel, alpha, policy: TruncationPolicy) -> float:
    """Phi(xi, omega) at a single point, summed directly over (j, k1, k2)."""
    xi = np.asarray(xi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    total = 0.0
    for j in range(policy.j_max_sum + 1):
        a1, a2 = axis_scales(j, alpha)
        K = shear_range(j, alpha)
        y1 = xi[0] / a1
        e = abs(float(gen.eta_hat(np.array(y1)) * gen.eta_hat(np.array(y1 + omega[0]))))
        if e == 0.0:
            continue
        ks = np.arange(-K, K + 1)
        y2 = xi[1] / a2 - ks * y1
        y3 = xi[2] / a2 - ks * y1
        h2 = np.abs(gen.cross_hat(y2) * gen.cross_hat(y2 + omega[1])).sum()
        h3 = np.abs(gen.cross_hat(y3) * gen.cross_hat(y3 + omega[2])).sum()
        total += e * h2 * h3
    return float(total)


def _gamma_p1(tables: OverlapTables, omega):
    v = tables.phi(omega)
    i = np.unravel_index(int(np.argmax(v)), v.shape)
    return float(v[i]), i


def gamma_sup(omega, gen: GeneratorModel, alpha, policy: TruncationPolicy,
              tables: OverlapTables | None = None) -> tuple[float, tuple]:
    """Gamma(omega) = max over the P grid of Phi(., omega), with its argmax point.

    The grid covers the P1 half; the P4 half is its mirror, and Phi(-xi, w)
    equals Phi(xi, -w), so both signs of w1 are scanned.
    """
    tables = tables or OverlapTables(gen, alpha, policy)
    w1, w2, w3 = (float(v) for v in omega)
    best, where = -1.0, None
    for s1 in ((1.0,) if w1 == 0 else (1.0, -1.0)):
        v, i = _gamma_p1(tables, (s1 * w1, w2, w3))
        if v > best:
            pt = tables.points(i)
            best, where = v, (s1 * pt[0], s1 * pt[1], s1 * pt[2])
    return best, where


def l_bounds(gen: GeneratorModel, alpha, policy: TruncationPolicy,
             tables: OverlapTables | None = None, return_points: bool = False):
    """Grid min and max of Phi(xi, 0) over the pyramid pair."""
    tables = tables or OverlapTables(gen, alpha, policy)
    v = tables.phi((0.0, 0.0, 0.0))
    imin = np.unravel_index(int(np.argmin(v)), v.shape)
    imax = np.unravel_index(int(np.argmax(v)), v.shape)
    for name, i in (("minimum", imin), ("maximum", imax)):
        if i[0] in (0, v.shape[0] - 1) and v[i] > 0:
            if i[0] == v.shape[0] - 1:
                warnings.warn(f"Phi {name} sits on the top of the xi1 grid; truncation suspect",
                              RuntimeWarning, stacklevel=2)
    out = (float(v[imin]), float(v[imax]))
    if return_points:
        return out, tables.points(imin), tables.points(imax)
    return out


def _r_terms(c: LatticeConstants, radius: int):
    """Lattice points m != 0 with |m|_inf == radius grouped by symmetry class."""
    groups: dict[tuple, int] = {}
    rng = range(-radius, radius + 1)
    for m1 in rng:
        for m2 in rng:
            for m3 in rng:
                if max(abs(m1), abs(m2), abs(m3)) != radius:
                    continue
                b, cc = sorted((abs(m2), abs(m3)))
                key = (abs(m1), b, cc)
                groups[key] = groups.get(key, 0) + 1
    return groups


@dataclass
class RcResult:
    value: float
    radius: int
    last_shell: float
    shells: list = field(default_factory=list)


def r_of_c(c: LatticeConstants, gen: GeneratorModel, alpha, policy: TruncationPolicy,
           tables: OverlapTables | None = None) -> RcResult:
    """R(c) = sum over m != 0 of sqrt(Gamma(M_c^-1 m) Gamma(-M_c^-1 m)).

    Shells |m|_inf = 1, 2, ... are added up to the policy radius and then
    until the last shell contributes less than tail_tol relative to the sum.
    Gamma is even in each component of omega, so one value per symmetry
    class is evaluated and weighted by its multiplicity.
    """
    tables = tables or OverlapTables(gen, alpha, policy)
    cache: dict[tuple, float] = {}

    def gam(key):
        if key not in cache:
            w = (key[0] / c.c1, key[1] / c.c2, key[2] / c.c2)
            g_plus, _ = gamma_sup(w, gen, alpha, policy, tables)
            cache[key] = g_plus  # Gamma(-w) = Gamma(w) on the symmetric grid
        return cache[key]

    total, shells = 0.0, []
    radius = 0
    while True:
        radius += 1
        shell = math.fsum(mult * gam(key) for key, mult in sorted(_r_terms(c, radius).items()))
        shells.append(shell)
        total += shell
        if radius >= policy.lattice_radius:
            if shell <= policy.tail_tol * max(total, 1e-300) or total == 0.0:
                break
            if radius >= policy.max_radius:
                raise ConvergenceError(f"R(c) lattice sum not converged at radius {radius}", shells)
    return RcResult(total, radius, shells[-1], shells)


def covering_check(gen: GeneratorModel, rho: float, alpha, policy: TruncationPolicy,
                   tables: OverlapTables | None = None) -> bool:
    """True when every grid point of P has some (j, k) with |psi_hat| > rho."""
    if not rho > 0:
        raise PreconditionError("rho must be positive")
    tables = tables or OverlapTables(gen, alpha, policy)
    return bool(np.all(tables.cover() > rho))


# ---------------------------------------------------------------------------
# analytic bounds


def analytic_lsup_bound(profile: FeasibilityProfile, alpha: float) -> float:
    """(q^2/(rs)) C(2 gamma)^2 (1/(1 - 2^{(1-delta) alpha}) + ceil((2/alpha) log2(q/q')) + 1)."""
    p = profile
    alpha = float(alpha)
    if not (p.delta > 1 and p.gamma > 0.5):
        raise PreconditionError("the L_sup estimate needs delta > 1 and gamma > 1/2")
    lead = p.q ** 2 / (p.r * p.s) * C_gamma(2 * p.gamma) ** 2
    geo = 1.0 / (1.0 - 2.0 ** ((-p.delta + 1) * alpha))
    return lead * (geo + math.ceil(2.0 / alpha * math.log2(p.q / p.q_prime)) + 1.0)


@dataclass
class RcBound:
    value: float
    T1: float
    T2: float
    T3: float


def analytic_rc_bound(c: LatticeConstants, profile: FeasibilityProfile, alpha: float,
                      gamma_prime: float | None = None) -> RcBound:
    """Closed-form upper estimate of R(c) from the feasibility profile."""
    p = profile
    g = p.gamma
    if not (p.delta > 2 * g > 6):
        raise PreconditionError("the R(c) estimate needs delta > 2 gamma > 6")
    if not c.c1 >= c.c2 > 0:
        raise PreconditionError("the R(c) estimate needs c1 >= c2 > 0")
    gp = 0.5 * (1.0 + (g - 2.0)) if gamma_prime is None else float(gamma_prime)
    if not 1 < gp < g - 2:
        raise PreconditionError(f"gamma' = {gp} outside (1, gamma - 2)")
    lead = p.q ** 2 / (p.r * p.s)
    clog = math.ceil(math.log2(p.q / p.q_prime))
    inv = lambda e: 1.0 / (1.0 - 2.0 ** e)  # noqa: E731
    T1 = lead * C_gamma(g) ** 2 * (2 * c.c1 / p.q_prime) ** g * (clog + inv(-p.delta + 2 * g) + inv(-g))
    T2 = (lead * C_gamma(g) * C_gamma(gp) * (2 * p.q * c.c2 / (p.q_prime * min(p.r, p.s))) ** (g - gp)
          * (2 * clog + inv(-p.delta + 2 * g) + inv(-g) + inv(-p.delta + g + gp) + inv(-gp)))
    T3 = lead * C_gamma(g) ** 2 * (2 * c.c1 / p.q_prime) ** g * inv(-g)
    z0, z1, z2 = zeta(g - 2), zeta(g - 1), zeta(g)
    val = (T1 * (8 * z0 - 4 * z1 + 2 * z2)
           + 3 * min(math.ceil(c.c1 / c.c2), 2) * T2 * (16 * z0 - 4 * z1)
           + T3 * (24 * z0 + 2 * z2))
    return RcBound(val, T1, T2, T3)


# ---------------------------------------------------------------------------
# certificate


@dataclass
class FrameCertificate:
    L_inf: float
    L_sup: float
    R_c: float
    analytic_Lsup: float
    analytic_Rc: float
    c_fit: float
    det: float
    lower: float
    upper: float
    certified: bool
    flag: str = ""
    empirical_A: float | None = None
    empirical_B: float | None = None
    argmin: tuple = ()
    argmax: tuple = ()
    tail_phi: float = 0.0
    tail_lattice: float = 0.0
    lattice_radius_used: int = 0
    domain: str = "P"
    policy: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    c: tuple = ()
    alpha: str = ""
    generator: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c"] = list(self.c)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def frame_bound_interval(gen: GeneratorModel, alpha, c: LatticeConstants, policy: TruncationPolicy,
                         profile: FeasibilityProfile | None = None, c_fit: float = 1.0,
                         gamma_prime: float | None = None, strict: bool = True,
                         tables: OverlapTables | None = None) -> FrameCertificate:
    """Assemble [(L_inf - R)/det M_c, (L_sup + R)/det M_c] with provenance.

    With ``strict`` the hypotheses delta > 2 gamma > 6 of the certificate are
    enforced on the profile before anything is computed.
    """
    profile = profile or FeasibilityProfile()
    a = float(alpha)
    if strict and not (profile.delta > 2 * profile.gamma > 6):
        raise PreconditionError("certificate requires delta > 2 gamma > 6")
    tables = tables or OverlapTables(gen, a, policy, profile)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        (L_inf, L_sup), pmin, pmax = l_bounds(gen, a, policy, tables, return_points=True)
    rc = r_of_c(c, gen, a, policy, tables)
    det = c.det
    try:
        an_l = c_fit ** 2 * analytic_lsup_bound(profile, a)
    except PreconditionError:
        an_l = math.nan
    try:
        an_r = c_fit ** 2 * analytic_rc_bound(c, profile, a, gamma_prime).value
    except PreconditionError:
        an_r = math.nan
    certified = rc.value < L_inf
    lower = (L_inf - rc.value) / det
    upper = (L_sup + rc.value) / det
    flag = "" if certified else "no lower-bound certificate"
    tail = phi_tail_bound(a, policy, profile, c_fit, float(tables.xi1[-1]))
    return FrameCertificate(
        L_inf=L_inf, L_sup=L_sup, R_c=rc.value, analytic_Lsup=an_l, analytic_Rc=an_r, c_fit=c_fit,
        det=det, lower=lower, upper=upper, certified=certified, flag=flag,
        argmin=pmin, argmax=pmax, tail_phi=tail, tail_lattice=rc.last_shell,
        lattice_radius_used=rc.radius, policy=policy.to_dict() | {"xi1_top": float(tables.xi1[-1])},
        profile=asdict(profile), c=(c.c1, c.c2), alpha=str(alpha), generator=gen.descriptor())
