"""Fourier-side generator models.

The filter-based generator is built from a maximally flat low-pass filter

    |m0(x)|^2 = cos^{2K}(pi x) * sum_{n<L} C(K-1+n, n) sin^{2n}(pi x),

its half-shifted band-pass partner |m1(x)|^2 = |m0(x + 1/2)|^2, the scaling
function phi_hat(x) = prod_j m0(2^-j x) and the separable shearlet

    psi_hat(xi) = m1(4 xi1) phi_hat(xi1) phi_hat(2 xi2) phi_hat(2 xi3).

Both filters are taken zero-phase (nonnegative square roots), so every
evaluator here is real, even and nonnegative.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .errors import PreconditionError

Array = np.ndarray


@dataclass(frozen=True)
class FilterDesign:
    K: int = 15
    Lfilt: int = 10

    def __post_init__(self):
        validate_design(self.K, self.Lfilt)


def validate_design(K: int, Lfilt: int, strict: bool = True) -> None:
    if K < 1 or Lfilt < 1:
        raise PreconditionError("filter parameters must be positive integers")
    if strict and not (Lfilt >= 10 and 3 * Lfilt <= 2 * K and K <= 3 * Lfilt - 2):
        raise PreconditionError(
            f"(K, Lfilt) = ({K}, {Lfilt}) violates Lfilt >= 10 and 3 Lfilt/2 <= K <= 3 Lfilt - 2")


def binomial_weights(K: int, Lfilt: int) -> list[int]:
    """Exact integer coefficients C(K-1+n, n), n < Lfilt."""
    return [math.comb(K - 1 + n, n) for n in range(Lfilt)]


def _m0_sq_raw(x, K: int, Lfilt: int) -> Array:
    x = np.asarray(x, dtype=float)
    c = np.cos(np.pi * x) ** 2
    s = np.sin(np.pi * x) ** 2
    w = binomial_weights(K, Lfilt)
    acc = np.zeros_like(s) + float(w[-1])
    for coef in reversed(w[:-1]):
        acc = acc * s + float(coef)
    return c ** K * acc


def filter_sup(K: int, Lfilt: int, samples: int = 1 << 16) -> float:
    """sup_x |m0(x)|^2 on a dense grid of [0, 1/2] (the filter is even and 1-periodic)."""
    x = np.linspace(0.0, 0.5, samples + 1)
    v = _m0_sq_raw(x, K, Lfilt)
    i = int(np.argmax(v))
    # local refinement around the coarse maximiser
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, samples)]
    xx = np.linspace(lo, hi, 2049)
    return float(max(v.max(), _m0_sq_raw(xx, K, Lfilt).max()))


@dataclass(frozen=True)
class LowpassFilter:
    """Normalised maximally flat filter pair evaluated in closed form."""
    K: int = 15
    Lfilt: int = 10
    strict: bool = True
    norm: float = field(default=0.0, compare=False)

    def __post_init__(self):
        validate_design(self.K, self.Lfilt, strict=self.strict)
        if self.norm <= 0:
            # the truncated binomial sum keeps |m0|^2 <= 1 with equality at 0, so a
            # sampled sup above 1 by rounding only must not rescale the filter
            sup = filter_sup(self.K, self.Lfilt)
            object.__setattr__(self, "norm", sup if sup > 1.0 + 1e-12 else 1.0)

    def m0_sq(self, x) -> Array:
        return _m0_sq_raw(x, self.K, self.Lfilt) / self.norm

    def m1_sq(self, x) -> Array:
        return _m0_sq_raw(np.asarray(x, dtype=float) + 0.5, self.K, self.Lfilt) / self.norm

    def m0(self, x) -> Array:
        return np.sqrt(self.m0_sq(x))

    def m1(self, x) -> Array:
        return np.sqrt(self.m1_sq(x))


def design_filter(design: FilterDesign) -> LowpassFilter:
    return LowpassFilter(design.K, design.Lfilt)


def scaling_function_hat(xi, filt: LowpassFilter, J_phi: int = 24) -> Array:
    """Truncated product prod_{j<J_phi} m0(2^-j xi)."""
    if J_phi < 16:
        raise PreconditionError("J_phi must be at least 16")
    xi = np.asarray(xi, dtype=float)
    out = np.ones_like(xi)
    for j in range(J_phi):
        out *= filt.m0(xi * 2.0 ** -j)
    return out


def quadratic_defect(filt: LowpassFilter, x0: float = 2.0 ** -6, samples: int = 4097) -> float:
    """c = sup_{0<|x|<=x0} (1 - m0(x)) / x^2, the local quadratic constant of m0 at 0."""
    x = np.linspace(0.0, x0, samples)[1:]
    return float(max(0.0, np.max((1.0 - filt.m0(x)) / x ** 2)))


def phi_tail_bound(xi_max: float, filt: LowpassFilter, J_phi: int) -> float:
    """Bound on |prod_{j<J} - prod_{j<inf}| for |xi| <= xi_max.

    Uses |1 - m0(2^-j xi)| <= c (2^-j xi)^2 and sum_{j>=J} 4^-j = 4^{1-J}/3.
    """
    x0 = 2.0 ** -6
    if xi_max * 2.0 ** -J_phi > x0:
        return math.inf
    c = quadratic_defect(filt, x0)
    return c * xi_max ** 2 * 4.0 ** (1 - J_phi) / 3.0


# ---------------------------------------------------------------------------
# generator models


@dataclass(frozen=True)
class FeasibilityProfile:
    delta: float = 8.5
    gamma: float = 4.0
    q: float = 16.0
    q_prime: float = 2.0
    r: float = 2.0
    s: float = 2.0
    fit_residual: float = 0.0

    def __post_init__(self):
        if not (self.delta > 0 and self.gamma > 0):
            raise PreconditionError("delta and gamma must be positive")
        if min(self.q, self.q_prime, self.r, self.s) <= 0:
            raise PreconditionError("q, q', r, s must be positive")
        if self.q < max(self.q_prime, self.r, self.s):
            raise PreconditionError("feasibility profile requires q >= max(q', r, s)")
        if self.fit_residual < 0:
            raise PreconditionError("fit_residual must be nonnegative")

    def bound(self, xi) -> Array:
        xi = np.asarray(xi, dtype=float)
        a1 = np.abs(xi[..., 0])
        with np.errstate(divide="ignore", over="ignore"):
            b = np.minimum(1.0, (self.q * a1) ** self.delta)
            b *= np.minimum(1.0, (self.q_prime * a1) ** -self.gamma)
            b *= np.minimum(1.0, (self.r * np.abs(xi[..., 1])) ** -self.gamma)
            b *= np.minimum(1.0, (self.s * np.abs(xi[..., 2])) ** -self.gamma)
        return b


@dataclass(frozen=True)
class GeneratorModel:
    """Separable generator psi_hat(xi) = eta_hat(xi1) g(xi2) g(xi3).

    ``eta_hat`` carries the vanishing moments along the pyramid axis, ``g``
    is the cross-axis low-pass and ``phi_hat_1d`` generates the coarse-scale
    system through phi_hat(xi1) phi_hat(xi2) phi_hat(xi3).
    """
    kind: str
    eta_hat: Callable[[Array], Array]
    cross_hat: Callable[[Array], Array]
    phi_hat_1d: Callable[[Array], Array]
    J_phi: int = 24
    filt: LowpassFilter | None = None
    support_box: tuple[float, float, float] = (1.0, 1.0, 1.0)
    description: dict = field(default_factory=dict)

    def psi_hat(self, xi, pair: int = 0) -> Array:
        """Generator of pyramid pair ``pair`` (0: psi, 1: psi~, 2: psi^)."""
        xi = np.asarray(xi, dtype=float)
        # psi~(x1,x2,x3) = psi(x2,x1,x3), psi^(x1,x2,x3) = psi(x3,x2,x1)
        perm = {0: (0, 1, 2), 1: (1, 0, 2), 2: (2, 1, 0)}[pair]
        a, b, c = (xi[..., p] for p in perm)
        return self.eta_hat(a) * self.cross_hat(b) * self.cross_hat(c)

    def lowpass_hat(self, xi) -> Array:
        xi = np.asarray(xi, dtype=float)
        return self.phi_hat_1d(xi[..., 0]) * self.phi_hat_1d(xi[..., 1]) * self.phi_hat_1d(xi[..., 2])

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "J_phi": self.J_phi}
        if self.filt is not None:
            d.update(K=self.filt.K, Lfilt=self.filt.Lfilt, normalization=self.filt.norm)
        d.update(self.description)
        return d

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True, indent=2)


def filter_generator(K: int = 15, Lfilt: int = 10, J_phi: int = 24) -> GeneratorModel:
    """Filter-based generator m1(4 xi1) phi(xi1) phi(2 xi2) phi(2 xi3)."""
    filt = LowpassFilter(K, Lfilt)
    if J_phi < 16:
        raise PreconditionError("J_phi must be at least 16")

    def phi(x):
        return scaling_function_hat(x, filt, J_phi)

    def eta(w):
        w = np.asarray(w, dtype=float)
        return filt.m1(4.0 * w) * phi(w)

    def cross(t):
        return phi(2.0 * np.asarray(t, dtype=float))

    return GeneratorModel("filter_based", eta, cross, phi, J_phi, filt, support_box=(4.0 * K, K, K))


def shearlet_hat(xi, filt: LowpassFilter, J_phi: int = 24) -> Array:
    """psi_hat(xi) = m1(4 xi1) phi_hat(xi1) phi_hat(2 xi2) phi_hat(2 xi3), evaluated term by term."""
    xi = np.asarray(xi, dtype=float)
    phi = lambda x: scaling_function_hat(x, filt, J_phi)  # noqa: E731
    return filt.m1(4 * xi[..., 0]) * phi(xi[..., 0]) * phi(2 * xi[..., 1]) * phi(2 * xi[..., 2])


def separable_generator(eta_hat, phi_hat, lowpass_hat=None, J_phi: int = 24,
                        description: dict | None = None) -> GeneratorModel:
    """Generator psi(x) = eta(x1) phi(x2) phi(x3) from caller-supplied 1D evaluators."""
    return GeneratorModel("separable", eta_hat, phi_hat, lowpass_hat or phi_hat, J_phi,
                          description=description or {})


def zero_generator() -> GeneratorModel:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return GeneratorModel("separable", z, z, z, description={"name": "zero"})


# ---------------------------------------------------------------------------
# feasibility


def log_axis(n_points: int, lo: float, hi: float) -> Array:
    """Symmetric log-spaced axis with n_points/2 magnitudes in (lo, hi) and both signs.

    Magnitudes sit at log-midpoints of a uniform partition of [lo, hi], so
    dyadic endpoints (where the scaling function has exact zeros) are avoided.
    """
    half = n_points // 2
    u = (np.arange(half) + 0.5) / half
    mags = lo * (hi / lo) ** u
    return np.concatenate([-mags[::-1], mags])


@dataclass(frozen=True)
class FrequencyGrid:
    axes: tuple[Array, Array, Array]

    @classmethod
    def log_cube(cls, n_points: int = 64, lo: float = 2.0 ** -10, hi: float = 32.0):
        ax = log_axis(n_points, lo, hi)
        return cls((ax, ax, ax))

    def split(self) -> tuple["FrequencyGrid", "FrequencyGrid"]:
        """Calibration and holdout subgrids by a 50/50 interleave of magnitudes.

        Counting from the largest magnitude, even ranks go to the holdout and
        odd ranks to calibration, so the outermost tail is always held out.
        The split is per axis and symmetric in sign; the product grids are
        disjoint.
        """
        cal, hold = [], []
        for ax in self.axes:
            mags = np.unique(np.abs(ax))[::-1]
            sel_c = np.isin(np.abs(ax), mags[1::2])
            cal.append(ax[sel_c])
            hold.append(ax[~sel_c])
        return FrequencyGrid(tuple(cal)), FrequencyGrid(tuple(hold))

    def size(self) -> int:
        return int(np.prod([len(a) for a in self.axes]))


def _ratio_max(gen: GeneratorModel, profile: FeasibilityProfile, grid: FrequencyGrid):
    """Max of |psi_hat| / bound over a product grid, exploiting separability of both."""
    a1, a2, a3 = grid.axes
    best, where = 0.0, (float(a1[0]), float(a2[0]), float(a3[0]))
    # separable evaluation: |psi_hat| = e(x1) g(x2) g(x3); bound factorises too
    e = np.abs(gen.eta_hat(a1))
    g2 = np.abs(gen.cross_hat(a2))
    g3 = np.abs(gen.cross_hat(a3))
    p = profile
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        b1 = np.minimum(1.0, (p.q * np.abs(a1)) ** p.delta) * np.minimum(1.0, (p.q_prime * np.abs(a1)) ** -p.gamma)
        b2 = np.minimum(1.0, (p.r * np.abs(a2)) ** -p.gamma)
        b3 = np.minimum(1.0, (p.s * np.abs(a3)) ** -p.gamma)
        r1 = np.where(e > 0, e / b1, 0.0)
        r2 = np.where(g2 > 0, g2 / b2, 0.0)
        r3 = np.where(g3 > 0, g3 / b3, 0.0)
    i1, i2, i3 = int(np.argmax(r1)), int(np.argmax(r2)), int(np.argmax(r3))
    best = float(r1[i1] * r2[i2] * r3[i3])
    if best > 0:
        where = (float(a1[i1]), float(a2[i2]), float(a3[i3]))
    return best, where


@dataclass
class FeasibilityReport:
    passes: bool
    worst_ratio: float
    worst_point: tuple
    c_fit: float
    calibration_ratio: float
    holdout_ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def verify_feasibility(gen: GeneratorModel, profile: FeasibilityProfile,
                       grid: FrequencyGrid | None = None, calibrate: bool = True) -> FeasibilityReport:
    """Check |psi_hat| <= C_fit * bound on a held-out grid.

    C_fit is the max ratio on the calibration half of ``grid``. The report's
    worst ratio and point are taken over the holdout half, and the check
    passes when the holdout ratio does not exceed C_fit. With
    ``calibrate=False`` the constant is 1 and the whole grid is tested.
    """
    grid = grid or FrequencyGrid.log_cube()
    if grid.size() == 0:
        raise PreconditionError("feasibility grid is empty")
    if not calibrate:
        r, w = _ratio_max(gen, profile, grid)
        return FeasibilityReport(r <= 1.0, r, w, 1.0, r, r)
    cal, hold = grid.split()
    c_fit, _ = _ratio_max(gen, profile, cal)
    r_hold, w_hold = _ratio_max(gen, profile, hold)
    return FeasibilityReport(bool(r_hold <= c_fit), r_hold, w_hold, c_fit, c_fit, r_hold)


def vanishing_moment_order(gen: GeneratorModel, lo: float = 2.0 ** -12, hi: float = 2.0 ** -6,
                           n_probe: int = 64) -> float:
    """Least-squares slope of log|psi_hat(t,0,0)| against log t on [lo, hi]."""
    t = np.geomspace(lo, hi, n_probe)
    xi = np.stack([t, np.zeros_like(t), np.zeros_like(t)], axis=-1)
    v = np.abs(gen.psi_hat(xi))
    ok = v > 0
    if ok.sum() < 2:
        raise PreconditionError("generator vanishes on the probe set; order is undefined")
    slope, _ = np.polyfit(np.log(t[ok]), np.log(v[ok]), 1)
    return float(slope)
