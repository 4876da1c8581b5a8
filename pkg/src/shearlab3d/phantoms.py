"""Cartoon-like volumes, star-shaped boundary fields and hypercube fixtures.

Angles follow the usual spherical convention about a centre point:
theta1 in [0, 2 pi) is the longitude and theta2 in [0, pi] the polar angle.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .transform import VALID_N, Volume

RHO0 = 0.35
MARGIN = (0.15, 0.85)
BASE_RADIUS = 0.25


# ---------------------------------------------------------------------------
# Hölder estimates


def holder_seminorm_estimate(samples, alpha, periodic: bool = True, spacing=None) -> float:
    """Finite-difference estimate of the Hölder-alpha seminorm of a field on an angular grid.

    The gradient is taken by centred differences; the estimate is the largest
    quotient |grad rho(t) - grad rho(t')| / |t - t'|^(alpha - 1) over pairs at
    distance at most a quarter of the domain along each axis.

    Parameters
    ----------
    samples : (n1, n2) array
        Values on the grid theta1 = 2 pi i / n1, theta2 = pi (i + 1/2) / n2
        unless ``spacing`` says otherwise.
    alpha : float in (1, 2]
    periodic : bool
        Treat axis 0 as periodic (full longitude circle).
    spacing : (h1, h2), optional
    """
    a = float(alpha)
    if not 1 < a <= 2:
        raise PreconditionError("Hölder exponent alpha must lie in (1, 2]")
    r = np.asarray(samples, dtype=float)
    n1, n2 = r.shape
    if n1 < 64 or n2 < 32:
        raise PreconditionError("angular grid too coarse for a seminorm estimate (need 64x32)")
    h1, h2 = spacing if spacing is not None else (2 * math.pi / n1, math.pi / n2)
    if periodic:
        g1 = (np.roll(r, -1, 0) - np.roll(r, 1, 0)) / (2 * h1)
    else:
        g1 = np.gradient(r, h1, axis=0)
    g2 = np.gradient(r, h2, axis=1)
    # drop the one-sided boundary rows so only centred differences remain
    if not periodic:
        g1, g2 = g1[1:-1], g2[1:-1]
    g1, g2 = g1[:, 1:-1], g2[:, 1:-1]
    m1, m2 = g1.shape
    e = a - 1.0
    best = 0.0
    o1, o2 = _offsets(m1 // 4), _offsets(m2 // 4)
    for d1 in o1:
        for d2 in sorted(set(o2) | {-d for d in o2}):
            if d1 == 0 and d2 <= 0:
                continue
            dist = math.hypot(d1 * h1, d2 * h2) ** e
            if periodic:
                s1 = np.roll(g1, -d1, 0)
                s2 = np.roll(g2, -d1, 0)
                rows = slice(None)
            else:
                s1, s2 = g1[d1:], g2[d1:]
                rows = slice(0, m1 - d1)
            if d2 >= 0:
                a1, b1 = g1[rows, :m2 - d2], s1[:, d2:]
                a2, b2 = g2[rows, :m2 - d2], s2[:, d2:]
            else:
                a1, b1 = g1[rows, -d2:], s1[:, :m2 + d2]
                a2, b2 = g2[rows, -d2:], s2[:, :m2 + d2]
            q = max(np.abs(a1 - b1).max(initial=0.0), np.abs(a2 - b2).max(initial=0.0)) / dist
            best = max(best, float(q))
    return best


def _offsets(top: int) -> list[int]:
    """All offsets up to 8, then a geometric ladder up to ``top``.

    Short offsets carry the supremum for smooth fields; the ladder keeps the
    long-range part of the quotient without scanning every pair.
    """
    small = list(range(0, min(top, 8) + 1))
    big = np.unique(np.geomspace(9, max(top, 9), 12).astype(int)) if top > 8 else []
    return small + [int(b) for b in big if b <= top]


def angular_grid(n1: int = 256, n2: int = 128):
    t1 = 2 * math.pi * np.arange(n1) / n1
    t2 = math.pi * (np.arange(n2) + 0.5) / n2
    return np.meshgrid(t1, t2, indexing="ij")


# ---------------------------------------------------------------------------
# radius fields


@dataclass
class _Perturbation:
    """Sum of plane waves restricted to the unit sphere; smooth in the direction vector."""
    freqs: np.ndarray    # (M, 3)
    phases: np.ndarray   # (M,)
    amps: np.ndarray     # (M,)

    def __call__(self, t1, t2):
        u = np.stack([np.sin(t2) * np.cos(t1), np.sin(t2) * np.sin(t1), np.cos(t2)], axis=-1)
        arg = u @ self.freqs.T + self.phases
        return np.cos(arg) @ self.amps


@dataclass
class RadiusField:
    """Star-shaped boundary rho(theta1, theta2) = base + scale_l * h_l on longitude sector l."""
    kind: str
    alpha: float
    nu: float
    patches: int = 1
    seed: int = 0
    rho0: float = RHO0
    base: float = BASE_RADIUS
    parts: list = field(default_factory=list)
    scales: list = field(default_factory=list)

    def sector(self, t1):
        t1 = np.mod(t1, 2 * math.pi)
        return np.minimum((t1 * self.patches / (2 * math.pi)).astype(int), self.patches - 1)

    def __call__(self, t1, t2):
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        out = np.full(np.broadcast(t1, t2).shape, self.base)
        if not self.parts:
            return out
        t1b, t2b = np.broadcast_arrays(t1, t2)
        sec = self.sector(t1b)
        for l, (h, s) in enumerate(zip(self.parts, self.scales)):
            sel = sec == l
            if sel.any():
                out[sel] += s * h(t1b[sel], t2b[sel])
        return out

    @property
    def rho_max(self) -> float:
        t1, t2 = angular_grid(512, 256)
        return float(self(t1, t2).max())

    def patch_estimates(self, n1: int = 256, n2: int = 128) -> list[float]:
        """Per-sector seminorm estimates (sector interiors only)."""
        if self.patches == 1:
            t1, t2 = angular_grid(n1, n2)
            return [holder_seminorm_estimate(self(t1, t2), self.alpha)]
        # sample each closed sector on its own grid; the stencil never crosses a seam
        rows = max(n1 // self.patches, 64)
        width = 2 * math.pi / self.patches
        t2 = math.pi * (np.arange(n2) + 0.5) / n2
        out = []
        for l, (h, s) in enumerate(zip(self.parts, self.scales)):
            t1 = l * width + width * np.arange(rows) / (rows - 1)
            T1, T2 = np.meshgrid(t1, t2, indexing="ij")
            r = self.base + s * h(T1, T2)
            out.append(holder_seminorm_estimate(r, self.alpha, periodic=False,
                                                spacing=(width / (rows - 1), math.pi / n2)))
        return out

    def global_estimate(self, n1: int = 256, n2: int = 128) -> float:
        t1, t2 = angular_grid(n1, n2)
        return holder_seminorm_estimate(self(t1, t2), self.alpha)

    def describe(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "nu": self.nu, "patches": self.patches,
                "seed": self.seed, "rho0": self.rho0, "base": self.base,
                "scales": [float(s) for s in self.scales]}


def make_radius_field(kind: str, alpha=2.0, nu: float = 1.0, L_patches: int = 1, seed: int = 0,
                      n_waves: int = 6, max_freq: float = 2.5) -> RadiusField:
    """Random band-limited perturbation of a sphere, rescaled to the Hölder budget.

    ``smooth_star`` uses one field; ``piecewise_star`` draws an independent
    field per longitude sector, so the joins between sectors are sharp;
    ``constant`` is the plain sphere of radius 0.25.
    """
    alpha = float(alpha)
    if nu < 0:
        raise PreconditionError("Hölder budget nu must be nonnegative")
    if L_patches < 1:
        raise PreconditionError("need at least one patch")
    if kind == "constant":
        return RadiusField(kind, alpha, nu, 1, seed)
    if kind not in ("smooth_star", "piecewise_star"):
        raise PreconditionError(f"unknown radius field kind {kind!r}")
    if nu == 0:
        raise PreconditionError("cannot rescale a nonconstant field to a zero Hölder budget")
    patches = L_patches if kind == "piecewise_star" else 1
    rng = np.random.default_rng(seed)
    field_ = RadiusField(kind, alpha, nu, patches, seed)
    t1, t2 = angular_grid(256, 128)
    t1f, t2f = angular_grid(512, 256)
    for _ in range(patches):
        h = _Perturbation(rng.uniform(-max_freq, max_freq, (n_waves, 3)),
                          rng.uniform(0, 2 * math.pi, n_waves),
                          rng.standard_normal(n_waves) / n_waves)
        field_.parts.append(h)
        field_.scales.append(1.0)
    for l, h in enumerate(field_.parts):
        vals = h(t1, t2)
        est = max(holder_seminorm_estimate(vals, alpha), holder_seminorm_estimate(h(t1f, t2f), alpha))
        amp = np.abs(h(t1f, t2f)).max()
        s = 0.95 * nu / est if est > 0 else 1.0
        # keep the radius inside (0.05, rho0)
        s = min(s, 0.95 * (field_.rho0 - field_.base) / amp, 0.95 * (field_.base - 0.05) / amp)
        field_.scales[l] = s
    return field_


# ---------------------------------------------------------------------------
# smooth parts


def margin_window(x, lo: float = 0.05, hi: float = 0.95, flat: tuple = MARGIN):
    """C-infinity window: 1 on ``flat``, 0 outside (lo, hi), per coordinate."""
    def step(t):
        t = np.clip(t, 0.0, 1.0)
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        return a / (a + b)
    x = np.asarray(x, dtype=float)
    return step((x - lo) / (flat[0] - lo)) * step((hi - x) / (hi - flat[1]))


@dataclass
class TrigPolynomial:
    """f(x) = const + sum_q a_q cos(2 pi q.x + phase_q)."""
    const: float = 0.0
    freqs: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    amps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __call__(self, X, Y, Z):
        out = np.full(np.broadcast(X, Y, Z).shape, float(self.const))
        for q, a, p in zip(self.freqs, self.amps, self.phases):
            out += a * np.cos(2 * math.pi * (q[0] * X + q[1] * Y + q[2] * Z) + p)
        return out

    def cbeta_norm(self, beta) -> float:
        """Upper estimate of sup|f| + sup|grad f| + Hölder_{beta-1}(grad f) from the exact derivatives."""
        b = float(beta)
        w = 2 * math.pi * np.linalg.norm(self.freqs, axis=1) if len(self.amps) else np.zeros(0)
        a = np.abs(self.amps)
        # |grad cos| Lipschitz constant w^2, bounded by 2w on large scales; interpolate
        hol = np.minimum(w ** 2, 2 * w) if b >= 2 else 2 ** (2 - b) * w ** b
        return float(abs(self.const) + a.sum() + (a * w).sum() + (a * hol).sum())

    @property
    def is_constant(self) -> bool:
        return len(self.amps) == 0

    def describe(self) -> dict:
        return {"const": self.const, "freqs": self.freqs.tolist(), "amps": self.amps.tolist(),
                "phases": self.phases.tolist()}


def random_smooth_part(mu: float, beta, seed: int = 0, terms: int = 4, max_freq: int = 2,
                       const: float = 0.0) -> TrigPolynomial:
    """Random trigonometric polynomial scaled so its C^beta estimate equals 0.95 mu."""
    rng = np.random.default_rng(seed)
    q = rng.integers(-max_freq, max_freq + 1, (terms, 3)).astype(float)
    p = TrigPolynomial(const, q, rng.standard_normal(terms), rng.uniform(0, 2 * math.pi, terms))
    var = p.cbeta_norm(beta) - abs(const)
    if var > 0:
        room = 0.95 * mu - abs(const)
        if room <= 0:
            raise PreconditionError("constant part already exceeds the C^beta budget")
        p.amps = p.amps * room / var
    return p


# ---------------------------------------------------------------------------
# cartoon specs


@dataclass
class CartoonSpec:
    alpha: float
    beta: float
    nu: float
    mu: float
    radius: RadiusField
    f0: TrigPolynomial = field(default_factory=TrigPolynomial)
    f1: TrigPolynomial = field(default_factory=lambda: TrigPolynomial(1.0))
    center: tuple = (0.5, 0.5, 0.5)
    seed: int = 0

    def validate(self) -> dict:
        """Check the cartoon class constraints; raises PreconditionError on violation."""
        if not (1 < self.alpha <= 2 and 1 < self.beta <= 2):
            raise PreconditionError("alpha and beta must lie in (1, 2]")
        if self.beta < self.alpha:
            raise PreconditionError("beta must be at least alpha")
        rmax = self.radius.rho_max
        if rmax > self.radius.rho0 or self.radius.rho0 >= 1:
            raise PreconditionError(f"radius {rmax:.4f} exceeds the cap {self.radius.rho0}")
        c = np.asarray(self.center, dtype=float)
        if np.any(c - rmax < MARGIN[0] - 1e-12) or np.any(c + rmax > MARGIN[1] + 1e-12):
            raise PreconditionError("feature does not fit in the margin box [0.15, 0.85]^3")
        coarse = self.radius.patch_estimates(256, 128) if self.radius.parts else [0.0]
        fine = self.radius.patch_estimates(512, 256) if self.radius.parts else [0.0]
        for a, b in zip(coarse, fine):
            if max(a, b) > self.nu * (1 + 1e-9):
                raise PreconditionError(f"Hölder estimate {max(a, b):.4f} exceeds nu = {self.nu}")
            if max(a, b) > 0 and abs(a - b) > 0.1 * max(a, b):
                raise PreconditionError("Hölder estimates at two resolutions disagree by more than 10%")
        n0, n1 = self.f0.cbeta_norm(self.beta), self.f1.cbeta_norm(self.beta)
        if max(n0, n1) > self.mu * (1 + 1e-9):
            raise PreconditionError(f"C^beta estimate {max(n0, n1):.4f} exceeds mu = {self.mu}")
        return {"rho_max": rmax, "holder_per_patch": fine, "cbeta": [n0, n1]}

    def describe(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "nu": self.nu, "mu": self.mu,
                "center": list(self.center), "seed": self.seed, "radius": self.radius.describe(),
                "f0": self.f0.describe(), "f1": self.f1.describe()}


def _check_n(n):
    if n not in VALID_N:
        raise PreconditionError(f"grid size must be one of {VALID_N}")


def voxel_centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def _membership(radius: RadiusField, center, X, Y, Z):
    dx, dy, dz = X - center[0], Y - center[1], Z - center[2]
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    t1 = np.mod(np.arctan2(dy, dx), 2 * math.pi)
    t2 = np.arccos(np.clip(np.divide(dz, r, out=np.ones_like(r), where=r > 0), -1, 1))
    return r <= radius(t1, t2)


def rasterize_cartoon(spec: CartoonSpec, n: int, threads: int = 1) -> Volume:
    """Point-sample f0 + f1 * chi_B at voxel centres (no anti-aliasing).

    The smooth part f0 is multiplied by ``margin_window`` so that its support
    stays inside the unit cube; f1 only matters on B, which lies inside the
    margin box.
    """
    _check_n(n)
    c = np.asarray(spec.center, dtype=float)
    rmax = spec.radius.rho_max
    if np.any(c - rmax < MARGIN[0] - 1e-12) or np.any(c + rmax > MARGIN[1] + 1e-12):
        raise PreconditionError("feature does not fit in the margin box [0.15, 0.85]^3")
    x = voxel_centers(n)
    out = np.zeros((n, n, n))

    def slab(i):
        X, Y, Z = np.meshgrid(x[i:i + 1], x, x, indexing="ij")
        v = np.zeros(X.shape)
        if not (spec.f0.is_constant and spec.f0.const == 0):
            v += spec.f0(X, Y, Z) * margin_window(X) * margin_window(Y) * margin_window(Z)
        inside = _membership(spec.radius, c, X, Y, Z)
        if inside.any():
            v[inside] += spec.f1(X[inside], Y[inside], Z[inside])
        out[i] = v[0]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(slab, range(n)))
    else:
        for i in range(n):
            slab(i)
    return Volume(out, {"phantom": "cartoon", "spec": spec.describe()})


def ball_phantom(center=(0.5, 0.5, 0.5), radius: float = 0.25, n: int = 64) -> Volume:
    """Indicator of a ball sampled at voxel centres."""
    _check_n(n)
    c = np.asarray(center, dtype=float)
    if radius < 0:
        raise PreconditionError("radius must be nonnegative")
    if np.any(c - radius < MARGIN[0] - 1e-12) or np.any(c + radius > MARGIN[1] + 1e-12):
        raise PreconditionError("ball does not fit in the margin box [0.15, 0.85]^3")
    x = voxel_centers(n)
    X, Y, Z = np.meshgrid(x - c[0], x - c[1], x - c[2], indexing="ij", sparse=True)
    data = ((X * X + Y * Y + Z * Z) <= radius * radius).astype(float) if radius > 0 else np.zeros((n,) * 3)
    return Volume(data, {"phantom": "ball", "center": [float(v) for v in c], "radius": float(radius)})


def boundary_voxels(mask: np.ndarray) -> int:
    """Voxels inside the set with at least one face neighbour outside it."""
    m = np.asarray(mask, dtype=bool)
    inner = m.copy()
    for ax in range(3):
        for s in (1, -1):
            inner &= np.roll(m, s, axis=ax)
    return int(np.count_nonzero(m & ~inner))


def linear_edge_phantom(normal, offset: float = 0.5, n: int = 64) -> Volume:
    """Windowed half-space chi{<x - x0, normal> >= 0} with x0 = offset * (1, 1, 1).

    The window is ``margin_window`` in each coordinate (1 on [0.15, 0.85],
    smoothly zero outside (0.05, 0.95)).
    """
    _check_n(n)
    nv = np.asarray(normal, dtype=float)
    if nv.shape != (3,) or not np.any(nv != 0):
        raise PreconditionError("degenerate hyperplane normal")
    if np.any(np.abs(nv[1:]) > 4):
        raise PreconditionError("slopes |s_i| must not exceed 4")
    x = voxel_centers(n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij", sparse=True)
    side = (nv[0] * (X - offset) + nv[1] * (Y - offset) + nv[2] * (Z - offset)) >= 0
    w = margin_window(X) * margin_window(Y) * margin_window(Z)
    return Volume(side * w, {"phantom": "linear_edge", "normal": nv.tolist(), "offset": offset})


# ---------------------------------------------------------------------------
# hypercube fixtures


def bump(t):
    """C-infinity bump supported in (0, 1) with maximum 1 at t = 1/2."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    s = np.where(inside, t * (1 - t), 1.0)
    return np.where(inside, np.exp(4.0 - 1.0 / s), 0.0)


@dataclass
class HypercubeFixture:
    m: int
    mode: str
    vertex_atoms: list
    f0: Volume
    delta: float
    norms: np.ndarray

    @property
    def spread(self) -> float:
        nz = self.norms[self.norms > 0]
        return float(nz.max() / nz.min()) if len(nz) else float("inf")

    def gram_offdiag_max(self) -> float:
        """Largest |<a_i, a_l>| over distinct atoms (exactly zero for disjoint supports)."""
        cover = sum((a.data != 0).astype(np.int32) for a in self.vertex_atoms)
        if cover.max(initial=0) <= 1:
            return 0.0
        best = 0.0
        for i, a in enumerate(self.vertex_atoms):
            for b in self.vertex_atoms[i + 1:]:
                best = max(best, abs(float(np.sum(a.data * b.data))))
        return best

    def vertex(self, signs) -> Volume:
        """f0 + sum_i eps_i * atom_i for eps in {0, 1}^(#atoms)."""
        v = self.f0.data.copy()
        for e, a in zip(signs, self.vertex_atoms):
            if e:
                v = v + a.data
        return Volume(v)


def hypercube_fixture(m: int, mode: str = "holder_bump", alpha_or_beta: float = 2.0,
                      A_amp: float = 0.4, n: int = 64, center=(0.5, 0.5, 0.5)) -> HypercubeFixture:
    """Disjointly supported atoms spanning an m^2 (surface) or m^3 (bump) hypercube.

    ``holder_bump`` atoms are m^-beta phi(m x - i) on the cells of an m^3
    partition of the unit cube. ``binary_surface`` atoms are indicator shells
    rho0 < |x - c| <= rho0 + A m^-alpha phi1 phi2 over an m x m partition of
    the sphere in (longitude, (1 - cos theta2) / 2), an equal-area chart, so
    all surface atoms carry comparable mass.
    """
    _check_n(n)
    if m < 2:
        raise PreconditionError("hypercube order m must be at least 2")
    if n < 8 * m:
        raise PreconditionError(f"grid n={n} does not resolve m={m} bumps (need n >= 8m)")
    x = voxel_centers(n)
    s = float(alpha_or_beta)
    atoms = []
    if mode == "holder_bump":
        f0 = Volume(np.zeros((n,) * 3))
        b1 = [bump(m * x - i) for i in range(m)]
        for i1 in range(m):
            for i2 in range(m):
                for i3 in range(m):
                    a = m ** (-s) * b1[i1][:, None, None] * b1[i2][None, :, None] * b1[i3][None, None, :]
                    atoms.append(Volume(a))
    elif mode == "binary_surface":
        base = BASE_RADIUS
        if base + A_amp * m ** (-s) > RHO0:
            raise PreconditionError("surface bumps exceed the radius cap; lower A_amp")
        c = np.asarray(center, dtype=float)
        X, Y, Z = np.meshgrid(x - c[0], x - c[1], x - c[2], indexing="ij")
        r = np.sqrt(X * X + Y * Y + Z * Z)
        t1 = np.mod(np.arctan2(Y, X), 2 * math.pi)
        t2 = np.arccos(np.clip(np.divide(Z, r, out=np.ones_like(r), where=r > 0), -1, 1))
        f0 = Volume((r <= base).astype(float))
        shell = (r > base) & (r <= base + A_amp * m ** (-s))
        idx = np.nonzero(shell.ravel())[0]
        u1 = m * t1.ravel()[idx] / (2 * math.pi)
        u2 = m * (1 - np.cos(t2.ravel()[idx])) / 2
        rr = r.ravel()[idx]
        for i1 in range(m):
            for i2 in range(m):
                h = A_amp * m ** (-s) * bump(u1 - i1) * bump(u2 - i2)
                sel = idx[rr <= base + h]
                a = np.zeros(n ** 3)
                a[sel] = 1.0
                atoms.append(Volume(a.reshape((n,) * 3)))
    else:
        raise PreconditionError(f"unknown hypercube mode {mode!r}")
    norms = np.array([math.sqrt(a.norm2()) for a in atoms])
    nz = norms[norms > 0]
    delta = float(np.exp(np.mean(np.log(nz)))) if len(nz) else 0.0
    return HypercubeFixture(m, mode, atoms, f0, delta, norms)
