"""FFT-based analysis and synthesis for the full pyramid-adapted system.

Each band (pair, j, k) is sampled analytically at the integer frequencies of
the n^3 torus,

    v(xi) = psi_hat(S^T_{-k} A_{2^-j} xi)       (for pair P),

kept where it exceeds a support threshold, and periodised onto a power-of-two
coefficient sub-grid chosen so that the periodisation is injective on the
band support. Coefficients are

    c_b = sqrt(N_b / det M) n^-3 * ifftn(fold(f_hat * v)),

which reproduces the energy of the continuum lattice (density
2^{j(alpha+2)/2} / det M_c) on any alias-free sub-grid. Because no band
aliases, the frame operator is the Fourier multiplier sum_b v_b^2 / det M,
and synthesis is the exact adjoint of analysis with respect to the grid L2
inner product <f, g> = n^-3 sum f g.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .generators import GeneratorModel, filter_generator
from .geometry import (Anisotropy, LatticeConstants, ShearletIndex, axis_scales, pair_axes,
                       shear_range, shears)

VALID_N = (16, 32, 64, 128, 256)


@dataclass(frozen=True)
class Volume:
    """Real scalar field on an n^3 grid over [0, 1)^3 (voxel spacing 1/n)."""
    data: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 3 or len(set(d.shape)) != 1:
            raise PreconditionError("volume must be a cube")
        if d.shape[0] not in VALID_N:
            raise PreconditionError(f"grid size must be one of {VALID_N}")
        if not np.all(np.isfinite(d)):
            raise PreconditionError("volume contains non-finite values")
        object.__setattr__(self, "data", d)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def norm2(self) -> float:
        """Squared grid L2 norm (mean square times unit volume)."""
        return float(np.mean(self.data ** 2))

    def inner(self, other: "Volume") -> float:
        return float(np.mean(self.data * other.data))


def inner(f: np.ndarray, g: np.ndarray) -> float:
    return float(np.mean(np.asarray(f) * np.asarray(g)))


# ---------------------------------------------------------------------------
# bands


@dataclass
class Band:
    pair: int              # -1 for the low-pass band
    j: int
    k: tuple[int, int]
    shape: tuple[int, int, int]
    idx: np.ndarray        # flat indices into the n^3 FFT array
    val: np.ndarray        # band response at those frequencies
    res: np.ndarray        # flat indices into the coefficient sub-grid
    det: float
    offset: int = 0

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if len(self.idx) else 0

    @property
    def empty(self) -> bool:
        return len(self.idx) == 0


def _pow2_upto(n: int) -> list[int]:
    out, m = [], 1
    while m <= n:
        out.append(m)
        m *= 2
    return out


def _candidate_shapes(n: int):
    sizes = _pow2_upto(n)
    shapes = list(product(sizes, sizes, sizes))
    # smallest product first; ties prefer balanced shapes, then lexicographic
    shapes.sort(key=lambda s: (s[0] * s[1] * s[2], max(s) / min(s), s))
    return shapes


_SHAPES: dict[int, list] = {}


def alias_free_shape(phys: np.ndarray, n: int) -> tuple[int, int, int]:
    """Smallest power-of-two sub-grid on which folding is injective.

    ``phys`` holds the (npts, 3) FFT indices of the band support.
    """
    npts = len(phys)
    if npts == 0:
        return (0, 0, 0)
    if n not in _SHAPES:
        _SHAPES[n] = _candidate_shapes(n)

    def ok(s):
        N0, N1, N2 = s
        r = ((phys[:, 0] % N0) * N1 + phys[:, 1] % N1) * N2 + phys[:, 2] % N2
        return np.bincount(r, minlength=N0 * N1 * N2).max() <= 1

    for s in _SHAPES[n]:
        if s[0] * s[1] * s[2] < npts:
            continue
        if ok(s):
            return s
    raise AssertionError("the full grid is always alias free")


def nyquist_average(block: np.ndarray, axes_idx: list[np.ndarray], n: int):
    """Average squared band values over the two representatives of the Nyquist frequency.

    ``axes_idx`` gives, per block axis, the extended-axis positions (0..n,
    i.e. frequencies -n/2..n/2). Returns the folded block and the surviving
    positions; position n (frequency +n/2) is merged into position 0.
    """
    sq = block ** 2
    out_idx = []
    for ax, pos in enumerate(axes_idx):
        has_lo = np.nonzero(pos == 0)[0]
        has_hi = np.nonzero(pos == n)[0]
        if len(has_hi):
            hi = int(has_hi[0])
            if len(has_lo):
                lo = int(has_lo[0])
                sl_lo = [slice(None)] * 3
                sl_hi = [slice(None)] * 3
                sl_lo[ax] = lo
                sl_hi[ax] = hi
                sq[tuple(sl_lo)] = 0.5 * (sq[tuple(sl_lo)] + sq[tuple(sl_hi)])
                keep = np.ones(len(pos), bool)
                keep[hi] = False
                sq = np.compress(keep, sq, axis=ax)
                pos = pos[keep]
            else:  # pragma: no cover - the caller always adds both ends
                raise AssertionError("Nyquist pair incomplete")
        out_idx.append(pos)
    return np.sqrt(sq), out_idx


def _with_both_ends(sel: np.ndarray, n: int) -> np.ndarray:
    s = set(int(v) for v in sel)
    if 0 in s or n in s:
        s |= {0, n}
    return np.array(sorted(s), dtype=np.int64)


class ShearletSystem:
    """Digital pyramid-adapted system SH(phi, psi, psi~, psi^; c, alpha) on an n^3 grid.

    Parameters
    ----------
    gen : GeneratorModel
        Separable generator; the filter-based one is the default.
    alpha : anisotropy exponent in (1, 2]
    c : LatticeConstants
        Translation constants; only the densities 1/det M_c enter the
        digital coefficients.
    n : grid size
    j_min, j_max : scale range; ``j_max=None`` picks the last scale whose
        band meets the grid.
    thr : support threshold on |band|.
    """

    def __init__(self, gen: GeneratorModel | None = None, alpha=2, c: LatticeConstants | None = None,
                 n: int = 32, j_min: int = 0, j_max: int | None = None, thr: float = 1e-3,
                 pairs=(0, 1, 2), lowpass: bool = True, threads: int = 1):
        if n not in VALID_N:
            raise PreconditionError(f"grid size must be one of {VALID_N}")
        self.gen = gen or filter_generator()
        self.anis = alpha if isinstance(alpha, Anisotropy) else Anisotropy(alpha)
        self.alpha = self.anis.value
        self.c = c or LatticeConstants(0.25, 0.125)
        self.n = n
        self.thr = float(thr)
        self.threads = max(1, int(threads))
        self.j_min = int(j_min)
        self.j_max = self.auto_j_max() if j_max is None else int(j_max)
        if self.j_min > self.j_max:
            raise PreconditionError("empty scale range: j_min > j_max")
        self.pairs = tuple(pairs)
        self.x_ext = np.arange(-n // 2, n // 2 + 1, dtype=float)
        self.bands: list[Band] = []
        t0 = time.perf_counter()
        if lowpass:
            self.bands.append(self._lowpass_band())
        for pair in self.pairs:
            for j in range(self.j_min, self.j_max + 1):
                self.bands.extend(self._scale_bands(pair, j))
        off = 0
        for b in self.bands:
            b.offset = off
            off += b.size
        self.total = off
        self.build_seconds = time.perf_counter() - t0
        self._diag = None

    # -- construction -----------------------------------------------------

    def auto_j_max(self) -> int:
        """Largest j whose pyramid-axis factor exceeds thr somewhere on the grid."""
        xs = np.arange(1, self.n // 2 + 1, dtype=float)
        j, last = 0, 0
        while j < 64:
            a1, _ = axis_scales(j, self.alpha)
            if np.abs(self.gen.eta_hat(xs / a1)).max() > self.thr:
                last = j
            elif j > last and (self.n / 2) / a1 < 0.01:
                break
            j += 1
        return last

    def _lowpass_band(self) -> Band:
        n = self.n
        x = self.x_ext
        p = np.abs(self.gen.phi_hat_1d(x))
        sel = _with_both_ends(np.nonzero(p > self.thr)[0], n)
        block = p[sel][:, None, None] * p[sel][None, :, None] * p[sel][None, None, :]
        v, pos = nyquist_average(block, [sel, sel, sel], n)
        return self._finish(-1, 0, (0, 0), v, pos, (0, 1, 2), self.c.c1 ** 3)

    def _scale_bands(self, pair: int, j: int) -> list[Band]:
        n = self.n
        x = self.x_ext
        a1, a2 = axis_scales(j, self.alpha)
        e = np.abs(self.gen.eta_hat(x / a1))
        rows = _with_both_ends(np.nonzero(e > self.thr)[0], n)
        axes = pair_axes(pair)
        det = self.c.det
        out = []
        if len(rows) == 0 or e.max() <= self.thr:
            for k in shears(j, self.anis.alpha):
                out.append(self._empty(pair, j, k, det))
            return out
        K = shear_range(j, self.anis.alpha)
        xr = x[rows]
        G = {}
        for k in range(-K, K + 1):
            y = x[None, :] / a2 - k * (xr[:, None] / a1)
            G[k] = np.abs(self.gen.cross_hat(y))
        er = e[rows]
        gmax = {k: G[k].max(axis=1) for k in G}
        for k in shears(j, self.anis.alpha):
            k1, k2 = k
            c2 = np.nonzero((er[:, None] * G[k1] * gmax[k2][:, None]).max(axis=0) > self.thr)[0]
            c3 = np.nonzero((er[:, None] * G[k2] * gmax[k1][:, None]).max(axis=0) > self.thr)[0]
            if len(c2) == 0 or len(c3) == 0:
                out.append(self._empty(pair, j, k, det))
                continue
            c2 = _with_both_ends(c2, n)
            c3 = _with_both_ends(c3, n)
            block = er[:, None, None] * G[k1][:, c2][:, :, None] * G[k2][:, c3][:, None, :]
            v, pos = nyquist_average(block, [rows, c2, c3], n)
            out.append(self._finish(pair, j, k, v, pos, axes, det))
        return out

    def _empty(self, pair, j, k, det) -> Band:
        z = np.zeros(0, dtype=np.int64)
        return Band(pair, j, k, (0, 0, 0), z, np.zeros(0), z, det)

    def _finish(self, pair, j, k, v, pos, axes, det) -> Band:
        n = self.n
        keep = v > self.thr
        loc = np.nonzero(keep)
        if len(loc[0]) == 0:
            return self._empty(pair, j, k, det)
        vals = v[keep]
        phys = np.zeros((len(vals), 3), dtype=np.int64)
        for bax in range(3):
            # extended position p corresponds to frequency p - n/2, FFT index (p - n/2) mod n
            phys[:, axes[bax]] = (pos[bax][loc[bax]] - n // 2) % n
        shape = alias_free_shape(phys, n)
        flat = (phys[:, 0] * n + phys[:, 1]) * n + phys[:, 2]
        res = ((phys[:, 0] % shape[0]) * shape[1] + phys[:, 1] % shape[1]) * shape[2] + phys[:, 2] % shape[2]
        order = np.argsort(flat, kind="stable")
        return Band(pair, j, k, shape, flat[order], vals[order], res[order], det)

    # -- bookkeeping -------------------------------------------------------

    def band_groups(self) -> list[list[int]]:
        """Fixed partition of band numbers by (pair, j), used for deterministic reductions."""
        groups: dict[tuple, list[int]] = {}
        for i, b in enumerate(self.bands):
            groups.setdefault((b.pair, b.j), []).append(i)
        return [groups[key] for key in sorted(groups)]

    def lattice_shape(self, pair: int, j: int, k) -> tuple:
        for b in self.bands:
            if b.pair == pair and b.j == j and b.k == tuple(k):
                return b.shape
        raise KeyError((pair, j, k))

    def index_of(self, flat: int) -> ShearletIndex:
        """Decode a flat coefficient position into (pair, j, k, m)."""
        offs = np.array([b.offset for b in self.bands])
        i = int(np.searchsorted(offs, flat, side="right") - 1)
        while self.bands[i].size == 0 or flat >= self.bands[i].offset + self.bands[i].size:
            i += 1
        b = self.bands[i]
        m = np.unravel_index(flat - b.offset, b.shape)
        return ShearletIndex(b.pair, b.j, b.k, tuple(int(v) for v in m))

    def band_slice(self, b: Band) -> slice:
        return slice(b.offset, b.offset + b.size)

    def summary(self) -> dict:
        per = {}
        for b in self.bands:
            key = f"{b.pair}:{b.j}"
            per[key] = per.get(key, 0) + b.size
        return {"n": self.n, "alpha": str(self.anis.alpha), "c": [self.c.c1, self.c.c2],
                "j_min": self.j_min, "j_max": self.j_max, "thr": self.thr,
                "bands": len(self.bands), "coefficients": self.total,
                "redundancy": self.total / self.n ** 3, "per_pair_scale": per}

    # -- operators ---------------------------------------------------------

    def _scale(self, b: Band) -> float:
        return math.sqrt(b.size / b.det) / self.n ** 3

    def analyze(self, f) -> "CoefficientSet":
        data = f.data if isinstance(f, Volume) else np.asarray(f, dtype=float)
        if data.shape != (self.n,) * 3:
            raise PreconditionError(f"volume shape {data.shape} does not match grid {self.n}")
        F = np.fft.fftn(data).ravel()
        out = np.zeros(self.total)

        def work(group):
            for i in group:
                b = self.bands[i]
                if b.empty:
                    continue
                X = np.zeros(b.size, dtype=complex)
                X[b.res] = F[b.idx] * b.val
                out[b.offset:b.offset + b.size] = self._scale(b) * np.fft.ifftn(X.reshape(b.shape)).real.ravel()

        self._run(work)
        return CoefficientSet(self, out)

    def synthesize(self, c) -> np.ndarray:
        """Adjoint of analyze: returns the real n^3 array sum_lambda c_lambda psi_lambda."""
        coef = c.data if isinstance(c, CoefficientSet) else np.asarray(c, dtype=float)
        if coef.shape != (self.total,):
            raise PreconditionError("coefficient vector does not match the system")
        groups = self.band_groups()
        partial = [None] * len(groups)

        def work_group(gi):
            Y = np.zeros(self.n ** 3, dtype=complex)
            touched = False
            for i in groups[gi]:
                b = self.bands[i]
                if b.empty:
                    continue
                cb = coef[b.offset:b.offset + b.size]
                if not cb.any():
                    continue
                C = np.fft.fftn(cb.reshape(b.shape)).ravel()
                w = self._scale(b) * self.n ** 6 / b.size
                Y[b.idx] += w * b.val * C[b.res]
                touched = True
            partial[gi] = Y if touched else None

        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                list(ex.map(work_group, range(len(groups))))
        else:
            for gi in range(len(groups)):
                work_group(gi)
        Y = np.zeros(self.n ** 3, dtype=complex)
        for p in partial:  # fixed reduction order
            if p is not None:
                Y += p
        return np.fft.ifftn(Y.reshape((self.n,) * 3)).real

    def _run(self, work):
        groups = self.band_groups()
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                list(ex.map(work, groups))
        else:
            for g in groups:
                work(g)

    def frame_operator_apply(self, f) -> np.ndarray:
        return self.synthesize(self.analyze(f))

    def frame_diagonal(self, bands=None) -> np.ndarray:
        """Fourier multiplier of the frame operator, sum_b v_b^2 / det_b."""
        if bands is None and self._diag is not None:
            return self._diag
        d = np.zeros(self.n ** 3)
        for b in (self.bands if bands is None else bands):
            if not b.empty:
                d[b.idx] += b.val ** 2 / b.det
        d = d.reshape((self.n,) * 3)
        if bands is None:
            self._diag = d
        return d

    def dual_reconstruct(self, c, tol: float = 1e-6, max_iter: int = 200, precondition: bool = True,
                         return_info: bool = False):
        """Solve S x = synthesize(c) by preconditioned conjugate gradients."""
        rhs = self.synthesize(c)
        x, info = pcg(self.frame_operator_apply, rhs, self.preconditioner() if precondition else None,
                      tol=tol, max_iter=max_iter)
        return (x, info) if return_info else x

    def preconditioner(self):
        d = self.frame_diagonal()
        pos = d[d > 0]
        floor = 0.5 * pos.min() if len(pos) else 1.0
        dd = np.maximum(d, floor)

        def apply(r):
            return np.fft.ifftn(np.fft.fftn(r) / dd).real
        return apply

    def apply_inverse_exact(self, g: np.ndarray) -> np.ndarray:
        """S^{-1} g through the Fourier multiplier (valid because no band aliases)."""
        d = self.frame_diagonal()
        if np.any(d <= 0):
            raise PreconditionError("frame operator is singular on this grid")
        return np.fft.ifftn(np.fft.fftn(g) / d).real

    def continuum_factor(self, b: Band) -> float:
        """Factor turning a digital coefficient of band b into the continuum-lattice scale.

        A digital coefficient stands for rho_b = 2^{j(alpha+2)/2} / (det M_c N_b)
        continuum coefficients of comparable size; multiplying by rho_b^{-1/2}
        gives the magnitude of a single L2-normalised continuum atom.
        """
        if b.empty:
            return 0.0
        dil = 1.0 if b.pair < 0 else 2.0 ** (b.j * (self.alpha + 2) / 2)
        return math.sqrt(b.size * b.det / dil)

    def band_energy(self, f, band: Band) -> float:
        """sum over m of |<f, psi_{j,k,m}>|^2 for one band."""
        coef = self.analyze(f)
        return float(np.sum(coef.data[self.band_slice(band)] ** 2))


@dataclass
class CGInfo:
    iterations: int
    residuals: list
    converged: bool


def pcg(apply_A, b: np.ndarray, precond=None, tol: float = 1e-6, max_iter: int = 200, x0=None):
    """Preconditioned conjugate gradients for the grid-L2 self-adjoint operator ``apply_A``.

    Stops when ||A x - b|| / ||b|| <= tol. Raises ConvergenceError carrying the
    residual history if max_iter is reached first.
    """
    bn = math.sqrt(inner(b, b))
    if bn == 0.0:
        return np.zeros_like(b), CGInfo(0, [0.0], True)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_A(x) if x0 is not None else b.copy()
    z = precond(r) if precond else r
    p = z.copy()
    rz = inner(r, z)
    hist = [math.sqrt(inner(r, r)) / bn]
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        a = rz / inner(p, Ap)
        x += a * p
        r -= a * Ap
        rel = math.sqrt(inner(r, r)) / bn
        hist.append(rel)
        if rel <= tol:
            return x, CGInfo(it, hist, True)
        z = precond(r) if precond else r
        rz_new = inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach tol {tol} in {max_iter} iterations", hist)


class CoefficientSet:
    """All coefficients of one analysis, stored flat in canonical index order."""

    def __init__(self, system: ShearletSystem, data: np.ndarray):
        self.system = system
        self.data = np.asarray(data, dtype=float)

    def __len__(self):
        return len(self.data)

    def band(self, b: Band) -> np.ndarray:
        return self.data[self.system.band_slice(b)].reshape(b.shape)

    def lowpass(self) -> np.ndarray | None:
        b = self.system.bands[0]
        return self.band(b) if b.pair == -1 else None

    def norm2(self) -> float:
        return float(np.dot(self.data, self.data))

    def __add__(self, other):
        return CoefficientSet(self.system, self.data + other.data)

    def __mul__(self, s):
        return CoefficientSet(self.system, self.data * s)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# frame bound estimation


@dataclass
class FrameBoundsEstimate:
    A: float
    B: float
    iterations_B: int
    iterations_A: int
    converged: bool


def _random_start(n, rng, mask=None):
    x = rng.standard_normal((n, n, n))
    if mask is not None:
        x = np.fft.ifftn(np.fft.fftn(x) * mask).real
    return x / math.sqrt(inner(x, x))


def empirical_frame_bounds(apply_S, n: int, iters: int = 500, rtol: float = 1e-4, seed: int = 0,
                           mask=None, precond=None, cg_tol: float = 1e-10) -> FrameBoundsEstimate:
    """Extreme spectrum of a frame operator by power and inverse power iteration.

    ``mask`` (a Fourier-domain 0/1 array) restricts the operator to a subspace
    such as the functions with frequencies in one pyramid pair. The inverse
    iteration solves S y = x with conjugate gradients.
    """
    rng = np.random.default_rng(seed)
    proj = (lambda x: x) if mask is None else (lambda x: np.fft.ifftn(np.fft.fftn(x) * mask).real)  # noqa: E731
    S = lambda x: proj(apply_S(proj(x)))  # noqa: E731

    x = _random_start(n, rng, mask)
    lam_B, itB, convB = 0.0, 0, False
    for itB in range(1, iters + 1):
        y = S(x)
        lam = inner(x, y)
        ny = math.sqrt(inner(y, y))
        if ny == 0:
            lam_B, convB = 0.0, True
            break
        x = y / ny
        if itB > 1 and abs(lam - lam_B) <= rtol * abs(lam):
            lam_B, convB = lam, True
            break
        lam_B = lam

    x = _random_start(n, rng, mask)
    mu_A, itA, convA = 0.0, 0, False
    if lam_B > 0:
        for itA in range(1, iters + 1):
            y, _ = pcg(S, x, (lambda r: proj(precond(r))) if precond else None, tol=cg_tol, max_iter=500)
            ny = math.sqrt(inner(y, y))
            mu = inner(x, y)  # Rayleigh quotient of S^-1
            x = y / ny
            if itA > 1 and abs(mu - mu_A) <= rtol * abs(mu):
                mu_A, convA = mu, True
                break
            mu_A = mu
    A = 1.0 / mu_A if mu_A > 0 else 0.0
    return FrameBoundsEstimate(A, lam_B, itB, itA, convB and convA)


def pyramid_mask(n: int, pair: int) -> np.ndarray:
    """0/1 Fourier mask of the digital pyramid pair (ties to the lowest pyramid)."""
    from .geometry import classify_grid
    f = np.fft.fftfreq(n, 1.0 / n)
    X = np.stack(np.meshgrid(f, f, f, indexing="ij"), axis=-1)
    cls = classify_grid(X)
    m = (cls == pair + 1) | (cls == pair + 4)
    # tie points can land in different pairs for xi and -xi; keep only the
    # symmetric part so that masking stays a real orthogonal projection
    neg = (-np.arange(n)) % n
    m &= m[np.ix_(neg, neg, neg)]
    return m.astype(float)
