"""Greedy N-term approximation, rate fits, sparsity oracles and decay experiments."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .baselines import fourier_errors, wavelet_errors
from .errors import PreconditionError
from .geometry import as_alpha, shear_range, shears
from .phantoms import linear_edge_phantom
from .transform import CoefficientSet, ShearletSystem, Volume, inner

# ---------------------------------------------------------------------------
# oracles


def tau(alpha) -> Fraction | float:
    """Loss exponent 3(2-a)(a-1)(a+2) / (2(9a^2+17a-10)); exact for rational alpha.

    Defined on the closed interval [1, 2]; the endpoints give 0.
    """
    if isinstance(alpha, (int, Fraction, str)):
        a = Fraction(alpha) if not isinstance(alpha, str) else Fraction(alpha.strip())
    else:
        x = float(alpha)
        f = Fraction(x).limit_denominator(10 ** 6)
        a = f if abs(float(f) - x) < 1e-15 else x
    if not 1 <= a <= 2:
        raise PreconditionError(f"tau is defined for alpha in [1, 2], got {alpha!r}")
    num = 3 * (2 - a) * (a - 1) * (a + 2)
    den = 2 * (9 * a * a + 17 * a - 10)
    return num / den


def optimal_rate(alpha, beta, d: int = 3) -> float:
    """Best achievable decay exponent min(alpha / (d-1), 2 beta / d)."""
    a, b = float(alpha), float(beta)
    if not 1 < a <= 2:
        raise PreconditionError("alpha must lie in (1, 2]")
    if b <= 0 or d < 2:
        raise PreconditionError("need beta > 0 and d >= 2")
    return min(a / (d - 1), 2 * b / d)


def count_exponent(alpha) -> float:
    """Target growth exponent of |Lambda(eps)| in eps: -(9a^2+17a-10)/((a+1)(a+2)(3a-1))."""
    a = float(alpha)
    return -(9 * a * a + 17 * a - 10) / ((a + 1) * (a + 2) * (3 * a - 1))


# ---------------------------------------------------------------------------
# coefficient sequences


def _values(c) -> np.ndarray:
    return c.data if isinstance(c, CoefficientSet) else np.asarray(c, dtype=float).ravel()


def rearranged_coefficients(c) -> np.ndarray:
    """Nonincreasing rearrangement of |c|."""
    return np.sort(np.abs(_values(c)))[::-1]


def weak_lp_norm(cstar, p: float) -> tuple[float, int]:
    """max_n n^{1/p} |c*_n| over the finite sequence, with the (1-based) argmax."""
    if p <= 0:
        raise PreconditionError("p must be positive")
    s = np.abs(np.asarray(cstar, dtype=float))
    if s.size == 0:
        return 0.0, 0
    q = np.arange(1, s.size + 1, dtype=float) ** (1.0 / p) * s
    i = int(np.argmax(q))
    return float(q[i]), i + 1


def decay_exponent(cstar, lo: int, hi: int, points: int = 25) -> float:
    """Least-squares slope of log c*_n against log n for n in [lo, hi]."""
    s = np.asarray(cstar)
    hi = min(hi, s.size)
    n = np.unique(np.geomspace(lo, hi, points).astype(int))
    v = s[n - 1]
    ok = v > 0
    if ok.sum() < 2:
        raise PreconditionError("not enough nonzero coefficients in the window")
    return float(np.polyfit(np.log(n[ok]), np.log(v[ok]), 1)[0])


# ---------------------------------------------------------------------------
# greedy selection


def greedy_order(c, N: int) -> np.ndarray:
    """Flat indices of the N largest |c|, ties broken by increasing index.

    Only the candidates above the N-th magnitude are sorted, so this is cheap
    even for very redundant systems.
    """
    v = np.abs(_values(c))
    if N < 0 or N > v.size:
        raise PreconditionError(f"N={N} outside [0, {v.size}]")
    if N == 0:
        return np.zeros(0, dtype=np.int64)
    if N == v.size:
        return np.lexsort((np.arange(v.size), -v))
    t = np.partition(v, v.size - N)[v.size - N]
    above = np.nonzero(v > t)[0]
    ties = np.nonzero(v == t)[0][:N - len(above)]
    cand = np.concatenate([above, ties])
    return cand[np.lexsort((cand, -v[cand]))]


def greedy_nterm(c: CoefficientSet, N: int, tol: float = 1e-8, max_iter: int = 200,
                 order: np.ndarray | None = None):
    """Keep the N largest coefficients and reconstruct with the canonical dual.

    Returns
    -------
    (index array, Volume)
    """
    sel = greedy_order(c, N) if order is None else order[:N]
    sysm = c.system
    if N == 0:
        return sel, Volume(np.zeros((sysm.n,) * 3))
    kept = np.zeros_like(c.data)
    kept[sel] = c.data[sel]
    f = sysm.dual_reconstruct(CoefficientSet(sysm, kept), tol=tol, max_iter=max_iter)
    return sel, Volume(f)


# ---------------------------------------------------------------------------
# error curves and fits


@dataclass
class ErrorCurve:
    Ns: np.ndarray
    err2: np.ndarray
    method: str
    phantom_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Ns = np.asarray(self.Ns, dtype=np.int64)
        self.err2 = np.asarray(self.err2, dtype=float)
        if len(self.Ns) != len(self.err2):
            raise PreconditionError("N and error arrays differ in length")
        if np.any(np.diff(self.Ns) <= 0):
            raise PreconditionError("N must be strictly increasing")

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(int(n), float(e)) for n, e in zip(self.Ns, self.err2)]

    @property
    def monotone_violations(self) -> list[int]:
        """Positions where the error grows by more than 1% over the previous point."""
        e = self.err2
        return [i for i in range(1, len(e)) if e[i] > e[i - 1] * 1.01]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "err2"])
        for n, e in self.points:
            w.writerow([n, repr(e)])
        return buf.getvalue()


@dataclass
class RateFit:
    slope: float
    intercept: float
    window: tuple
    r_squared: float
    n_points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "window": list(self.window),
                "r_squared": self.r_squared, "n_points": self.n_points}


def fit_rate(curve: ErrorCurve, window=None, min_points: int = 5) -> RateFit:
    """Ordinary least squares of log err2 on log N inside ``window`` (inclusive)."""
    N, e = curve.Ns.astype(float), curve.err2
    lo, hi = window if window is not None else (N.min(), N.max())
    sel = (N >= lo) & (N <= hi) & (e > 0)
    if sel.sum() < min_points:
        raise PreconditionError(f"rate fit needs at least {min_points} points in the window")
    x, y = np.log(N[sel]), np.log(e[sel])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / tot) if tot > 0 else 1.0
    return RateFit(float(slope), float(icpt), (float(lo), float(hi)), r2, int(sel.sum()))


def default_Ns(lo: float = 1e2, hi: float = 3e4, count: int = 15) -> list[int]:
    return [int(v) for v in np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))]


def error_curve(f, system: ShearletSystem, Ns, phantom_id: str = "", tol: float = 1e-8,
                coefficients: CoefficientSet | None = None) -> ErrorCurve:
    """Shearlet greedy N-term errors ||f - f_N||^2 on the grid."""
    data = f.data if isinstance(f, Volume) else np.asarray(f, dtype=float)
    Ns = [int(v) for v in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise PreconditionError("Ns must be sorted strictly ascending")
    c = coefficients if coefficients is not None else system.analyze(data)
    order = greedy_order(c, max(Ns)) if Ns else np.zeros(0, dtype=np.int64)
    errs = []
    for N in Ns:
        _, fN = greedy_nterm(c, N, tol=tol, order=order)
        r = data - fN.data
        errs.append(inner(r, r))
    meta = {"system": system.summary(), "phantom": phantom_id}
    return ErrorCurve(np.array(Ns), np.array(errs), "shearlet", phantom_id, meta)


def wavelet_baseline(f, Ns, K: int = 10, levels: int | None = None, phantom_id: str = "") -> ErrorCurve:
    data = f.data if isinstance(f, Volume) else np.asarray(f, dtype=float)
    e = wavelet_errors(data, Ns, K=K, levels=levels)
    return ErrorCurve(np.array(Ns), e, "wavelet", phantom_id, {"K": K, "Lfilt": K, "levels": levels})


def fourier_baseline(f, Ns, phantom_id: str = "") -> ErrorCurve:
    data = f.data if isinstance(f, Volume) else np.asarray(f, dtype=float)
    return ErrorCurve(np.array(Ns), fourier_errors(data, Ns), "fourier", phantom_id, {})


def lemma_bound(c: CoefficientSet, N: int, A: float) -> float:
    """Right-hand side (1/A) sum_{n > N} |c*_n|^2."""
    s = rearranged_coefficients(c)
    return float(np.sum(s[N:] ** 2) / A)


# ---------------------------------------------------------------------------
# significant coefficients


@dataclass
class CountResult:
    eps: np.ndarray
    counts: np.ndarray
    exponent: float
    target: float

    def rows(self) -> list[tuple[float, int]]:
        return [(float(e), int(n)) for e, n in zip(self.eps, self.counts)]


def significant_count(c, eps_list, alpha=2) -> CountResult:
    """|Lambda(eps)| = #{|c| > eps} per eps and the log-log growth exponent."""
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps <= 0):
        raise PreconditionError("thresholds must be positive")
    if np.any(np.diff(eps) >= 0):
        raise PreconditionError("thresholds must be strictly descending")
    s = np.sort(np.abs(_values(c)))
    counts = s.size - np.searchsorted(s, eps, side="right")
    ok = counts > 0
    expo = float("nan")
    if ok.sum() >= 2:
        expo = float(np.polyfit(np.log(eps[ok]), np.log(counts[ok]), 1)[0])
    return CountResult(eps, counts, expo, count_exponent(alpha))


def default_eps(c, decades: float = 2.0, per_decade: int = 4, skip: float = 0.5) -> np.ndarray:
    """Thresholds from 10^-skip to 10^-(skip+decades) times max|c|."""
    top = float(np.abs(_values(c)).max())
    k = np.arange(int(round(decades * per_decade)) + 1)
    return top * 10.0 ** (-skip - k / per_decade)


# ---------------------------------------------------------------------------
# hyperplane decay


@dataclass
class DecayTable:
    j: int
    slope: tuple
    rows: list          # (k1, k2, offset, max |coef|)
    exponent: float
    fit_window: tuple

    def argmax_k(self) -> tuple:
        r = max(self.rows, key=lambda t: t[3])
        return (r[0], r[1])


def _band_max(system: ShearletSystem, c: CoefficientSet, b) -> float:
    if b.empty:
        return 0.0
    return float(np.abs(c.band(b)).max()) * system.continuum_factor(b)


def shear_decay_experiment(s, j: int, n: int = 128, alpha=2, system: ShearletSystem | None = None,
                           gen=None, offset: float = 0.5, lo: float = 2.0) -> DecayTable:
    """Max coefficient per shear for a planar edge with normal (-1, s1, s2).

    Coefficients are reported on the continuum-atom scale (see
    ShearletSystem.continuum_factor). The fit uses the upper envelope over
    shears sharing the same offset max_i |k_i + 2^{j(alpha-1)/2} s_i|,
    restricted to offsets in [lo, K_j].
    """
    s1, s2 = (float(v) for v in s)
    if max(abs(s1), abs(s2)) > 3:
        raise PreconditionError("decay experiment needs |s_i| <= 3")
    a = as_alpha(alpha)
    sysm = system or ShearletSystem(gen=gen, alpha=a, n=n, j_min=j, j_max=j, pairs=(0,), lowpass=False)
    f = linear_edge_phantom((-1.0, s1, s2), offset, sysm.n)
    c = sysm.analyze(f)
    shift = 2.0 ** (j * (float(a) - 1) / 2)
    rows = []
    for b in sysm.bands:
        if b.pair != 0 or b.j != j:
            continue
        off = max(abs(b.k[0] + shift * s1), abs(b.k[1] + shift * s2))
        rows.append((b.k[0], b.k[1], off, _band_max(sysm, c, b)))
    K = shear_range(j, a)
    env: dict = {}
    for k1, k2, off, v in rows:
        key = round(off, 9)
        if lo <= off <= K + 1e-9 and v > 0:
            env[key] = max(env.get(key, 0.0), v)
    if len(env) < 2:
        raise PreconditionError("too few shear offsets at this scale for a decay fit")
    x = np.log(np.array(sorted(env)))
    y = np.log(np.array([env[k] for k in sorted(env)]))
    expo = float(np.polyfit(x, y, 1)[0])
    return DecayTable(j, (s1, s2), rows, expo, (lo, float(K)))


def scale_decay_experiment(js=(3, 4, 5), n: int = 128, alpha=2, s=(0.0, 0.0), gen=None,
                           offset: float = 0.5) -> dict:
    """Largest aligned-shear coefficient per scale and the fitted exponent in 2^{-j}."""
    a = as_alpha(alpha)
    s1, s2 = (float(v) for v in s)
    vals = []
    for j in js:
        sysm = ShearletSystem(gen=gen, alpha=a, n=n, j_min=j, j_max=j, pairs=(0,), lowpass=False)
        f = linear_edge_phantom((-1.0, s1, s2), offset, n)
        c = sysm.analyze(f)
        shift = 2.0 ** (j * (float(a) - 1) / 2)
        k0 = (int(round(-shift * s1)), int(round(-shift * s2)))
        b = next(b for b in sysm.bands if b.k == k0)
        vals.append(_band_max(sysm, c, b))
    if min(vals) <= 0:
        raise PreconditionError("aligned band is empty at some scale; grid too coarse for these scales")
    expo = float(np.polyfit(np.array(js, dtype=float), np.log2(vals), 1)[0])
    return {"j": list(js), "max_coef": vals, "exponent": expo, "target": -(float(a) / 4 + 0.5)}
