"""Orthogonal wavelet and Fourier baselines for N-term approximation.

The wavelet filter is the minimum-phase spectral factor of the same
maximally flat |m0|^2 family used by the shearlet generator, taken at
K = Lfilt so that it is a true conjugate-mirror filter.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import PreconditionError
from .generators import binomial_weights


@lru_cache(maxsize=None)
def daubechies_lowpass(K: int = 10, Lfilt: int | None = None) -> np.ndarray:
    """Length-2K orthonormal low-pass filter h with sum(h) = sqrt(2).

    |m0|^2 = cos^{2K} * P(sin^2) with P the binomial sum; the roots of P in
    y = (2 - z - 1/z) / 4 are mapped to z and the ones inside the unit disc
    are kept.
    """
    L = K if Lfilt is None else Lfilt
    if K < 1 or L < 1:
        raise PreconditionError("filter orders must be positive")
    if L > K:
        raise PreconditionError("spectral factorisation needs Lfilt <= K for a conjugate-mirror pair")
    w = binomial_weights(K, L)
    poly = np.array(w[::-1], dtype=float)           # highest power first
    zs = []
    for y in (np.roots(poly) if L > 1 else []):
        # z^2 - (2 - 4y) z + 1 = 0
        r = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zs.append(r[np.argmin(np.abs(r))])
    m0 = np.array([1.0])
    for _ in range(K):
        m0 = np.convolve(m0, [0.5, 0.5])
    for z in zs:
        m0 = np.convolve(m0, np.array([1.0, -z]) / (1.0 - z))
    h = math.sqrt(2.0) * np.real(m0)
    return h


def highpass_from(h: np.ndarray) -> np.ndarray:
    n = np.arange(len(h))
    return ((-1.0) ** n) * h[::-1]


@lru_cache(maxsize=None)
def _analysis_matrix(N: int, K: int) -> np.ndarray:
    """Orthogonal one-level periodic DWT matrix: N/2 low-pass rows then N/2 high-pass rows."""
    if N < 2 or N % 2:
        raise PreconditionError("periodic DWT needs an even length")
    h = daubechies_lowpass(K)
    g = highpass_from(h)
    W = np.zeros((N, N))
    for k in range(N // 2):
        for t in range(len(h)):
            W[k, (2 * k + t) % N] += h[t]
            W[N // 2 + k, (2 * k + t) % N] += g[t]
    return W


def _apply_axes(x: np.ndarray, W: np.ndarray) -> np.ndarray:
    for ax in range(3):
        x = np.moveaxis(np.tensordot(W, x, axes=([1], [ax])), 0, ax)
    return x


def default_levels(n: int) -> int:
    return max(1, int(math.log2(n)) - 2)


def dwt3(f: np.ndarray, levels: int | None = None, K: int = 10) -> np.ndarray:
    """Separable periodic orthogonal wavelet transform, Mallat layout (same shape as f)."""
    x = np.array(f, dtype=float)
    n = x.shape[0]
    J = default_levels(n) if levels is None else levels
    if n >> J < 1:
        raise PreconditionError("too many levels for this grid")
    size = n
    for _ in range(J):
        x[:size, :size, :size] = _apply_axes(x[:size, :size, :size], _analysis_matrix(size, K))
        size //= 2
    return x


def idwt3(w: np.ndarray, levels: int | None = None, K: int = 10) -> np.ndarray:
    x = np.array(w, dtype=float)
    n = x.shape[0]
    J = default_levels(n) if levels is None else levels
    size = n >> (J - 1)
    for _ in range(J):
        x[:size, :size, :size] = _apply_axes(x[:size, :size, :size], _analysis_matrix(size, K).T)
        size *= 2
    return x


def _tail_errors(mag2: np.ndarray, Ns, scale: float) -> np.ndarray:
    """Sum of all but the N largest entries (stable order), divided by ``scale``."""
    s = np.sort(mag2.ravel())[::-1]
    tail = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
    Ns = np.asarray(Ns, dtype=int)
    if np.any(Ns < 0) or np.any(Ns > s.size):
        raise PreconditionError("N outside [0, coefficient count]")
    return tail[Ns] / scale


def wavelet_errors(f: np.ndarray, Ns, K: int = 10, levels: int | None = None) -> np.ndarray:
    """Grid L2 errors of keep-the-N-largest orthogonal wavelet approximation."""
    w = dwt3(f, levels, K)
    return _tail_errors(w ** 2, Ns, f.size)


def fourier_errors(f: np.ndarray, Ns) -> np.ndarray:
    """Grid L2 errors of keep-the-N-largest DFT coefficient approximation."""
    F = np.fft.fftn(f)
    return _tail_errors(np.abs(F) ** 2, Ns, float(f.size) ** 2)


def wavelet_nterm(f: np.ndarray, N: int, K: int = 10, levels: int | None = None) -> np.ndarray:
    """Explicit N-term wavelet reconstruction (ties broken by flat index)."""
    w = dwt3(f, levels, K).ravel()
    keep = np.zeros_like(w)
    order = np.argsort(-np.abs(w), kind="stable")[:N]
    keep[order] = w[order]
    return idwt3(keep.reshape(f.shape), levels, K)


def fourier_nterm(f: np.ndarray, N: int) -> np.ndarray:
    F = np.fft.fftn(f).ravel()
    keep = np.zeros_like(F)
    order = np.argsort(-np.abs(F), kind="stable")[:N]
    keep[order] = F[order]
    return np.fft.ifftn(keep.reshape(f.shape)).real
