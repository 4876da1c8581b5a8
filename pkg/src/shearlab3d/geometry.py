"""Matrices, frequency pyramids, shear ranges and index enumeration.

The three pyramid pairs are labelled by the axis along which the
anisotropic scaling acts: pair 0 (``P``, axis x1), pair 1 (``P~``, axis x2)
and pair 2 (``P^``, axis x3).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

PAIRS = (0, 1, 2)
PAIR_NAMES = ("P", "P~", "P^")


class PyramidId(enum.IntEnum):
    P1 = 1
    P2 = 2
    P3 = 3
    P4 = 4
    P5 = 5
    P6 = 6
    CenterCube = 7

    @property
    def pair(self) -> int | None:
        """Pair index (0, 1, 2) or None for the center cube."""
        if self is PyramidId.CenterCube:
            return None
        return (int(self) - 1) % 3


def as_alpha(alpha) -> Fraction | float:
    """Normalise an anisotropy exponent.

    Strings such as ``"3/2"``, ints and Fractions stay exact; floats are
    converted to an exact Fraction only when they are short decimals.
    """
    if isinstance(alpha, Fraction):
        a = alpha
    elif isinstance(alpha, int):
        a = Fraction(alpha)
    elif isinstance(alpha, str):
        a = Fraction(alpha.strip())
    else:
        x = float(alpha)
        a = Fraction(x).limit_denominator(10**6)
        if abs(float(a) - x) > 1e-15:
            a = x
    if not 1 < float(a) <= 2:
        raise ValueError(f"anisotropy alpha must lie in (1, 2], got {alpha!r}")
    return a


@dataclass(frozen=True)
class Anisotropy:
    alpha: Fraction | float

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_alpha(self.alpha))

    @property
    def value(self) -> float:
        return float(self.alpha)

    @property
    def is_rational(self) -> bool:
        return isinstance(self.alpha, Fraction)


@dataclass(frozen=True)
class LatticeConstants:
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("lattice constants must be positive")
        if self.c2 > self.c1:
            raise ValueError("lattice constants require c2 <= c1")

    @property
    def det(self) -> float:
        return self.c1 * self.c2 * self.c2


@dataclass(frozen=True, order=True)
class ShearletIndex:
    pair: int
    j: int
    k: tuple[int, int]
    m: tuple[int, int, int]


def _alpha_value(alpha) -> float:
    if isinstance(alpha, Anisotropy):
        return alpha.value
    return float(alpha)


def _alpha_exact(alpha):
    if isinstance(alpha, Anisotropy):
        return alpha.alpha
    return as_alpha(alpha)


def axis_scales(j: int, alpha) -> tuple[float, float]:
    """Return (2^{j alpha/2}, 2^{j/2}) for the pyramid axis and the cross axes."""
    a = _alpha_value(alpha)
    return 2.0 ** (j * a / 2.0), 2.0 ** (j / 2.0)


def scaling_matrix(j: int, alpha, pair: int = 0) -> np.ndarray:
    """Anisotropic dilation for pyramid pair ``pair`` at scale ``j``.

    Examples
    --------
    >>> scaling_matrix(2, 2, 0).diagonal()
    array([4., 2., 2.])
    """
    if j < 0:
        raise ValueError("scale j must be nonnegative")
    a1, a2 = axis_scales(j, alpha)
    d = np.full(3, a2)
    d[pair] = a1
    return np.diag(d)


def shear_matrix(k: Sequence[int], pair: int = 0) -> np.ndarray:
    """Unimodular shear; the pair's row carries (k1, k2) off the diagonal."""
    k1, k2 = k
    s = np.eye(3)
    others = [a for a in range(3) if a != pair]
    s[pair, others[0]] = k1
    s[pair, others[1]] = k2
    return s


def lattice_matrix(c: LatticeConstants, pair: int = 0) -> np.ndarray:
    d = np.full(3, c.c2)
    d[pair] = c.c1
    return np.diag(d)


def pair_axes(pair: int) -> tuple[int, int, int]:
    """(pyramid axis, first cross axis, second cross axis)."""
    others = [a for a in range(3) if a != pair]
    return (pair, others[0], others[1])


def classify_frequency(xi: Sequence[float]) -> PyramidId:
    """Pyramid containing ``xi``; ties go to the lowest-numbered pyramid."""
    x = [float(v) for v in xi]
    if max(abs(v) for v in x) < 1:
        return PyramidId.CenterCube
    for p in range(6):
        axis = p % 3
        lead = x[axis] if p < 3 else -x[axis]
        if lead < 1:
            continue
        if all(abs(x[b]) <= lead for b in range(3) if b != axis):
            return PyramidId(p + 1)
    raise AssertionError("unreachable: max-norm >= 1 implies some pyramid")


def classify_grid(xi: np.ndarray) -> np.ndarray:
    """Vectorised classify_frequency over an (..., 3) array; returns ints 1..7."""
    xi = np.asarray(xi, dtype=float)
    out = np.full(xi.shape[:-1], 7, dtype=np.int8)
    done = np.max(np.abs(xi), axis=-1) < 1
    for p in range(6):
        axis = p % 3
        lead = xi[..., axis] if p < 3 else -xi[..., axis]
        ok = lead >= 1
        for b in range(3):
            if b != axis:
                ok &= np.abs(xi[..., b]) <= lead
        sel = ok & ~done
        out[sel] = p + 1
        done |= sel
    return out


def shear_range(j: int, alpha) -> int:
    """K_j = ceil(2^{j(alpha-1)/2}), evaluated exactly for rational alpha."""
    if j < 0:
        raise ValueError("scale j must be nonnegative")
    a = _alpha_exact(alpha)
    if isinstance(a, Fraction):
        e = Fraction(j) * (a - 1) / 2
        if e.denominator == 1:
            return 2 ** int(e)
        return math.ceil(2.0 ** float(e))
    return math.ceil(2.0 ** (j * (a - 1) / 2))


def shears(j: int, alpha) -> list[tuple[int, int]]:
    """All (k1, k2) with max(|k1|, |k2|) <= K_j in lexicographic order."""
    K = shear_range(j, alpha)
    return [(k1, k2) for k1 in range(-K, K + 1) for k2 in range(-K, K + 1)]


def enumerate_indices(j_min: int, j_max: int, alpha, lattice: LatticeConstants | None = None,
                      grid_n: int | None = None, lattice_shape=None) -> list[ShearletIndex]:
    """Ordered index list: pair, then j, then k, then m (lexicographic).

    ``lattice_shape(pair, j, k)`` returns the per-band sub-grid shape; when it
    is omitted a single lattice cell per band is used, which is enough for
    counting shear cells.
    """
    return list(iter_indices(j_min, j_max, alpha, lattice_shape))


def iter_indices(j_min, j_max, alpha, lattice_shape=None) -> Iterator[ShearletIndex]:
    if j_min > j_max:
        return
    for pair in PAIRS:
        for j in range(j_min, j_max + 1):
            for k in shears(j, alpha):
                shape = (1, 1, 1) if lattice_shape is None else tuple(lattice_shape(pair, j, k))
                for m in np.ndindex(*shape):
                    yield ShearletIndex(pair, j, k, tuple(int(v) for v in m))


def count_shear_cells(j_min: int, j_max: int, alpha) -> int:
    return sum(len(shears(j, alpha)) for j in range(j_min, j_max + 1)) * 3 if j_min <= j_max else 0
