"""Binned value space shared by every chain variable.

Bins are value points ``c_j = lo + j*b``; each one stands for the closed
subcube ``[c_j - b/2, c_j + b/2]`` around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Quotients this close to a half-integer are treated as exact ties, so that
# half-up rounding behaves as it would on the exact decimal bin values.
TIE_TOL = 1e-9

_MULTIPLE_TOL = 1e-9

# centers are snapped to this many decimals so that lo + j*b lands on the
# intended decimal value (0.15, not 0.15000000000000002; 0, not 2e-16)
_CENTER_DECIMALS = 12


def round_half_up(x):
    """Round to the nearest integer, ties toward +inf.

    Works on scalars and numpy arrays. Returns int (scalar) or int64 array.
    """
    r = np.floor(np.asarray(x, dtype=float) + 0.5 + TIE_TOL)
    if r.ndim == 0:
        return int(r)
    return r.astype(np.int64)


@dataclass(frozen=True)
class Binning:
    lo: float
    hi: float
    bin_size: float
    count: int

    @property
    def half_width(self) -> float:
        return self.bin_size / 2

    @property
    def centers(self) -> np.ndarray:
        return np.round(self.lo + np.arange(self.count) * self.bin_size, _CENTER_DECIMALS)

    def center(self, j: int) -> float:
        return center(self, j)

    def index_of(self, v: float) -> int:
        return index_of(self, v)

    def is_center(self, v: float) -> bool:
        """True if ``v`` coincides with a bin center (to float noise)."""
        q = (v - self.lo) / self.bin_size
        j = round(q)
        return 0 <= j < self.count and abs(q - j) <= _MULTIPLE_TOL


def make_binning(lo: float, hi: float, bin_size: float) -> Binning:
    lo, hi, bin_size = float(lo), float(hi), float(bin_size)
    if not bin_size > 0:
        raise ValueError(f"bin_size must be positive, got {bin_size}")
    if not hi > lo:
        raise ValueError(f"range is empty or inverted: [{lo}, {hi}]")
    q = (hi - lo) / bin_size
    steps = round(q)
    if abs(q - steps) > _MULTIPLE_TOL * max(1.0, abs(q)):
        raise ValueError(
            f"range [{lo}, {hi}] is not an integer multiple of bin_size {bin_size}"
        )
    return Binning(lo, hi, bin_size, steps + 1)


def center(binning: Binning, j: int) -> float:
    if not 0 <= j < binning.count:
        raise IndexError(f"bin index {j} out of range [0, {binning.count})")
    return round(binning.lo + j * binning.bin_size, _CENTER_DECIMALS) + 0.0


def index_of(binning: Binning, v: float) -> int:
    """Nearest bin index for value ``v``; half-way values go to the upper bin."""
    b = binning.bin_size
    if not (binning.lo - b / 2 - 1e-12 <= v <= binning.hi + b / 2 + 1e-12):
        raise ValueError(
            f"value {v} outside padded range "
            f"[{binning.lo - b / 2}, {binning.hi + b / 2}]"
        )
    j = round_half_up((v - binning.lo) / b)
    # the top padded edge rounds past the last bin
    return min(max(j, 0), binning.count - 1)


@dataclass(frozen=True)
class Subcube:
    centers: tuple
    half_width: float

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def radius(self) -> float:
        return self.half_width * math.sqrt(self.k)

    def bounds(self) -> list[tuple[float, float]]:
        return [(c - self.half_width, c + self.half_width) for c in self.centers]


def subcube(binning: Binning, idx) -> Subcube:
    return Subcube(tuple(center(binning, j) for j in idx), binning.half_width)


def subcube_radius(binning_or_size, k: int) -> float:
    """L2 distance from a k-dimensional subcube's center to its vertices."""
    if k < 1:
        raise ValueError("k must be >= 1")
    b = getattr(binning_or_size, "bin_size", binning_or_size)
    return (b / 2) * math.sqrt(k)
