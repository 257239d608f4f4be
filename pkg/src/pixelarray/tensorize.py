"""Per-cell feasibility tensors.

An entry is feasible when its subcube may contain a zero of the residual.
Two tests are available: the epsilon method (center residual within a
gradient-bound times the subcube radius) and bin rounding (the residual and
0 land in the same expanded bin).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algebra import SemiringKind
from .contract import DenseTensor, SetTensor
from .grid import Binning, center, round_half_up, subcube, subcube_radius
from .stencil import Stencil, gradient_bound

METHODS = ("epsilon", "binround")

# slack on the epsilon comparison, absorbs float noise in center residuals
_EPS_SLACK = 1e-12


@dataclass(frozen=True)
class FeasibilityParams:
    method: str = "epsilon"
    epsilon_override: float | None = None
    residual_grid_offset: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.epsilon_override is not None and self.epsilon_override < 0:
            raise ValueError("epsilon_override must be non-negative")


def _check_idx(binning: Binning, idx):
    for j in idx:
        if not 0 <= j < binning.count:
            raise IndexError(f"bin index {j} out of range [0, {binning.count})")


def epsilon_feasible(stencil: Stencil, binning: Binning, idx, params: FeasibilityParams) -> bool:
    _check_idx(binning, idx)
    f = float(stencil.residual(*(center(binning, j) for j in idx)))
    if params.epsilon_override is not None:
        eps = params.epsilon_override
    else:
        eps = gradient_bound(stencil, subcube(binning, idx)) * subcube_radius(binning, stencil.arity)
    return abs(f) <= eps + _EPS_SLACK * max(1.0, eps)


def binround_accepts(value: float, bin_size: float, offset: float = 0.0) -> bool:
    """True if ``value`` and 0 round (half up) to the same expanded bin."""
    return round_half_up((value - offset) / bin_size) == round_half_up(-offset / bin_size)


def binround_feasible(stencil: Stencil, binning: Binning, idx, params: FeasibilityParams) -> bool:
    _check_idx(binning, idx)
    f = float(stencil.residual(*(center(binning, j) for j in idx)))
    return binround_accepts(f, binning.bin_size, params.residual_grid_offset)


def is_feasible(stencil, binning, idx, params: FeasibilityParams) -> bool:
    if params.method == "epsilon":
        return epsilon_feasible(stencil, binning, idx, params)
    return binround_feasible(stencil, binning, idx, params)


def _mask_block(stencil: Stencil, binning: Binning, params: FeasibilityParams, first: np.ndarray):
    """Feasibility for entries whose first index lies in ``first``."""
    k = stencil.arity
    c = binning.centers
    axes = [c[first]] + [c] * (k - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    f = np.asarray(stencil.residual(*grids), dtype=float)
    f = np.broadcast_to(f, grids[0].shape)
    if params.method == "binround":
        b, off = binning.bin_size, params.residual_grid_offset
        return round_half_up((f - off) / b) == round_half_up(-off / b)
    if params.epsilon_override is not None:
        eps = np.full(f.shape, params.epsilon_override)
    else:
        hw = binning.half_width
        g = stencil.gradient_bounds([x - hw for x in grids], [x + hw for x in grids])
        eps = np.broadcast_to(g, f.shape) * subcube_radius(binning, k)
    return np.abs(f) <= eps + _EPS_SLACK * np.maximum(1.0, eps)


def feasibility_mask(
    stencil: Stencil, binning: Binning, params: FeasibilityParams, threads: int = 1
) -> np.ndarray:
    """Boolean array of shape ``(count,) * arity``, one entry per subcube.

    Every entry depends only on its own indices, so splitting the fill over
    threads gives the same array as a sequential fill.
    """
    nb = binning.count
    blocks = np.array_split(np.arange(nb), max(1, min(threads, nb)))
    if threads <= 1 or len(blocks) == 1:
        parts = [_mask_block(stencil, binning, params, blk) for blk in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda blk: _mask_block(stencil, binning, params, blk), blocks))
    return np.concatenate(parts, axis=0)


def cell_labels(cell: int, arity: int) -> tuple[int, ...]:
    return (cell - 1, cell, cell + 1) if arity == 3 else (cell, cell + 1)


def build_cell_tensor(
    stencil: Stencil,
    binning: Binning,
    cell: int,
    params: FeasibilityParams,
    kind=SemiringKind.BOOLEAN,
    *,
    owned: bool = True,
    mask: np.ndarray | None = None,
):
    """Feasibility tensor for one chain cell.

    Labels are the chain variable ids the stencil touches. In the
    solution-set kind a feasible entry holds the one-tuple of the owned
    variable's center, or ``{()}`` when the cell owns no visible variable.
    Set tensors store bin indices and decode them through the bin centers.
    """
    kind = SemiringKind(kind)
    labels = cell_labels(cell, stencil.arity)
    if mask is None:
        mask = feasibility_mask(stencil, binning, params)
    if kind is SemiringKind.BOOLEAN:
        return DenseTensor(labels, mask, kind)
    if kind is SemiringKind.COUNTING:
        return DenseTensor(labels, mask.astype(np.int64), kind)
    keys = np.argwhere(mask).astype(np.int64)
    if owned:
        owner = stencil.owner_offset
        payload = keys[:, owner:owner + 1].copy()
        coords = (labels[owner],)
    else:
        payload = np.zeros((len(keys), 0), dtype=np.int64)
        coords = ()
    return SetTensor(labels, [binning.count] * len(labels), keys, payload, coords,
                     decode=binning.centers)
