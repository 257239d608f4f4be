"""End-to-end solve over all boundary-value pairs.

Modes:

``pa``
    boolean sweep only; one bit per (left, right) pixel.
``pass``
    solution-set sweep for every pixel.
``hybrid``
    boolean sweep first, then solution sets only where the boolean pixel
    is set.

Solution sets are computed pixel by pixel with both boundary variables
pinned, so per-pixel truncation to the lexicographically smallest tuples is
exact. Exact tuple counts come from a separate counting sweep.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algebra import SemiringKind, SolutionSet
from .contract import (
    ChainPlan,
    DenseTensor,
    contract_chain,
    marginalize,
    multiply_aligned,
    restrict,
    suffix_supports,
    sweep_contract,
)
from .grid import Binning
from .stencil import Stencil, heat_epsilon
from .tensorize import FeasibilityParams, build_cell_tensor, feasibility_mask, is_feasible

log = logging.getLogger(__name__)

MODES = ("pa", "pass", "hybrid")
DEFAULT_MAX_SOLUTIONS = 10_000
BRUTE_FORCE_LIMIT = 10**8


@dataclass
class Problem:
    stencil: Stencil
    binning: Binning
    n_visible: int
    feasibility: FeasibilityParams = field(default_factory=FeasibilityParams)
    mode: str = "hybrid"
    max_solutions_per_pixel: int = DEFAULT_MAX_SOLUTIONS
    boundaries: list[tuple[float, float]] | None = None
    hidden_equations: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.n_visible < 2:
            raise ValueError("n_visible must be at least 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_solutions_per_pixel < 1:
            raise ValueError("max_solutions_per_pixel must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")
        for pair in self.boundaries or []:
            for v in pair:
                if not self.binning.is_center(v):
                    raise ValueError(f"boundary value {v} is not a bin center")

    @property
    def plan(self) -> ChainPlan:
        return ChainPlan(self.n_visible, self.stencil.arity, self.hidden_equations)

    def pixel_filter(self) -> list[tuple[int, int]] | None:
        if self.boundaries is None:
            return None
        b = self.binning
        return sorted({(b.index_of(l), b.index_of(r)) for l, r in self.boundaries})


@dataclass
class PixelResult:
    binning: Binning
    mode: str
    n_visible: int
    nonempty: np.ndarray
    # per nonempty pixel: sorted bin-index tuples, exact count, truncation flag
    solutions: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    truncated: dict = field(default_factory=dict)
    pixels: list | None = None
    stats: dict = field(default_factory=dict)

    @property
    def has_sets(self) -> bool:
        return self.mode in ("pass", "hybrid")

    def tuples(self, i: int, j: int) -> list[tuple[float, ...]]:
        rows = self.solutions.get((i, j))
        if rows is None:
            return []
        return [tuple(r) for r in self.binning.centers[rows].tolist()]

    def solution_set(self, i: int, j: int) -> SolutionSet:
        return SolutionSet(self.tuples(i, j))

    def pixel_items(self):
        """(i, j) of every nonempty pixel, row-major."""
        return [tuple(int(x) for x in p) for p in np.argwhere(self.nonempty)]

    def same_as(self, other: "PixelResult") -> bool:
        if not np.array_equal(self.nonempty, other.nonempty):
            return False
        if self.has_sets != other.has_sets:
            return False
        if not self.has_sets:
            return True
        keys = set(self.solutions) | set(other.solutions)
        for k in keys:
            a, b = self.solutions.get(k), other.solutions.get(k)
            if a is None or b is None or not np.array_equal(a, b):
                return False
            if self.counts.get(k) != other.counts.get(k):
                return False
            if bool(self.truncated.get(k)) != bool(other.truncated.get(k)):
                return False
        return True


# -- diagnostics -----------------------------------------------------------


def modified_l2(values, left: float, right: float) -> float:
    """Distance from the straight line joining the two boundary values."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 2:
        raise ValueError("need at least two values")
    line = np.linspace(left, right, n)
    return float(np.sqrt(np.sum((v - line) ** 2)))


def l2_bound(epsilon: float, n: int) -> float:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return epsilon * math.ceil(n / 2) ** 2.5


def project_boolean(r: PixelResult) -> PixelResult:
    if not r.has_sets:
        raise ValueError(f"project_boolean needs a pass or hybrid result, got {r.mode!r}")
    return PixelResult(r.binning, "pa", r.n_visible, r.nonempty.copy(),
                       pixels=r.pixels, stats={})


def _filter_mask(nb: int, pixels) -> np.ndarray:
    keep = np.zeros((nb, nb), dtype=bool)
    if pixels is None:
        keep[:] = True
    else:
        for i, j in pixels:
            keep[i, j] = True
    return keep


# -- solve -----------------------------------------------------------------


def _cells(problem: Problem, mask: np.ndarray, kind) -> list:
    return [
        build_cell_tensor(problem.stencil, problem.binning, spec.index, problem.feasibility,
                          kind, owned=spec.owner is not None, mask=mask)
        for spec in problem.plan.cells
    ]


def _boolean_sweep(problem: Problem, mask: np.ndarray) -> np.ndarray:
    cells = _cells(problem, mask, SemiringKind.BOOLEAN)
    return sweep_contract(cells, problem.plan).array


def count_solutions(problem: Problem, mask: np.ndarray) -> np.ndarray:
    """Exact number of distinct visible tuples per pixel.

    Hidden variables are existential, not summed: the cells that touch them
    are first reduced with the boolean semiring, then visible variables are
    summed in the counting semiring.
    """
    plan = problem.plan
    n = plan.n_visible
    bool_cells = _cells(problem, mask, SemiringKind.BOOLEAN)
    left = [t for t in bool_cells if min(t.labels) < 1]
    right = [t for t in bool_cells if max(t.labels) > n and t not in left]
    middle = [t for t in bool_cells if t not in left and t not in right]

    def reduce_block(block):
        acc = block[0]
        for t in block[1:]:
            acc = multiply_aligned(acc, t)
        for l in acc.labels:
            if not 1 <= l <= n:
                acc = marginalize(acc, l)
        return acc

    factors = [reduce_block(left)] + middle + [reduce_block(right)]

    def run(dtype):
        ts = [DenseTensor(f.labels, f.array.astype(dtype), SemiringKind.COUNTING) for f in factors]
        return contract_chain(ts, plan.exposed).array

    counts = run(np.float64)
    if counts.max(initial=0) < 2**53:
        return counts.astype(np.int64)
    return run(object)


def _pixel_sets(problem: Problem, mask: np.ndarray, pixels: list) -> dict:
    plan = problem.plan
    first, last = plan.exposed
    set_cells = _cells(problem, mask, SemiringKind.SOLUTION_SET)
    supports = suffix_supports(_cells(problem, mask, SemiringKind.BOOLEAN), plan.exposed)
    cap = problem.max_solutions_per_pixel

    def run(pix):
        i, j = pix
        fixed = {first: i, last: j}
        cells = []
        for t in set_cells:
            for l, v in fixed.items():
                if l in t.labels:
                    t = restrict(t, l, v)
            cells.append(t)
        out = contract_chain(cells, plan.exposed, supports=supports, fixed=fixed, cap=cap)
        rows = out.payload.astype(np.int64)
        order = np.lexsort(rows.T[::-1]) if len(rows) else np.arange(0)
        return rows[order]

    if problem.threads > 1 and len(pixels) > 1:
        with ThreadPoolExecutor(max_workers=problem.threads) as pool:
            results = list(pool.map(run, pixels))
    else:
        results = [run(p) for p in pixels]
    return dict(zip(pixels, results))


def _finish_sets(problem: Problem, result: PixelResult, sets: dict, counts: np.ndarray):
    cap = problem.max_solutions_per_pixel
    for (i, j), rows in sets.items():
        if len(rows) == 0:
            continue
        c = int(counts[i, j])
        trunc = c > cap
        if (not trunc and c != len(rows)) or (trunc and len(rows) != cap):
            raise RuntimeError(
                f"pixel ({i}, {j}): {len(rows)} tuples enumerated but count is {c}"
            )
        result.nonempty[i, j] = True
        result.solutions[(i, j)] = rows
        result.counts[(i, j)] = c
        result.truncated[(i, j)] = trunc


def solve(problem: Problem) -> PixelResult:
    t0 = time.perf_counter()
    nb = problem.binning.count
    mask = feasibility_mask(problem.stencil, problem.binning, problem.feasibility,
                            threads=problem.threads)
    pixels = problem.pixel_filter()
    keep = _filter_mask(nb, pixels)
    result = PixelResult(problem.binning, problem.mode, problem.n_visible,
                         np.zeros((nb, nb), dtype=bool), pixels=pixels)

    if problem.mode == "pa":
        result.nonempty = _boolean_sweep(problem, mask) & keep
    else:
        if problem.mode == "hybrid":
            candidates = _boolean_sweep(problem, mask) & keep
        else:
            candidates = keep
        todo = [tuple(int(x) for x in p) for p in np.argwhere(candidates)]
        counts = count_solutions(problem, mask)
        sets = _pixel_sets(problem, mask, todo)
        _finish_sets(problem, result, sets, counts)
        log.debug("enumerated %d pixels", len(todo))

    result.stats["wall_time"] = time.perf_counter() - t0
    return result


# -- brute force oracle ----------------------------------------------------


def _assignments(nb: int, nvars: int, chunk: int = 1 << 20):
    """All index assignments of ``nvars`` variables, in chunks of rows."""
    tail = 0
    while tail < nvars and nb ** (tail + 1) <= chunk:
        tail += 1
    tail_grid = np.indices((nb,) * tail).reshape(tail, -1).T if tail else np.zeros((1, 0), int)
    for head in itertools.product(range(nb), repeat=nvars - tail):
        h = np.broadcast_to(np.array(head, dtype=np.int64), (len(tail_grid), nvars - tail))
        yield np.hstack([h, tail_grid])


def brute_force_solve(problem: Problem) -> PixelResult:
    """Exhaustive enumeration of every variable assignment.

    Each cell's test is evaluated point by point with the scalar feasibility
    functions, independently of tensor construction and contraction.
    """
    t0 = time.perf_counter()
    plan = problem.plan
    b = problem.binning
    nb = b.count
    variables = plan.variables
    if nb ** len(variables) > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"brute force needs {nb}^{len(variables)} assignments, limit is {BRUTE_FORCE_LIMIT}"
        )
    k = problem.stencil.arity
    table = np.zeros((nb,) * k, dtype=bool)
    for idx in itertools.product(range(nb), repeat=k):
        table[idx] = is_feasible(problem.stencil, b, idx, problem.feasibility)

    col = {v: p for p, v in enumerate(variables)}
    vis_cols = [col[v] for v in plan.visible]
    found = []
    for block in _assignments(nb, len(variables)):
        ok = np.ones(len(block), dtype=bool)
        for spec in plan.cells:
            ok &= table[tuple(block[:, col[v]] for v in spec.labels)]
        if ok.any():
            found.append(block[ok][:, vis_cols])
    vis = np.unique(np.vstack(found), axis=0) if found else np.zeros((0, plan.n_visible), int)

    pixels = problem.pixel_filter()
    keep = _filter_mask(nb, pixels)
    result = PixelResult(b, problem.mode, problem.n_visible,
                         np.zeros((nb, nb), dtype=bool), pixels=pixels)
    cap = problem.max_solutions_per_pixel
    # np.unique sorted the rows lexicographically; boolean selection keeps that
    pair = vis[:, 0] * nb + vis[:, -1]
    for p in np.unique(pair):
        i, j = divmod(int(p), nb)
        if not keep[i, j]:
            continue
        rows = vis[pair == p]
        result.nonempty[i, j] = True
        if result.has_sets:
            result.solutions[(i, j)] = rows[:cap].astype(np.int64)
            result.counts[(i, j)] = len(rows)
            result.truncated[(i, j)] = len(rows) > cap
    result.stats["wall_time"] = time.perf_counter() - t0
    return result


def default_epsilon(problem: Problem) -> float | None:
    """Epsilon used by the heat error bound, if it applies."""
    if problem.feasibility.method != "epsilon" or problem.stencil.name != "heat":
        return None
    if problem.feasibility.epsilon_override is not None:
        return problem.feasibility.epsilon_override
    return heat_epsilon(problem.binning.bin_size)
