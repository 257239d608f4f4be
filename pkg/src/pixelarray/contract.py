"""Labeled tensors over a semiring and the chain contraction sweep.

Two storage layouts share one interface:

* ``DenseTensor`` holds a numpy array (boolean or counting semiring).
* ``SetTensor`` holds a solution-set tensor in relational form: one row per
  (entry index, tuple) pair. Multiplication is a join on the shared labels
  with tuple concatenation; marginalization projects a key column away and
  merges duplicate rows, which is set union.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import SemiringKind, SolutionSet


class LabeledTensor:
    labels: tuple
    extents: tuple
    kind: SemiringKind

    def col(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in {self.labels}") from None

    def extent(self, label) -> int:
        return self.extents[self.col(label)]

    def entries(self) -> dict:
        raise NotImplementedError


class DenseTensor(LabeledTensor):
    def __init__(self, labels: Sequence, array, kind=SemiringKind.BOOLEAN):
        self.kind = SemiringKind(kind)
        if self.kind is SemiringKind.SOLUTION_SET:
            raise ValueError("use SetTensor for the solution-set semiring")
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels {self.labels}")
        arr = np.asarray(array)
        if self.kind is SemiringKind.BOOLEAN:
            arr = arr.astype(bool, copy=False)
        if arr.ndim != len(self.labels):
            raise ValueError(f"{arr.ndim}-d array for {len(self.labels)} labels")
        self.array = arr
        self.extents = tuple(arr.shape)

    def entries(self) -> dict:
        return {
            tuple(int(i) for i in idx): (bool(v) if self.kind is SemiringKind.BOOLEAN else v)
            for idx, v in np.ndenumerate(self.array)
            if v
        }

    def aligned(self, labels: Sequence) -> np.ndarray:
        """Array transposed to ``labels`` order, singleton axes for absent labels."""
        present = [l for l in labels if l in self.labels]
        arr = np.transpose(self.array, [self.labels.index(l) for l in present])
        shape = [self.extent(l) if l in self.labels else 1 for l in labels]
        return arr.reshape(shape)

    def __repr__(self):
        return f"DenseTensor({self.labels}, {self.kind.value}, shape={self.extents})"


class SetTensor(LabeledTensor):
    """Sparse solution-set tensor.

    ``keys[r]`` is the entry index of row ``r`` and ``payload[r]`` one tuple
    stored at that entry. ``coords`` names the variable each payload column
    came from (used to put tuples in canonical order); ``decode`` optionally
    maps payload codes (bin indices) to real values.
    """

    kind = SemiringKind.SOLUTION_SET

    def __init__(self, labels, extents, keys, payload, coords=None, decode=None):
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels {self.labels}")
        self.extents = tuple(int(e) for e in extents)
        payload = np.asarray(payload)
        if payload.ndim != 2:
            raise ValueError("payload must be a 2-d array (rows x tuple length)")
        keys = np.asarray(keys, dtype=np.int64).reshape(len(payload), len(self.labels))
        self.keys = keys
        self.payload = payload
        if coords is None and payload.shape[1] == 0:
            coords = ()
        if coords is not None and len(coords) != payload.shape[1]:
            raise ValueError("coords length does not match payload width")
        self.coords = None if coords is None else tuple(coords)
        self.decode = decode

    @property
    def width(self) -> int:
        return self.payload.shape[1]

    def __len__(self) -> int:
        return len(self.keys)

    @classmethod
    def from_entries(cls, labels, extents, entries: Mapping, coords=None) -> "SetTensor":
        keys, rows = [], []
        width = None
        for idx, ss in entries.items():
            for t in ss.tuples:
                keys.append(tuple(idx))
                rows.append(t)
                width = len(t)
        width = width or 0
        payload = np.array(rows, dtype=float).reshape(len(rows), width)
        t = cls(labels, extents, np.array(keys, dtype=np.int64), payload, coords)
        return t.deduped()

    def values(self) -> np.ndarray:
        if self.decode is None:
            return self.payload
        return np.asarray(self.decode)[self.payload]

    def canonical_payload(self) -> np.ndarray:
        """Payload columns in ascending coordinate order."""
        if not self.coords:
            return self.payload
        return self.payload[:, np.argsort(self.coords, kind="stable")]

    def entries(self) -> dict:
        vals = self.values()
        if self.coords:
            vals = vals[:, np.argsort(self.coords, kind="stable")]
        groups: dict = {}
        for key, row in zip(map(tuple, self.keys.tolist()), vals.tolist()):
            groups.setdefault(key, []).append(tuple(row))
        return {k: SolutionSet(v) for k, v in groups.items()}

    def deduped(self) -> "SetTensor":
        if len(self) < 2:
            return self
        pay = self.payload
        if pay.dtype.kind == "f" or self.keys.dtype != pay.dtype:
            both = np.hstack([self.keys.astype(np.result_type(pay, np.int64)), pay])
        else:
            both = np.hstack([self.keys, pay])
        if both.shape[1] == 0:
            both = both[:1]
        else:
            both = np.unique(both, axis=0)
        nk = len(self.labels)
        return SetTensor(self.labels, self.extents, both[:, :nk].astype(np.int64),
                         both[:, nk:].astype(pay.dtype), self.coords, self.decode)

    def __repr__(self):
        return f"SetTensor({self.labels}, rows={len(self)}, width={self.width})"


def _check_extents(a: LabeledTensor, b: LabeledTensor):
    for l in a.labels:
        if l in b.labels and a.extent(l) != b.extent(l):
            raise ValueError(
                f"extent mismatch on label {l!r}: {a.extent(l)} vs {b.extent(l)}"
            )


def multiply_aligned(a: LabeledTensor, b: LabeledTensor) -> LabeledTensor:
    """Pointwise semiring product over the union of labels (no summation)."""
    if a.kind != b.kind:
        raise TypeError(f"cannot multiply {a.kind.value} by {b.kind.value} tensor")
    _check_extents(a, b)
    labels = a.labels + tuple(l for l in b.labels if l not in a.labels)
    if isinstance(a, DenseTensor):
        x, y = a.aligned(labels), b.aligned(labels)
        arr = (x & y) if a.kind is SemiringKind.BOOLEAN else (x * y)
        shape = [a.extent(l) if l in a.labels else b.extent(l) for l in labels]
        return DenseTensor(labels, np.broadcast_to(arr, shape).copy(), a.kind)
    return _join(a, b, labels)


def _merge_decode(a: SetTensor, b: SetTensor):
    if a.width == 0:
        return b.decode
    if b.width == 0 or a.decode is b.decode:
        return a.decode
    if a.decode is not None and b.decode is not None and np.array_equal(a.decode, b.decode):
        return a.decode
    raise ValueError("cannot concatenate payloads with different encodings")


def _join(a: SetTensor, b: SetTensor, labels) -> SetTensor:
    shared = [l for l in a.labels if l in b.labels]
    if shared:
        dims = [a.extent(l) for l in shared]
        ka = np.ravel_multi_index(tuple(a.keys[:, a.col(l)] for l in shared), dims)
        kb = np.ravel_multi_index(tuple(b.keys[:, b.col(l)] for l in shared), dims)
    else:
        ka = np.zeros(len(a), dtype=np.int64)
        kb = np.zeros(len(b), dtype=np.int64)
    order = np.argsort(kb, kind="stable")
    kb_sorted = kb[order]
    lo = np.searchsorted(kb_sorted, ka, side="left")
    hi = np.searchsorted(kb_sorted, ka, side="right")
    counts = hi - lo
    total = int(counts.sum())
    a_idx = np.repeat(np.arange(len(a)), counts)
    run_start = np.cumsum(counts) - counts
    pos = lo[a_idx] + (np.arange(total) - run_start[a_idx])
    b_idx = order[pos]
    extra = [b.col(l) for l in b.labels if l not in a.labels]
    keys = np.hstack([a.keys[a_idx], b.keys[b_idx][:, extra]])
    payload = np.hstack([a.payload[a_idx], b.payload[b_idx]])
    coords = None if a.coords is None or b.coords is None else a.coords + b.coords
    extents = [a.extent(l) if l in a.labels else b.extent(l) for l in labels]
    return SetTensor(labels, extents, keys, payload, coords, _merge_decode(a, b))


def marginalize(t: LabeledTensor, label) -> LabeledTensor:
    """Semiring sum over every bin of ``label``; the label disappears."""
    c = t.col(label)
    rest = t.labels[:c] + t.labels[c + 1:]
    if isinstance(t, DenseTensor):
        if t.kind is SemiringKind.BOOLEAN:
            arr = t.array.any(axis=c)
        else:
            arr = t.array.sum(axis=c)
        return DenseTensor(rest, arr, t.kind)
    keys = np.delete(t.keys, c, axis=1)
    out = SetTensor(rest, t.extents[:c] + t.extents[c + 1:], keys, t.payload,
                    t.coords, t.decode)
    # when the dropped key is also a payload column, rows stay distinct
    if t.coords and label in t.coords:
        p = t.coords.index(label)
        if t.payload.dtype.kind in "iu" and np.array_equal(t.payload[:, p], t.keys[:, c]):
            return out
    return out.deduped()


def restrict(t: LabeledTensor, label, index: int) -> LabeledTensor:
    """Zero every entry whose ``label`` coordinate differs from ``index``."""
    c = t.col(label)
    if isinstance(t, DenseTensor):
        arr = np.zeros_like(t.array)
        sl = [slice(None)] * arr.ndim
        sl[c] = index
        arr[tuple(sl)] = t.array[tuple(sl)]
        return DenseTensor(t.labels, arr, t.kind)
    keep = t.keys[:, c] == index
    return SetTensor(t.labels, t.extents, t.keys[keep], t.payload[keep], t.coords, t.decode)


def prune(t: SetTensor, mask: DenseTensor, fixed: Mapping | None = None) -> SetTensor:
    """Drop rows whose entry is false in ``mask``.

    This is the product with a {()}/{} tensor. Mask labels missing from
    ``t`` must be pinned in ``fixed``.
    """
    fixed = fixed or {}
    idx = []
    for l in mask.labels:
        if l in t.labels:
            idx.append(t.keys[:, t.col(l)])
        else:
            idx.append(np.full(len(t), fixed[l], dtype=np.int64))
    keep = mask.array[tuple(idx)] if idx else np.full(len(t), bool(mask.array))
    return SetTensor(t.labels, t.extents, t.keys[keep], t.payload[keep], t.coords, t.decode)


def truncate(t: SetTensor, cap: int) -> tuple[SetTensor, bool]:
    """Keep rows whose tuple is among the ``cap`` lexicographically smallest."""
    if len(t) <= cap:
        return t, False
    uniq, inverse = np.unique(t.canonical_payload(), axis=0, return_inverse=True)
    if len(uniq) <= cap:
        return t, False
    keep = inverse.reshape(-1) < cap
    return SetTensor(t.labels, t.extents, t.keys[keep], t.payload[keep],
                     t.coords, t.decode), True


def to_boolean(t: LabeledTensor) -> DenseTensor:
    if isinstance(t, DenseTensor):
        return DenseTensor(t.labels, t.array != 0, SemiringKind.BOOLEAN)
    if not t.labels:
        return DenseTensor((), np.array(len(t) > 0), SemiringKind.BOOLEAN)
    arr = np.zeros(t.extents, dtype=bool)
    arr[tuple(t.keys.T)] = True
    return DenseTensor(t.labels, arr, SemiringKind.BOOLEAN)


def transpose(t: LabeledTensor, labels: Sequence) -> LabeledTensor:
    labels = tuple(labels)
    if sorted(map(repr, labels)) != sorted(map(repr, t.labels)):
        raise ValueError(f"{labels} is not a permutation of {t.labels}")
    if isinstance(t, DenseTensor):
        return DenseTensor(labels, t.aligned(labels), t.kind)
    perm = [t.col(l) for l in labels]
    return SetTensor(labels, [t.extents[p] for p in perm], t.keys[:, perm],
                     t.payload, t.coords, t.decode)


def canonicalize(t: SetTensor) -> SetTensor:
    """Reorder payload columns to ascending coordinate order."""
    if not t.coords:
        return t
    perm = np.argsort(t.coords, kind="stable")
    return SetTensor(t.labels, t.extents, t.keys, t.payload[:, perm],
                     tuple(t.coords[p] for p in perm), t.decode)


# -- chain wiring diagram --------------------------------------------------


@dataclass(frozen=True)
class CellSpec:
    index: int
    labels: tuple
    owner: int | None  # variable whose value the cell contributes to tuples


@dataclass(frozen=True)
class ChainPlan:
    """Chain of equation cells with hidden boundary variables at both ends.

    Variables are integers ``i`` standing for ``u_i``. Visible variables are
    ``1..n_visible``; the two ends are exposed. With ``hidden_equations`` the
    hidden cells carry equations too, which adds one more hidden variable on
    each side.
    """

    n_visible: int
    arity: int = 3
    hidden_equations: bool = False

    def __post_init__(self):
        if self.n_visible < 2:
            raise ValueError("n_visible must be at least 2")
        if self.arity not in (2, 3):
            raise ValueError("arity must be 2 or 3")

    @property
    def exposed(self) -> tuple[int, int]:
        return (1, self.n_visible)

    @property
    def visible(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_visible + 1))

    @property
    def cells(self) -> tuple[CellSpec, ...]:
        n, extra = self.n_visible, int(self.hidden_equations)
        if self.arity == 3:
            idxs = range(1 - extra, n + 1 + extra)
            labels = lambda i: (i - 1, i, i + 1)
        else:
            idxs = range(-extra, n + 1 + extra)
            labels = lambda i: (i, i + 1)
        return tuple(
            CellSpec(i, labels(i), i if 1 <= i <= n else None) for i in idxs
        )

    @property
    def variables(self) -> tuple[int, ...]:
        vs = sorted({v for c in self.cells for v in c.labels})
        return tuple(vs)

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(v for v in self.variables if not 1 <= v <= self.n_visible)


def contract_chain(
    tensors: Sequence[LabeledTensor],
    exposed: Sequence,
    *,
    order: Iterable[int] | None = None,
    supports: Sequence[DenseTensor | None] | None = None,
    fixed: Mapping | None = None,
    cap: int | None = None,
    trace: list | None = None,
) -> LabeledTensor:
    """Absorb tensors one at a time into a frontier, summing out each label
    as soon as no unabsorbed tensor references it and it is not exposed.

    ``supports[s]``, if given, prunes the (solution-set) frontier after step
    ``s`` to rows that can still be completed; ``cap`` then keeps only the
    ``cap`` lexicographically smallest tuples, which is exact provided every
    surviving row is completable and the exposed labels are pinned.
    """
    order = list(range(len(tensors))) if order is None else list(order)
    exposed = tuple(exposed)
    frontier = None
    for step, pos in enumerate(order):
        t = tensors[pos]
        frontier = t if frontier is None else multiply_aligned(frontier, t)
        if trace is not None:
            trace.append(len(frontier.labels))
        pending = set()
        for later in order[step + 1:]:
            pending.update(tensors[later].labels)
        for l in frontier.labels:
            if l not in pending and l not in exposed:
                frontier = marginalize(frontier, l)
        if isinstance(frontier, SetTensor):
            if supports is not None and supports[step] is not None:
                frontier = prune(frontier, supports[step], fixed)
            if cap is not None:
                frontier, _ = truncate(frontier, cap)
    frontier = transpose(frontier, exposed)
    if isinstance(frontier, SetTensor):
        frontier = canonicalize(frontier)
    return frontier


def sweep_contract(
    cells: Sequence[LabeledTensor], plan: ChainPlan, *, reverse: bool = False, **kw
) -> LabeledTensor:
    """Contract the plan's cell tensors down to a tensor over (u_1, u_n)."""
    specs = plan.cells
    if len(cells) != len(specs):
        raise ValueError(f"plan has {len(specs)} cells, got {len(cells)} tensors")
    for spec, t in zip(specs, cells):
        if set(t.labels) != set(spec.labels):
            raise ValueError(f"cell {spec.index}: expected labels {spec.labels}, got {t.labels}")
    order = range(len(cells) - 1, -1, -1) if reverse else None
    return contract_chain(cells, plan.exposed, order=order, **kw)


def suffix_supports(
    cells: Sequence[DenseTensor], exposed: Sequence
) -> list[DenseTensor]:
    """Boolean completion masks for a left-to-right sweep.

    Entry ``s`` says, for each assignment of the labels shared between
    cells ``0..s`` and cells ``s+1..``, plus the exposed labels, whether the
    remaining cells can all be satisfied.
    """
    exposed = set(exposed)
    m = len(cells)
    prefix_labels = []
    seen: set = set()
    for t in cells:
        seen |= set(t.labels)
        prefix_labels.append(set(seen))
    out: list = [None] * m
    acc = DenseTensor((), np.array(True))
    out[m - 1] = acc
    for s in range(m - 2, -1, -1):
        acc = multiply_aligned(cells[s + 1], acc)
        keep = prefix_labels[s] | exposed
        for l in acc.labels:
            if l not in keep:
                acc = marginalize(acc, l)
        out[s] = acc
    return out
