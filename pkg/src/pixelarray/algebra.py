"""Commutative semirings for pixel-array contraction.

Boolean (or, and) gives the plain pixel-array method; the solution-set
semiring (union, Cartesian concatenation) carries the actual tuples.
Counting (+, *) is only used to cross-check cardinalities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable


class SemiringKind(str, enum.Enum):
    BOOLEAN = "boolean"
    SOLUTION_SET = "solution_set"
    COUNTING = "counting"


class SolutionSet:
    """Immutable finite set of equal-length tuples of reals."""

    __slots__ = ("_tuples", "_width")

    def __init__(self, tuples: Iterable = ()):
        ts = frozenset(tuple(t) for t in tuples)
        widths = {len(t) for t in ts}
        if len(widths) > 1:
            raise ValueError(f"tuples of mixed lengths: {sorted(widths)}")
        self._tuples = ts
        self._width = widths.pop() if widths else None

    @classmethod
    def zero(cls) -> "SolutionSet":
        return _ZERO

    @classmethod
    def one(cls) -> "SolutionSet":
        return _ONE

    @property
    def tuples(self) -> frozenset:
        return self._tuples

    @property
    def width(self):
        """Common tuple length, or None for the empty set."""
        return self._width

    def sorted(self) -> list[tuple]:
        return sorted(self._tuples)

    def __len__(self) -> int:
        return len(self._tuples)

    def __bool__(self) -> bool:
        return bool(self._tuples)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, t) -> bool:
        return tuple(t) in self._tuples

    def __eq__(self, other) -> bool:
        if not isinstance(other, SolutionSet):
            return NotImplemented
        return self._tuples == other._tuples

    def __hash__(self) -> int:
        return hash(self._tuples)

    def __add__(self, other: "SolutionSet") -> "SolutionSet":
        return ss_add(self, other)

    def __mul__(self, other: "SolutionSet") -> "SolutionSet":
        return ss_mul(self, other)

    def __repr__(self) -> str:
        body = ", ".join(repr(t) for t in self.sorted())
        return "{" + body + "}"


_ZERO = SolutionSet()
_ONE = SolutionSet([()])


def ss_mul(a: SolutionSet, b: SolutionSet) -> SolutionSet:
    """Cartesian product, concatenating each pair of tuples."""
    return SolutionSet(s + t for s in a.tuples for t in b.tuples)


def ss_add(a: SolutionSet, b: SolutionSet) -> SolutionSet:
    return SolutionSet(a.tuples | b.tuples)


@dataclass(frozen=True)
class Semiring:
    kind: SemiringKind
    zero: object
    one: object

    def add(self, a, b):
        if self.kind is SemiringKind.BOOLEAN:
            return a or b
        if self.kind is SemiringKind.COUNTING:
            return a + b
        return ss_add(a, b)

    def mul(self, a, b):
        if self.kind is SemiringKind.BOOLEAN:
            return a and b
        if self.kind is SemiringKind.COUNTING:
            return a * b
        return ss_mul(a, b)

    def is_zero(self, a) -> bool:
        if self.kind is SemiringKind.SOLUTION_SET:
            return not a
        return a == self.zero


BOOLEAN = Semiring(SemiringKind.BOOLEAN, False, True)
COUNTING = Semiring(SemiringKind.COUNTING, 0, 1)
SOLUTION_SET = Semiring(SemiringKind.SOLUTION_SET, _ZERO, _ONE)


def semiring(kind) -> Semiring:
    kind = SemiringKind(kind)
    return {
        SemiringKind.BOOLEAN: BOOLEAN,
        SemiringKind.COUNTING: COUNTING,
        SemiringKind.SOLUTION_SET: SOLUTION_SET,
    }[kind]


def support(s: SolutionSet) -> bool:
    """Nonemptiness; the homomorphism onto the boolean semiring."""
    return bool(s)
