"""Residual expressions: parsing, evaluation, differentiation, interval bounds.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' integer)?
    base   := number | name | '(' expr ')' | func '(' expr ')'

``name`` is one of the stencil variables ``um1``, ``u0``, ``up1``, the
constant ``pi``, or a caller-supplied constant. ``func`` is sin, cos or exp.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

VARIABLES = ("um1", "u0", "up1")
FUNCTIONS = ("sin", "cos", "exp")


class ExprSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Node):
    value: float

    def __str__(self):
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


@dataclass(frozen=True)
class Var(Node):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exp: int

    def __str__(self):
        return f"({self.base}^{self.exp})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def __str__(self):
        return f"{self.func}({self.arg})"


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, constants: Mapping[str, float]):
        self.toks = _tokenize(src)
        self.i = 0
        self.constants = constants

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}, got {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", text):
                raise ExprSyntaxError("exponent must be an integer", pos)
            node = Pow(node, sign * int(text))
        return node

    def base(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                node = self.expr()
                self.expect(")")
                return Call(text, node)
            if text in VARIABLES:
                return Var(text)
            if text in self.constants:
                return Num(float(self.constants[text]))
            if text == "pi":
                return Num(math.pi)
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse(src: str, constants: Mapping[str, float] | None = None) -> Node:
    return _Parser(src, constants or {}).parse()


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, (Neg, Call)):
        return variables(node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    raise TypeError(node)


# -- point evaluation ------------------------------------------------------

_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def evaluate(node: Node, env: Mapping[str, object]):
    """Evaluate with scalars or broadcastable numpy arrays bound in ``env``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return evaluate(node.base, env) ** node.exp
    if isinstance(node, Call):
        return _NP_FUNCS[node.func](evaluate(node.arg, env))
    raise TypeError(node)


# -- symbolic derivative ---------------------------------------------------


def _num(node):
    return node.value if isinstance(node, Num) else None


def _add(a: Node, b: Node) -> Node:
    x, y = _num(a), _num(b)
    if x is not None and y is not None:
        return Num(x + y)
    if x == 0:
        return b
    if y == 0:
        return a
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    x, y = _num(a), _num(b)
    if x is not None and y is not None:
        return Num(x - y)
    if y == 0:
        return a
    if x == 0:
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Node) -> Node:
    x = _num(a)
    if x is not None:
        return Num(-x)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Node, b: Node) -> Node:
    x, y = _num(a), _num(b)
    if x is not None and y is not None:
        return Num(x * y)
    if x == 0 or y == 0:
        return Num(0.0)
    if x == 1:
        return b
    if y == 1:
        return a
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    x, y = _num(a), _num(b)
    if x is not None and y is not None and y != 0:
        return Num(x / y)
    if x == 0:
        return Num(0.0)
    if y == 1:
        return a
    return BinOp("/", a, b)


def _pow(a: Node, n: int) -> Node:
    x = _num(a)
    if n == 0:
        return Num(1.0)
    if n == 1:
        return a
    if x is not None and (x != 0 or n > 0):
        return Num(x**n)
    return Pow(a, n)


def derivative(node: Node, var: str) -> Node:
    """d(node)/d(var), constant-folded so constant gradients come out as Num."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return _neg(derivative(node.arg, var))
    if isinstance(node, BinOp):
        da = derivative(node.left, var)
        db = derivative(node.right, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        # quotient rule
        num = _sub(_mul(da, node.right), _mul(node.left, db))
        return _div(num, _pow(node.right, 2))
    if isinstance(node, Pow):
        db = derivative(node.base, var)
        return _mul(_mul(Num(float(node.exp)), _pow(node.base, node.exp - 1)), db)
    if isinstance(node, Call):
        da = derivative(node.arg, var)
        if node.func == "sin":
            outer = Call("cos", node.arg)
        elif node.func == "cos":
            outer = _neg(Call("sin", node.arg))
        else:
            outer = Call("exp", node.arg)
        return _mul(outer, da)
    raise TypeError(node)


# -- interval evaluation ---------------------------------------------------


class Interval:
    """Closed interval(s) with numpy-array endpoints (elementwise)."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = self.lo if hi is None else np.asarray(hi, dtype=float)

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"

    def __add__(self, o):
        return Interval(self.lo + o.lo, self.hi + o.hi)

    def __sub__(self, o):
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, o):
        with np.errstate(invalid="ignore"):
            p = np.stack(
                np.broadcast_arrays(
                    self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi
                )
            )
        p = np.where(np.isnan(p), 0.0, p)  # 0 * inf
        return Interval(p.min(axis=0), p.max(axis=0))

    def reciprocal(self):
        spans_zero = (self.lo <= 0) & (self.hi >= 0)
        with np.errstate(divide="ignore"):
            lo = np.where(spans_zero, -np.inf, 1.0 / self.hi)
            hi = np.where(spans_zero, np.inf, 1.0 / self.lo)
        return Interval(lo, hi)

    def __truediv__(self, o):
        return self * o.reciprocal()

    def __pow__(self, n: int):
        if n == 0:
            return Interval(np.ones_like(self.lo))
        if n < 0:
            return (self ** (-n)).reciprocal()
        a, b = self.lo**n, self.hi**n
        if n % 2:
            return Interval(a, b)
        straddle = (self.lo < 0) & (self.hi > 0)
        lo = np.where(straddle, 0.0, np.minimum(a, b))
        return Interval(lo, np.maximum(a, b))

    def sin(self):
        lo, hi = self.lo, self.hi
        sa, sb = np.sin(lo), np.sin(hi)
        out_lo = np.minimum(sa, sb)
        out_hi = np.maximum(sa, sb)
        # a maximum of sin sits at pi/2 + 2k*pi, a minimum at -pi/2 + 2k*pi
        has_max = np.floor((hi - math.pi / 2) / (2 * math.pi)) >= np.ceil(
            (lo - math.pi / 2) / (2 * math.pi)
        )
        has_min = np.floor((hi + math.pi / 2) / (2 * math.pi)) >= np.ceil(
            (lo + math.pi / 2) / (2 * math.pi)
        )
        out_hi = np.where(has_max, 1.0, out_hi)
        out_lo = np.where(has_min, -1.0, out_lo)
        return Interval(out_lo, out_hi)

    def cos(self):
        return Interval(self.lo + math.pi / 2, self.hi + math.pi / 2).sin()

    def exp(self):
        return Interval(np.exp(self.lo), np.exp(self.hi))

    def magnitude(self):
        """max |x| over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))


def interval_eval(node: Node, env: Mapping[str, Interval]) -> Interval:
    if isinstance(node, Num):
        return Interval(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -interval_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = interval_eval(node.left, env)
        b = interval_eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return interval_eval(node.base, env) ** node.exp
    if isinstance(node, Call):
        x = interval_eval(node.arg, env)
        return getattr(x, node.func)()
    raise TypeError(node)
