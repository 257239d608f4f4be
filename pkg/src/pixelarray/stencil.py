"""Discrete steady-state conditions over consecutive chain variables.

A 3-point stencil sees ``(u_{i-1}, u_i, u_{i+1})`` and owns ``u_i``; a
2-point stencil sees ``(u_i, u_{i+1})`` and owns ``u_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from . import expr as ex
from .grid import Subcube

ARG_NAMES = {3: ("um1", "u0", "up1"), 2: ("u0", "up1")}

BUILTINS = ("heat", "fisher", "bbm", "sine_gordon", "reaction_diffusion")


@dataclass(frozen=True, eq=False)
class Stencil:
    name: str
    arity: int
    source: str
    tree: ex.Node
    params: Mapping[str, float] = field(default_factory=dict)
    residual_fn: Callable | None = None

    @property
    def owner_offset(self) -> int:
        return 1 if self.arity == 3 else 0

    @property
    def arg_names(self) -> tuple[str, ...]:
        return ARG_NAMES[self.arity]

    def residual(self, *args):
        """Residual at the given point(s); accepts scalars or arrays."""
        if len(args) != self.arity:
            raise TypeError(f"{self.name} takes {self.arity} arguments, got {len(args)}")
        if self.residual_fn is not None:
            return self.residual_fn(*args)
        return ex.evaluate(self.tree, dict(zip(self.arg_names, args)))

    @cached_property
    def partials(self) -> tuple[ex.Node, ...]:
        return tuple(ex.derivative(self.tree, v) for v in self.arg_names)

    def gradient_bounds(self, lows, highs) -> np.ndarray:
        """Upper bounds on |grad f| over boxes given per-argument lows/highs.

        ``lows`` and ``highs`` are sequences of ``arity`` broadcastable arrays.
        """
        env = {
            name: ex.Interval(lo, hi)
            for name, lo, hi in zip(self.arg_names, lows, highs)
        }
        total = 0.0
        for d in self.partials:
            total = total + ex.interval_eval(d, env).magnitude() ** 2
        return np.sqrt(total)


def gradient_bound(stencil: Stencil, sub: Subcube) -> float:
    if sub.k != stencil.arity:
        raise ValueError(f"subcube has {sub.k} dims, stencil arity is {stencil.arity}")
    lows = [c - sub.half_width for c in sub.centers]
    highs = [c + sub.half_width for c in sub.centers]
    return float(stencil.gradient_bounds(lows, highs))


def parse_stencil(
    source: str, arity: int, constants: Mapping[str, float] | None = None
) -> Stencil:
    if arity not in ARG_NAMES:
        raise ValueError(f"arity must be 2 or 3, got {arity}")
    tree = ex.parse(source, constants)
    if arity == 2 and "um1" in ex.variables(tree):
        raise ValueError("um1 is not available in a 2-point stencil")
    return Stencil("custom", arity, source, tree, dict(constants or {}))


def _require(params: Mapping[str, float], name: str, eq: str, positive=False) -> float:
    if params.get(name) is None:
        raise ValueError(f"{eq} requires parameter {name!r}")
    v = float(params[name])
    if positive and not v > 0:
        raise ValueError(f"{eq}: parameter {name!r} must be positive, got {v}")
    return v


def builtin_stencil(name: str, params: Mapping[str, float] | None = None) -> Stencil:
    params = dict(params or {})
    if name == "heat":
        src = "up1 - 2*u0 + um1"
        return Stencil(name, 3, src, ex.parse(src), {},
                       lambda a, m, c: c - 2 * m + a)

    if name == "fisher":
        mu = _require(params, "mu", name)
        h = _require(params, "h", name, positive=True)
        src = "(up1 - 2*u0 + um1)/h^2 + mu*u0*(1 - u0)"
        h2 = h * h
        return Stencil(name, 3, src, ex.parse(src, {"mu": mu, "h": h}),
                       {"mu": mu, "h": h},
                       lambda a, m, c: (c - 2 * m + a) / h2 + mu * m * (1 - m))

    if name == "bbm":
        h = _require(params, "h", name, positive=True)
        src = "(up1 - u0)/h*(1 + u0)"
        return Stencil(name, 2, src, ex.parse(src, {"h": h}), {"h": h},
                       lambda m, c: (c - m) / h * (1 + m))

    if name == "sine_gordon":
        h = _require(params, "h", name, positive=True)
        src = "sin(u0) - (up1 - 2*u0 + um1)/h^2"
        h2 = h * h
        return Stencil(name, 3, src, ex.parse(src, {"h": h}), {"h": h},
                       lambda a, m, c: np.sin(m) - (c - 2 * m + a) / h2)

    if name == "reaction_diffusion":
        d = _require(params, "D", name)
        h = _require(params, "h", name, positive=True)
        reaction = params.get("reaction")
        if not reaction:
            raise ValueError("reaction_diffusion requires a 'reaction' expression in u0")
        f = float(params.get("f", 0.0))
        consts = {"D": d, "h": h, "f": f}
        r_tree = ex.parse(reaction, consts)
        if ex.variables(r_tree) - {"u0"}:
            raise ValueError("reaction term may only reference u0")
        src = f"D/h^2*(up1 - 2*u0 + um1) + ({reaction}) + f"
        coef = d / (h * h)
        return Stencil(
            name, 3, src, ex.parse(src, consts), {**consts, "reaction": reaction},
            lambda a, m, c: coef * (c - 2 * m + a) + ex.evaluate(r_tree, {"u0": m}) + f,
        )

    raise ValueError(f"unknown equation {name!r}; expected one of {', '.join(BUILTINS)}")


def heat_epsilon(bin_size: float) -> float:
    """Closed-form epsilon for the heat stencil, 3b*sqrt(2)/2."""
    return 3 * bin_size * math.sqrt(2) / 2
