import math

import numpy as np
import pytest

from pixelarray.algebra import SemiringKind, SolutionSet
from pixelarray.contract import DenseTensor, SetTensor
from pixelarray.grid import make_binning
from pixelarray.stencil import builtin_stencil, parse_stencil
from pixelarray.tensorize import (
    FeasibilityParams,
    binround_accepts,
    binround_feasible,
    build_cell_tensor,
    epsilon_feasible,
    feasibility_mask,
    is_feasible,
)

HEAT = builtin_stencil("heat")
B01 = make_binning(0, 1, 0.05)
EPS = FeasibilityParams("epsilon")
ROUND = FeasibilityParams("binround")


def test_heat_epsilon_examples():
    assert epsilon_feasible(HEAT, B01, (20, 20, 19), EPS)  # |f| = 0.05
    assert not epsilon_feasible(HEAT, B01, (20, 16, 8), EPS)  # |f| = 0.2
    for idx in [(0, 0, 0), (2, 5, 8), (20, 10, 0)]:
        assert epsilon_feasible(HEAT, B01, idx, EPS)


def test_heat_epsilon_threshold():
    # epsilon is 3b*sqrt(2)/2 = 0.10607: residual 0.10 passes, 0.15 does not
    assert epsilon_feasible(HEAT, B01, (0, 0, 2), EPS)
    assert not epsilon_feasible(HEAT, B01, (0, 0, 3), EPS)


def test_epsilon_override():
    tight = FeasibilityParams("epsilon", epsilon_override=0.0)
    assert epsilon_feasible(HEAT, B01, (2, 5, 8), tight)
    assert not epsilon_feasible(HEAT, B01, (20, 20, 19), tight)
    with pytest.raises(ValueError):
        FeasibilityParams("epsilon", epsilon_override=-1.0)
    with pytest.raises(ValueError):
        FeasibilityParams("newton")


def test_binround_examples():
    fisher = builtin_stencil("fisher", {"mu": 1, "h": 1})
    assert binround_feasible(fisher, make_binning(0, 2, 0.05), (0, 0, 0), ROUND)
    assert binround_accepts(0.024, 0.05)
    assert not binround_accepts(0.025, 0.05)
    assert binround_accepts(-0.025, 0.05)
    assert not binround_accepts(-0.026, 0.05)


def test_binround_offset_shifts_the_grid():
    # bins centered on 0.01: 0 and 0.03 share a bin, 0 and 0.04 do not
    assert binround_accepts(0.03, 0.05, offset=0.01)
    assert not binround_accepts(0.04, 0.05, offset=0.01)
    # (-0.015 - 0.01) / 0.05 = -0.5 is a tie and rounds up into bin 0
    assert binround_accepts(-0.015, 0.05, offset=0.01)
    assert not binround_accepts(-0.016, 0.05, offset=0.01)


def test_feasibility_checks_indices():
    with pytest.raises(IndexError):
        is_feasible(HEAT, B01, (0, 0, 21), EPS)


@pytest.mark.parametrize(
    "stencil,binning",
    [
        (HEAT, make_binning(0, 0.4, 0.05)),
        (builtin_stencil("fisher", {"mu": 1, "h": 1}), make_binning(0.8, 1.2, 0.05)),
        (builtin_stencil("bbm", {"h": 0.05}), make_binning(0, 0.5, 0.05)),
        (builtin_stencil("sine_gordon", {"h": 1}), make_binning(2.0, 4.0, 0.2)),
        (parse_stencil("exp(u0) - 1 + (up1 - u0)^2", 2), make_binning(-0.5, 0.5, 0.1)),
    ],
)
@pytest.mark.parametrize("params", [EPS, ROUND, FeasibilityParams("binround", residual_grid_offset=0.02)])
def test_vectorized_mask_matches_scalar_tests(stencil, binning, params):
    mask = feasibility_mask(stencil, binning, params)
    assert mask.shape == (binning.count,) * stencil.arity
    for idx in np.ndindex(*mask.shape):
        assert mask[idx] == is_feasible(stencil, binning, idx, params), idx


def test_mask_independent_of_threads():
    b = make_binning(0, 2, 0.05)
    s = builtin_stencil("fisher", {"mu": 1, "h": 1})
    one = feasibility_mask(s, b, ROUND, threads=1)
    for t in (2, 3, 8):
        assert np.array_equal(one, feasibility_mask(s, b, ROUND, threads=t))


def test_cell_tensor_kinds():
    t = build_cell_tensor(HEAT, B01, 3, EPS, SemiringKind.BOOLEAN)
    assert isinstance(t, DenseTensor) and t.labels == (2, 3, 4)
    assert t.array[20, 20, 19] and not t.array[20, 16, 8]

    c = build_cell_tensor(HEAT, B01, 3, EPS, SemiringKind.COUNTING)
    assert c.array.dtype.kind == "i" and np.array_equal(c.array != 0, t.array)

    s = build_cell_tensor(HEAT, B01, 3, EPS, SemiringKind.SOLUTION_SET)
    assert isinstance(s, SetTensor)
    entries = s.entries()
    assert entries[(20, 20, 19)] == SolutionSet([(1.0,)])
    assert (20, 16, 8) not in entries
    assert len(entries) == int(t.array.sum())


def test_unowned_cell_holds_unit():
    bbm = builtin_stencil("bbm", {"h": 0.05})
    b = make_binning(0, 0.5, 0.05)
    s = build_cell_tensor(bbm, b, 0, ROUND, SemiringKind.SOLUTION_SET, owned=False)
    assert s.labels == (0, 1)
    assert set(s.entries().values()) == {SolutionSet.one()}


def test_owned_two_point_cell_contributes_first_variable():
    bbm = builtin_stencil("bbm", {"h": 0.05})
    b = make_binning(0, 0.5, 0.05)
    s = build_cell_tensor(bbm, b, 4, ROUND, SemiringKind.SOLUTION_SET)
    for (i, j), ss in s.entries().items():
        assert ss == SolutionSet([(b.centers[i],)])
