import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epipolicy.errors import SeedError
from epipolicy.optimize import NelderMeadOptions, halton, multi_start, nelder_mead

from oracles import grid_minimum


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_quadratic_1d():
    res = nelder_mead(lambda x: (x[0] - 3.0) ** 2, [0.0])
    assert abs(res.x[0] - 3.0) < 1e-4
    assert res.converged


def test_rosenbrock_against_grid_oracle():
    oracle = grid_minimum(rosenbrock, [-2.0, -1.0], [2.0, 3.0])
    res = nelder_mead(rosenbrock, [-1.2, 1.0])
    assert np.max(np.abs(oracle - [1.0, 1.0])) < 1e-3
    assert np.max(np.abs(res.x - oracle)) < 1e-3


def test_constant_objective_returns_seed():
    res = nelder_mead(lambda x: 7.0, [0.3, -2.0])
    assert res.converged
    assert res.x.tolist() == [0.3, -2.0]
    assert res.fun == 7.0


def test_non_finite_seed_raises():
    with pytest.raises(SeedError):
        nelder_mead(lambda x: math.inf, [1.0])
    with pytest.raises(SeedError):
        nelder_mead(lambda x: math.nan, [1.0])


def test_iteration_cap():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], NelderMeadOptions(max_iter=5))
    assert res.iterations == 5 and not res.converged


def test_box_penalty_respected():
    def f(x):
        return math.inf if x[0] < 0 else (x[0] + 1.0) ** 2

    res = nelder_mead(f, [0.5])
    assert res.x[0] >= 0 and res.x[0] < 1e-3


def test_halton_first_points():
    h = halton(4, 2)
    assert h[:, 0].tolist() == [0.5, 0.25, 0.75, 0.125]
    assert h[:, 1] == pytest.approx([1 / 3, 2 / 3, 1 / 9, 4 / 9])


def test_multi_start_returns_best_and_skips_bad_seeds():
    def f(x):
        if x[0] > 0.8:
            return math.inf
        return min((x[0] - 0.1) ** 2, (x[0] - 0.7) ** 2 + 0.5)

    best, results = multi_start(f, [0.0], [1.0], 8)
    assert abs(best.x[0] - 0.1) < 1e-4
    assert best.fun == min(r.fun for r in results)
    assert len(results) < 8


@given(
    c=st.lists(st.floats(-5, 5), min_size=1, max_size=3),
    x0=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
)
def test_result_never_worse_than_seed(c, x0):
    x0 = np.array(x0[: len(c)])
    f = lambda x: float(np.sum((x - c) ** 2) + np.sum(np.abs(x)))  # noqa: E731
    res = nelder_mead(f, x0)
    assert res.fun <= f(x0)
