import numpy as np
import pytest
from scipy.optimize import linprog

from origami.lp import LPInfeasible, LPUnbounded, solve_lp


def test_maximize_first_coordinate_on_simplex():
    res = solve_lp([1.0, 0.0, 0.0], A_eq=[[1, 1, 1]], b_eq=[1])
    assert np.allclose(res.solution, [1, 0, 0])
    assert res.value == pytest.approx(1.0)


def test_infeasible():
    with pytest.raises(LPInfeasible):
        solve_lp([1.0], A_ub=[[1.0]], b_ub=[-1.0])


def test_unbounded():
    with pytest.raises(LPUnbounded):
        solve_lp([1.0, 0.0], A_ub=[[-1.0, 1.0]], b_ub=[1.0])


def test_free_variable():
    # max t - x  s.t. t <= 2x + 1, t <= -x + 4, x >= 0; optimum at x = 1, t = 3
    res = solve_lp([1.0, -1.0], A_ub=[[1.0, -2.0], [1.0, 1.0]], b_ub=[1.0, 4.0], free=[0])
    assert res.value == pytest.approx(2.0)
    assert np.allclose(res.solution, [3.0, 1.0])


@pytest.mark.parametrize("seed", range(25))
def test_matches_scipy_on_random_programs(seed):
    rng = np.random.default_rng(seed)
    n, m = 5, 4
    c = rng.normal(size=n)
    A = rng.random((m, n))
    b = rng.random(m) + 0.5
    ours = solve_lp(c, A_ub=A, b_ub=b, A_eq=np.ones((1, n)), b_eq=[1.0])
    ref = linprog(-c, A_ub=A, b_ub=b, A_eq=np.ones((1, n)), b_eq=[1.0], bounds=[(0, None)] * n)
    assert ref.status == 0
    assert ours.value == pytest.approx(-ref.fun, abs=1e-9)
    assert np.all(A @ ours.solution <= b + 1e-9)
