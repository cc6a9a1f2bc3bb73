import numpy as np
import pytest
from scipy.optimize import linprog

from noisylasso.rng import make_rng
from noisylasso.simplex import LPError, simplex


def test_textbook_problem():
    # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    res = simplex([-3.0, -5.0], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18])
    assert res.status == "optimal"
    assert np.allclose(res.x, [2.0, 6.0]) and res.fun == pytest.approx(-36.0)


def test_equality_and_negative_rhs():
    res = simplex([1.0, 1.0], A_ub=[[-1.0, 0.0]], b_ub=[-1.0], A_eq=[[1.0, -1.0]], b_eq=[0.5])
    assert res.status == "optimal" and np.allclose(res.x, [1.0, 0.5])


def test_infeasible():
    assert simplex([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0]).status == "infeasible"


def test_unbounded():
    assert simplex([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0]).status == "unbounded"


def test_redundant_equalities():
    res = simplex([1.0, 2.0], A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0])
    assert res.status == "optimal" and res.fun == pytest.approx(1.0)


def test_iteration_cap():
    with pytest.raises(LPError):
        simplex([-3.0, -5.0], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18], max_iter=1)


@pytest.mark.parametrize("seed", range(25))
def test_matches_highs(seed):
    rng = make_rng(seed)
    m, n = rng.integers(2, 8), rng.integers(2, 8)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m) + 1.0
    c = rng.standard_normal(n)
    ours = simplex(c, A_ub=A, b_ub=b)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert ours.status == expected
    if expected == "optimal":
        assert ours.fun == pytest.approx(ref.fun, abs=1e-8)
