import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipband.simplex import Status, maximize


def test_textbook_problem():
    # max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36
    res = maximize([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.status is Status.OPTIMAL
    assert res.value == pytest.approx(36.0)
    assert np.allclose(res.x, [2, 6])
    # shadow prices of the textbook problem
    assert np.allclose(res.duals, [0, 1.5, 1])


def test_unbounded():
    res = maximize([1, 1], [[1, -1]], [1])
    assert res.status is Status.UNBOUNDED


def test_rejects_negative_rhs():
    with pytest.raises(ValueError):
        maximize([1], [[1]], [-1])


def test_degenerate_vertex_terminates():
    # classic cycling example for Dantzig's rule; Bland must terminate
    c = [10, -57, -9, -24]
    A = [[0.5, -5.5, -2.5, 9], [0.5, -1.5, -0.5, 1], [1, 0, 0, 0]]
    res = maximize(c, A, [0, 0, 1])
    assert res.status is Status.OPTIMAL
    assert res.value == pytest.approx(1.0)


@given(st.integers(0, 100_000), st.integers(1, 5), st.integers(1, 5))
@settings(max_examples=150, deadline=None)
def test_matches_scipy(seed, m, n):
    from scipy.optimize import linprog

    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 2, size=(m, n))
    b = rng.uniform(0.1, 2, size=m)
    c = rng.uniform(-1, 2, size=n)
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    res = maximize(c, A, b)
    assert res.status is Status.OPTIMAL
    assert res.value == pytest.approx(-ref.fun, rel=1e-9, abs=1e-12)
    # strong duality
    assert float(b @ res.duals) == pytest.approx(res.value, rel=1e-9, abs=1e-12)
