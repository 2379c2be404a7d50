from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_simplex
from qarelay.solver.lp import EQ, GE, LE, LinearProgram, LPStatus, solve_lp


def test_textbook_example():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    lp = LinearProgram(c=[3, 5], A=[[1, 0], [0, 2], [3, 2]], b=[4, 12, 18])
    res = solve_lp(lp)
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(36.0, abs=1e-12)
    assert np.allclose(res.x, [2, 6], atol=1e-12)


def test_exact_oracle_agrees_on_textbook_example():
    x, value = exact_simplex([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert value == 36 and x == [Fraction(2), Fraction(6)]


def test_mixed_senses_and_bounds():
    # max x + y, x + y >= 1, x - y = 0, x <= 2.5 (bound), y free up to 10
    lp = LinearProgram(c=[1, 1], A=[[1, 1], [1, -1]], b=[1, 0], senses=[GE, EQ], lower=[0, 0], upper=[2.5, 10])
    for backend in ("simplex", "highs"):
        res = solve_lp(lp, backend)
        assert res.value == pytest.approx(5.0, abs=1e-10)


def test_negative_lower_bound():
    lp = LinearProgram(c=[-1], A=[[1]], b=[3], lower=[-2], upper=[5])
    res = solve_lp(lp)
    assert res.x[0] == pytest.approx(-2.0)


def test_infeasible():
    lp = LinearProgram(c=[1, 1], A=[[1, 1], [1, 1]], b=[1, 2], senses=[LE, GE])
    assert solve_lp(lp).status is LPStatus.INFEASIBLE
    assert solve_lp(lp, "highs").status is LPStatus.INFEASIBLE


def test_unbounded():
    lp = LinearProgram(c=[1, 0], A=[[0, 1]], b=[1])
    assert solve_lp(lp).status is LPStatus.UNBOUNDED
    assert solve_lp(lp, "highs").status is LPStatus.UNBOUNDED


def test_degenerate_cycling_example():
    # Beale's example cycles under naive Dantzig pricing
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = solve_lp(LinearProgram(c=c, A=A, b=[0, 0, 1]))
    assert res.value == pytest.approx(0.05, abs=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        LinearProgram(c=[1], A=[[1]], b=[1, 2])
    with pytest.raises(ValueError):
        LinearProgram(c=[1], A=[[1]], b=[1], senses=["<"])
    with pytest.raises(ValueError):
        LinearProgram(c=[1], A=[[1]], b=[1], lower=[2], upper=[1])
    with pytest.raises(ValueError):
        solve_lp(LinearProgram(c=[1], A=[[1]], b=[1]), backend="glpk")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_simplex_matches_exact_rational_oracle(n, m, seed):
    rng = np.random.default_rng(seed)
    c = rng.integers(-3, 6, n)
    A = rng.integers(0, 5, (m, n))
    A[:, A.sum(axis=0) == 0] = 1  # keep the problem bounded
    b = rng.integers(0, 10, m)
    _, exact = exact_simplex(c.tolist(), A.tolist(), b.tolist())
    res = solve_lp(LinearProgram(c=c, A=A, b=b))
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(float(exact), abs=1e-9)
    assert np.all(A @ res.x <= b + 1e-9) and np.all(res.x >= -1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simplex_matches_highs(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(2, 7), rng.integers(1, 6)
    lp = LinearProgram(
        c=rng.normal(size=n), A=rng.normal(size=(m, n)), b=rng.uniform(0, 3, m),
        senses=list(rng.choice([LE, GE], m)), lower=np.zeros(n), upper=rng.uniform(0.5, 3, n),
    )
    a, b = solve_lp(lp, "simplex"), solve_lp(lp, "highs")
    assert a.status is b.status
    if a.is_optimal:
        assert a.value == pytest.approx(b.value, abs=1e-8)
