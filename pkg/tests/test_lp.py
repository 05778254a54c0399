"""LP kernel tests: hand problems, duality, degeneracy, validation."""

import numpy as np
import pytest

from stgames.lp import LinearProgram, LpSolution, solve_lp


def _lp(c, a, senses, b, **kw):
    return LinearProgram(np.asarray(c, float), np.asarray(a, float),
                         tuple(senses), np.asarray(b, float), **kw)


def test_basic_minimum():
    # min -x1 - 2 x2 over x1 + x2 <= 4, x1 <= 3, x2 <= 2
    sol = solve_lp(_lp([-1, -2], [[1, 1], [1, 0], [0, 1]],
                       ["<=", "<=", "<="], [4, 3, 2]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-6.0, abs=1e-9)
    assert sol.x == pytest.approx([2.0, 2.0], abs=1e-9)


def test_maximize_flag():
    sol = solve_lp(_lp([3, 1], [[1, 1]], ["<="], [2], maximize=True))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(6.0, abs=1e-9)
    assert sol.x == pytest.approx([2.0, 0.0], abs=1e-9)


def test_equality_rows():
    # min x1 + x2 with x1 + 2 x2 == 3: put everything on x2
    sol = solve_lp(_lp([1, 1], [[1, 2]], ["=="], [3]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.5, abs=1e-9)
    assert sol.x == pytest.approx([0.0, 1.5], abs=1e-9)


def test_beale_degenerate_cycle_guard():
    # Classic cycling instance for naive pivoting; Bland must reach -0.05.
    c = [-0.75, 150.0, -0.02, 6.0]
    a = [[0.25, -60.0, -0.04, 9.0],
         [0.5, -90.0, -0.02, 3.0],
         [0.0, 0.0, 1.0, 0.0]]
    sol = solve_lp(_lp(c, a, ["<=", "<=", "<="], [0.0, 0.0, 1.0]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)
    assert sol.x == pytest.approx([0.04, 0.0, 1.0, 0.0], abs=1e-9)


def test_infeasible_detected():
    sol = solve_lp(_lp([1, 1], [[1, 1]], ["=="], [-1]))
    assert sol.status == "infeasible"
    sol = solve_lp(_lp([0, 0], [[1, 0], [1, 0]], ["<=", ">="], [1, 2]))
    assert sol.status == "infeasible"


def test_unbounded_detected():
    sol = solve_lp(_lp([-1, 0], [[1, -1]], ["=="], [0]))
    assert sol.status == "unbounded"


def test_two_sided_bounds():
    sol = solve_lp(_lp([1], [[1]], ["<="], [10],
                       lower=np.asarray([-2.0]), upper=np.asarray([3.0])))
    assert sol.objective == pytest.approx(-2.0, abs=1e-9)
    sol = solve_lp(_lp([-1], [[1]], ["<="], [10],
                       lower=np.asarray([-2.0]), upper=np.asarray([3.0])))
    assert sol.x == pytest.approx([3.0], abs=1e-9)


def test_crossed_bounds_infeasible():
    sol = solve_lp(_lp([1], [[1]], ["<="], [10],
                       lower=np.asarray([2.0]), upper=np.asarray([1.0])))
    assert sol.status == "infeasible"


def test_free_variable_split():
    # min x with x >= -5 as a row; x unbounded in sign
    sol = solve_lp(_lp([1], [[1]], [">="], [-5],
                       lower=np.asarray([-np.inf])))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-5.0, abs=1e-9)


def test_shadow_price_sign():
    # min -x over x <= 1: one more unit of rhs lowers the optimum by 1.
    sol = solve_lp(_lp([-1], [[1]], ["<="], [1]))
    assert sol.duals == pytest.approx([-1.0], abs=1e-9)


def test_redundant_equality_rows_dropped():
    # Duplicate equality row: still solvable, duplicate dual reported 0.
    sol = solve_lp(_lp([1, 1], [[1, 1], [1, 1]], ["==", "=="], [2, 2]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(2.0, abs=1e-9)


def test_duality_on_random_feasible_bounded_problems():
    # b = A x0 keeps the problem feasible; c > 0 keeps it bounded below.
    # Strong duality and complementary slackness pin the reported duals.
    rng = np.random.default_rng(1234)
    for trial in range(60):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m, 6))
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0.1, 2.0, size=n)
        b = a @ x0
        c = rng.uniform(0.05, 2.0, size=n)
        sol = solve_lp(_lp(c, a, ["=="] * m, b))
        assert sol.status == "optimal", f"trial {trial}"
        y = sol.duals
        assert abs(float(c @ sol.x) - float(y @ b)) <= 1e-6, f"trial {trial}"
        reduced = c - a.T @ y
        assert reduced.min() >= -1e-6, f"trial {trial}"
        assert abs(float(reduced @ sol.x)) <= 1e-6, f"trial {trial}"


def test_duality_with_inequalities():
    rng = np.random.default_rng(99)
    for trial in range(40):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0.0, 1.0, size=n)
        slack = rng.uniform(0.0, 1.0, size=m)
        b = a @ x0 + slack
        c = rng.uniform(0.05, 2.0, size=n)
        sol = solve_lp(_lp(c, a, ["<="] * m, b))
        assert sol.status == "optimal"
        y = sol.duals
        # <= rows in a minimization: shadow prices are nonpositive here
        # because loosening a <= constraint can only lower the minimum.
        assert y.max() <= 1e-7, f"trial {trial}: {y}"
        assert abs(float(c @ sol.x) - float(y @ b)) <= 1e-6
        reduced = c - a.T @ y
        assert reduced.min() >= -1e-6
        assert abs(float(reduced @ sol.x)) <= 1e-6


def test_dimension_validation():
    with pytest.raises(ValueError):
        solve_lp(_lp([1, 2], [[1, 1, 1]], ["<="], [1]))
    with pytest.raises(ValueError):
        solve_lp(_lp([1, 2], [[1, 1]], ["<="], [1, 2]))
    with pytest.raises(ValueError):
        solve_lp(_lp([1, 2], [[1, 1]], ["<<"], [1]))
    with pytest.raises(ValueError):
        solve_lp(_lp([1], [[1]], ["<="], [1], lower=np.zeros(3)))


def test_solution_reports_iterations():
    sol = solve_lp(_lp([-1, -2], [[1, 1]], ["<="], [4]))
    assert isinstance(sol, LpSolution)
    assert sol.iterations >= 1
