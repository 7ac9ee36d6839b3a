import math

import numpy as np
import pytest

from oracles import literal_linesearch
from splitsys.errors import ConfigurationError, LinesearchFailure
from splitsys.geometry import Ball, Box, WholeSpace
from splitsys.harness import (ProblemInstance, generate_ill_conditioned, generate_planted_system,
                              oracle_solve)
from splitsys.operators import AffineOperator, L1Subdifferential, NormalCone, ZeroOperator
from splitsys.solver import (AlgoParams, component_step, linesearch, residual, solve,
                             solve_baseline_fb)

P = AlgoParams(theta=0.5, delta=0.4)


def single(A, B=None, X=None, xstar=None, R=10.0):
    n = A.n
    return ProblemInstance([(A, B or ZeroOperator(n))], X or WholeSpace(n), R, xstar)


def two_component(inside=False):
    A1, A2 = AffineOperator(np.eye(2)), AffineOperator(2 * np.eye(2))
    comps = [(A1, NormalCone(Box([-1, -1], [1, 1]))), (A2, NormalCone(Ball([0, 0], 1)))]
    X = Box([-0.7, -0.7], [0.7, 0.7]) if inside else Box([-2, -2], [2, 2])
    return ProblemInstance(comps, X, 1.0, np.zeros(2))


# regression fixtures, checked against the literal term-by-term evaluation below
LINESEARCH_CASES = [
    # (M scale, beta, z, J, expected j, expected alpha, expected x_bar)
    (1.0, 1.0, [1.0, 0.0], [0.0, 0.0], 1, 0.5, [0.5, 0.0]),
    (2.0, 0.25, [1.0, 0.0], [0.5, 0.0], 0, 1.0, [0.5, 0.0]),
]


@pytest.mark.parametrize("scale, beta, z, J, j, alpha, xbar", LINESEARCH_CASES)
def test_linesearch_fixtures(scale, beta, z, J, j, alpha, xbar):
    A = AffineOperator(scale * np.eye(2))
    B = ZeroOperator(2)
    z, J = np.array(z), np.array(J)
    ref = literal_linesearch(lambda y: [scale * t for t in y], B.selection, z, J, beta, 0.5, 0.4, 10)
    assert ref[:2] == (j, alpha)
    ls = linesearch(A, B, z, J, beta, P, radius=10)
    assert (ls.j, ls.alpha) == (j, alpha)
    np.testing.assert_allclose(ls.x_bar, xbar)
    np.testing.assert_array_equal(ls.u_bar, [0, 0])


def test_linesearch_matches_literal_on_random_affine(rng):
    for _ in range(50):
        n = 3
        G = rng.standard_normal((n, n))
        M = G.T @ G + 3 * (lambda S: S - S.T)(rng.standard_normal((n, n)))
        A, B = AffineOperator(M), ZeroOperator(n)
        z = rng.standard_normal(n)
        beta = rng.uniform(0.1, 1.0)
        J = z - beta * A(z)
        ref = literal_linesearch(lambda y: list(M @ np.array(y)), B.selection, z, J, beta, 0.5, 0.4, 40)
        ls = linesearch(A, B, z, J, beta, P, radius=1.0)
        assert ls.j == ref[0]


def test_linesearch_precondition():
    with pytest.raises(ValueError):
        linesearch(AffineOperator(np.eye(2)), ZeroOperator(2), np.ones(2), np.ones(2), 1.0, P, radius=1)


def test_linesearch_failure_on_wrong_direction():
    # J pointing away from the zero of A: no step satisfies the inequality
    A = AffineOperator(np.eye(1))
    with pytest.raises(LinesearchFailure):
        linesearch(A, ZeroOperator(1), np.array([1.0]), np.array([2.0]), 1.0,
                   AlgoParams(max_linesearch=10), radius=1)


def test_linesearch_reports_domain_exit():
    # z = 2 lies outside C = [0, 1]; probes past y = 1 leave dom B and are skipped
    A, B = AffineOperator(np.eye(1)), NormalCone(Box([0.0], [1.0]))
    z = np.array([2.0])
    J = B.resolvent(1.0, z - A(z))
    with pytest.raises(LinesearchFailure, match="left the operator domain"):
        linesearch(A, B, z, J, 1.0, AlgoParams(delta=0.9), radius=1)
    # with a looser delta the probe at the boundary point y = 1 is accepted
    assert linesearch(A, B, z, J, 1.0, P, radius=1).j == 1


def test_component_step_solved():
    a = np.array([0.3, -0.2])
    step = component_step(AffineOperator(np.eye(2), -a), ZeroOperator(2), WholeSpace(2), a, 1.0, P, 10)
    assert step.solved and step.linesearch is None
    np.testing.assert_array_equal(step.z_next, a)


def test_component_step_examples():
    A = AffineOperator(np.eye(2))
    z = np.array([1.0, 0.0])
    s = component_step(A, ZeroOperator(2), WholeSpace(2), z, 1.0, P, 10)
    assert not s.solved
    np.testing.assert_allclose(s.linesearch.x_bar, [0.5, 0])
    np.testing.assert_allclose(s.normal, [0.5, 0])
    np.testing.assert_allclose(s.z_next, [0.5, 0])
    s = component_step(A, ZeroOperator(2), Box([0.75, -1], [2, 1]), z, 1.0, P, 10)
    np.testing.assert_allclose(s.z_next, [0.75, 0])


def test_residual_examples():
    inst = single(AffineOperator(np.eye(2)))
    assert residual(inst, 1.0, [1.0, 0.0]) == pytest.approx(1.0)
    planted = generate_planted_system(4, 3, seed=5)
    assert residual(planted, 0.55, planted.known_solution) <= 1e-10


def test_solve_single_zero_of_A():
    a = np.array([0.7, -1.3, 2.0])
    inst = single(AffineOperator(np.eye(3), -a), xstar=a)
    res = solve(inst, x0=np.zeros(3), verify=True)
    assert res.status == "solved"
    assert residual(inst, 0.55, res.x) <= 1e-6
    np.testing.assert_allclose(res.x, a, atol=1e-5)


def test_solve_two_component_example():
    # X = [-2, 2]^2 is not inside either C_i, so probes can leave dom B_i:
    # the run stops with a diagnosed linesearch failure while the oracle finds 0
    inst = two_component()
    np.testing.assert_allclose(oracle_solve(inst), [0, 0], atol=1e-4)
    with pytest.warns(UserWarning, match="not contained"):
        res = solve(inst, x0=[1.5, -0.8])
    assert res.status == "linesearch_failure"
    assert "operator domain" in str(res.error)


def test_solve_two_component_with_X_inside_sets():
    inst = two_component(inside=True)
    assert inst.validate() == []
    res = solve(inst, x0=inst.X.project([1.5, -0.8]), verify=True)
    assert res.status == "solved"
    np.testing.assert_allclose(res.x, [0, 0], atol=1e-5)


def test_solve_starting_at_solution_stops_at_k0():
    inst = two_component(inside=True)
    res = solve(inst, x0=np.zeros(2))
    assert res.status == "solved" and res.reason == "all_components_fixed" and res.iterations == 0
    assert len(res.trace) == 1


def test_solve_projects_start_with_warning():
    inst = generate_planted_system(2, 2, seed=1)
    with pytest.warns(UserWarning, match="outside X"):
        res = solve(inst, x0=[50.0, 50.0])
    assert res.solved


def test_solve_max_iterations_and_trace_length():
    inst = generate_planted_system(50, 1, seed=3)
    res = solve(inst, AlgoParams(max_outer=3))
    assert res.status == "max_iterations"
    assert len(res.trace) == 4 and res.iterations == 3


def test_solve_linesearch_failure_is_reported():
    inst = single(AffineOperator(np.eye(1)), NormalCone(Box([0.0], [1.0])), X=Box([-3.0], [3.0]))
    with pytest.warns(UserWarning):
        res = solve(inst, AlgoParams(delta=0.9, beta_schedule=1.0), x0=[2.0])
    assert res.status == "linesearch_failure"
    assert res.error.component == 0 and res.error.iteration == 0


def test_solve_deterministic():
    inst = generate_planted_system(10, 2, seed=11, structure="mixed_l1")
    a, b = solve(inst), solve(inst)
    assert a.trace.residuals == b.trace.residuals
    assert all(np.array_equal(x, y) for x, y in zip(a.trace.iterates, b.trace.iterates))


@pytest.mark.parametrize("schedule", ["midpoint", "geometric", 0.3, lambda k: 0.2 + 0.1 * (k % 3)])
def test_beta_schedules(schedule):
    inst = generate_planted_system(5, 2, seed=2, structure="mixed_l1")
    p = AlgoParams(beta_schedule=schedule)
    res = solve(inst, p, verify=True)
    assert res.solved
    assert all(p.beta_lo <= b <= p.beta_hi for b in res.trace.betas)


def test_geometric_schedule_spans_bounds():
    p = AlgoParams(beta_schedule="geometric")
    assert p.beta(0) == pytest.approx(0.1) and p.beta(9) == pytest.approx(1.0)
    assert p.beta(10) == pytest.approx(0.1)


@pytest.mark.parametrize("kw", [
    dict(delta=1.5), dict(theta=0.0), dict(beta_lo=0.0), dict(beta_lo=2.0, beta_hi=1.0),
    dict(tol_outer=0.0), dict(beta_schedule=5.0), dict(beta_schedule="random"), dict(max_outer=0),
])
def test_params_validation(kw):
    with pytest.raises(ConfigurationError):
        AlgoParams(**kw)


def test_iterates_stay_in_X():
    inst = generate_planted_system(10, 5, seed=4)
    res = solve(inst)
    for x in res.trace.iterates:
        assert inst.X.distance(x) <= 1e-10


def test_baseline_examples():
    a = np.array([1.0, -2.0])
    inst = single(AffineOperator(np.eye(2), -a), X=Box([-5, -5], [5, 5]))
    res = solve_baseline_fb(inst, 0.5, max_iter=200, tol=1e-10, x0=np.zeros(2))
    assert res.status == "solved"
    np.testing.assert_allclose(res.x, a, atol=1e-9)
    # linear rate 1/2 per step
    r = res.trace.residuals
    assert r[5] / r[4] == pytest.approx(0.5)

    C = Box([0, 0], [1, 1])
    proj = single(AffineOperator(np.zeros((2, 2))), NormalCone(C), X=Box([-5, -5], [5, 5]))
    res = solve_baseline_fb(proj, 1.0, tol=1e-12, x0=np.array([3.0, -2.0]))
    assert res.iterations == 1
    np.testing.assert_array_equal(res.x, [1.0, 0.0])


def test_baseline_diverges_with_large_step():
    inst = single(AffineOperator(np.array([[100.0]])), X=Box([-1.0], [1.0]))
    res = solve_baseline_fb(inst, 0.05, max_iter=100, tol=1e-6, x0=np.array([1.0]))
    assert res.status == "max_iterations"
    r = res.trace.residuals
    # scalar recurrence x <- (1 - 5) x
    assert r[1] / r[0] == pytest.approx(4.0)


def test_baseline_requires_single_component():
    with pytest.raises(ConfigurationError):
        solve_baseline_fb(two_component(), 0.1)


def test_trace_csv(tmp_path):
    res = solve(two_component(inside=True), x0=[0.7, -0.5])
    path = tmp_path / "t.csv"
    res.trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,residual,dist_to_star,beta,linesearch_total,time_ms"
    assert len(lines) == len(res.trace) + 1
    assert float(lines[1].split(",")[1]) == res.trace.residuals[0]


def test_ill_conditioned_solve_backtracks():
    inst = generate_ill_conditioned(n=2, L=100.0)
    res = solve(inst, verify=True)
    assert res.solved and res.trace.max_linesearch_j() >= 5
    assert math.isfinite(res.trace.residuals[-1])
