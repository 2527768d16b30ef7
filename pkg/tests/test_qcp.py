import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import tiny_vlp
from qcpvlp.errors import AssumptionError, ContractError
from qcpvlp.problems import gen_lmp_random, make_example_41, make_lmp, product_objective
from qcpvlp.qcp import (Objective, QcpProblem, recover_preimage, solve_dual_qcp,
                        solve_primal_qcp, vertex_argmin_f)
from qcpvlp.runner import oracle_value, prepare, solve
from qcpvlp.scalarization import coupling_phi


def ex41(c=(-0.25, 1.0)):
    return prepare(make_example_41(c)).problem


def test_primal_example():
    res = solve_primal_qcp(ex41())
    assert res.value == pytest.approx(-2.494, abs=5e-4)
    np.testing.assert_allclose(res.y, [1.084, 0.804], atol=5e-4)


def test_dual_example_four_iterations():
    res = solve_dual_qcp(ex41())
    np.testing.assert_allclose(res.y, [1.084, 0.804], atol=5e-4)
    assert res.iterations == 4


def test_constant_objective_terminates():
    const = Objective(lambda y: 3.0, "const")
    p = QcpProblem(tiny_vlp(), const)
    r1, r2 = solve_primal_qcp(p), solve_dual_qcp(p)
    assert r1.value == r2.value == 3.0
    assert r2.failed_cuts == 0
    np.testing.assert_allclose(r1.y, [0, 0], atol=1e-12)


def test_argmin_product():
    i, v = vertex_argmin_f(product_objective(), np.array([[1.0, 1.0], [2.0, 0.1]]))
    assert i == 1 and v == pytest.approx(0.2)


def test_argmin_minus_infinity_wins():
    f = Objective(lambda y: -np.inf if y[0] < 0 else y[1], "dom")
    i, v = vertex_argmin_f(f, np.array([[1.0, -5.0], [-1.0, 3.0]]))
    assert i == 1 and v == -np.inf


def test_argmin_ties_lexicographic():
    f = Objective(lambda y: 0.0, "zero")
    V = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 1.0]])
    assert vertex_argmin_f(f, V)[0] == 2


def test_argmin_plus_infinity_is_contract_error():
    f = Objective(lambda y: np.inf, "bad")
    with pytest.raises(ContractError):
        vertex_argmin_f(f, np.zeros((1, 2)))


def test_nan_objective_is_contract_error():
    with pytest.raises(ContractError):
        Objective(lambda y: np.nan)(np.zeros(2))


def test_recover_preimage():
    p = ex41()
    vlp = p.vlp
    res = solve_primal_qcp(p)
    x = recover_preimage(vlp, res.y)
    np.testing.assert_allclose(vlp.P @ x, res.y, atol=1e-9)
    assert vlp.is_feasible(x)
    x0 = np.array([0.1, 0.1, 0.1, 0.1])
    assert vlp.is_feasible(x0)
    np.testing.assert_allclose(vlp.P @ recover_preimage(vlp, vlp.P @ x0), vlp.P @ x0, atol=1e-9)
    with pytest.raises(AssumptionError):
        recover_preimage(vlp, [50.0, 50.0])


def test_lmp_matches_oracle():
    model = make_lmp(gen_lmp_random(2, 20, 30, 7))
    ref, _ = oracle_value(model)
    for alg in ("primal", "dual", "dual-se"):
        assert solve(model, alg).value == pytest.approx(ref, rel=1e-6)


def _check_result(problem, res):
    vlp = problem.vlp
    assert vlp.is_feasible(res.x)
    assert res.value == problem.f(vlp.P @ res.x)
    lb = np.array(res.lower_bounds)
    assert np.all(np.diff(lb) >= -1e-9 * np.maximum(1, np.abs(lb[:-1])))
    assert lb[-1] <= res.value + 1e-9 * max(1, abs(res.value))
    # the returned image is a vertex of the final outer approximation
    d = np.max(np.abs(res.approx.vertices - res.y), axis=1)
    assert d.min() <= 1e-6 * max(1, np.abs(res.y).max())


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_lmp_invariants(seed, q):
    model = make_lmp(gen_lmp_random(q, 8, 6, seed))
    problem = prepare(model).problem
    p = solve_primal_qcp(problem)
    d = solve_dual_qcp(problem)
    s = solve_dual_qcp(problem, rule="first_violating")
    for res in (p, d, s):
        _check_result(problem, res)
        assert res.value == pytest.approx(p.value, rel=1e-6)
        # factors of the product stay positive at the solution
        assert np.all(problem.vlp.P @ res.x > 0)
    # no reference point is sent to the LP twice
    ts = [rec.t.tobytes() for rec in p.history]
    assert len(ts) == len(set(ts))
    for res in (d, s):
        stars = [rec.t_star.tobytes() for rec in res.history]
        assert len(stars) == len(set(stars))
        # certificate at termination: phi(t, .) >= 0 on the final dual vertices
        phis = [coupling_phi(res.y, v, problem.vlp.c) for v in res.dual_approx.vertices]
        assert min(phis) >= -1e-6 * max(1, np.abs(res.y).max())


def test_unknown_rule():
    with pytest.raises(ValueError):
        solve_dual_qcp(ex41(), rule="random")


def test_monotonicity_spot_check_example():
    # along the cone directions (-1, 0) and (0, 1) the objective does not decrease
    f = make_example_41().f
    rng = np.random.default_rng(0)
    for _ in range(1000):
        y = np.array([rng.uniform(0, 1.2), rng.uniform(-0.4, 4.5)])
        d = rng.uniform(0, 1, size=2) * np.array([-1.0, 1.0])
        z = y + d
        if z[0] >= 0 and z[1] <= 4.5:
            assert f(y) <= f(z) + 1e-12
