"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line and the terminal summary repeats all of
them under "acceptance criteria".
"""

import contextlib
import functools
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import record_criterion
from helpers import match_within, tiny_vlp
from qcpvlp.lp import SimplexSolver, optimality_residuals
from qcpvlp.polyhedra import HPolyhedron, OuterApprox, add_halfspace, dd_convert, same_point_set
from qcpvlp.problems import (dc_recover, example_75, gen_cqp_random, gen_lmp_random, image_polytope,
                             make_boundary_problem, make_dc_dual, make_example_41,
                             make_example_61, make_example_73, make_lmp, sin_floor_matrix)
from qcpvlp.runner import prepare, solve
from qcpvlp.scalarization import coupling_phi
from qcpvlp.vlp import benson_dual, benson_primal, geometric_duality_check

EX41_Y = np.array([1.084, 0.804])
EX41_PRIMAL = [[0.0, -0.3444], [1.084, 0.804], [1.177, 2.49]]
EX41_DUAL = [[-4.0, -4.707], [-3.277, -3.406], [-0.838, -0.272], [0.0, -0.3444]]
SEEDS = range(10)


@contextlib.contextmanager
def criterion(number, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        record_criterion(number, title, False, detail.get("text", ""))
        raise
    record_criterion(number, title, True, detail.get("text", ""))


# ---------------------------------------------------------------- shared runs

@functools.lru_cache(maxsize=None)
def lmp_model(q, m, n, seed):
    return make_lmp(gen_lmp_random(q, m, n, seed))


@functools.lru_cache(maxsize=None)
def cqp_model(seed):
    return gen_cqp_random(2, 10, seed)


@functools.lru_cache(maxsize=None)
def qcp_run(kind, key, algorithm):
    model = lmp_model(*key) if kind == "lmp" else cqp_model(key)
    return solve(model, algorithm)


@functools.lru_cache(maxsize=None)
def enumeration(kind, key):
    """Full primal and dual image enumeration of the (lifted) problem."""
    model = lmp_model(*key) if kind == "lmp" else cqp_model(key)
    prep = prepare(model)
    vlp = prep.problem.vlp
    return prep, benson_primal(vlp), benson_dual(vlp)


def oracle(kind, key):
    prep, run, _ = enumeration(kind, key)
    f = prep.problem.f
    return min(f(v) for v in run.approx.vertices)


def instances():
    out = [("lmp", (2, 20, 30, s)) for s in SEEDS]
    out += [("lmp", (3, 50, 30, s)) for s in SEEDS]
    out += [("cqp", s) for s in range(5)]
    return out


# ---------------------------------------------------------------- criteria

def test_criterion_01_example_primal():
    with criterion(1, "worked 2-D example, primal algorithm value and point") as d:
        t0 = time.perf_counter()
        res = solve(make_example_41(), "primal")
        elapsed = time.perf_counter() - t0
        d["text"] = f"value {res.value:.6f} at {np.round(res.y, 6).tolist()}, {elapsed:.3f}s"
        assert abs(res.value - (-2.494)) <= 5e-4
        assert np.max(np.abs(res.y - EX41_Y)) <= 5e-4
        assert elapsed < 1.0


def test_criterion_02_example_dual_iterations():
    with criterion(2, "worked 2-D example, dual algorithm with c=(-0.25,1)") as d:
        res = solve(make_example_41(), "dual", c=[-0.25, 1.0])
        d["text"] = f"{res.iterations} iterations, point {np.round(res.y, 6).tolist()}"
        assert np.max(np.abs(res.y - EX41_Y)) <= 5e-4
        assert res.iterations == 4


def test_criterion_03_full_images():
    with criterion(3, "full primal/dual image of the worked example and geometric duality") as d:
        vlp = prepare(make_example_41()).problem.vlp
        p, q = benson_primal(vlp), benson_dual(vlp)
        rep = geometric_duality_check(p.images.merged(q.images))
        d["text"] = (f"{rep.n_primal_vertices}<->{rep.n_dual_nonvertical_facets}, "
                     f"{rep.n_primal_facets}<->{rep.n_dual_vertices}, "
                     f"residual {rep.max_incidence_residual:.1e}")
        assert match_within(p.images.primal_points, EX41_PRIMAL, 5e-4)
        assert match_within(q.images.dual_points, EX41_DUAL, 5e-4)
        assert rep.ok
        assert (rep.n_primal_vertices, rep.n_dual_nonvertical_facets) == (3, 3)
        assert (rep.n_primal_facets, rep.n_dual_vertices) == (4, 4)
        assert rep.max_incidence_residual < 1e-6


def test_criterion_04_non_solid_lifting():
    with criterion(4, "non-solid cone through the lifting") as d:
        sols = [np.array([1, -1, 1.0]), np.array([-1, -1, -1.0])]
        vals = []
        for alg in ("primal", "dual", "dual-se"):
            res = solve(make_example_61(), alg)
            vals.append(res.value)
            assert abs(res.value + 5) <= 1e-6
            assert any(np.max(np.abs(res.x - s)) <= 1e-6 for s in sols)
        d["text"] = f"values {vals}"


def test_criterion_05_dc_example():
    with criterion(5, "DC example for q = 2..6") as d:
        times = []
        for q in range(2, 7):
            dc = make_example_73(q, "dual")
            t0 = time.perf_counter()
            res = solve(make_dc_dual(dc), "primal")
            x = dc_recover(dc, res.y)
            times.append(time.perf_counter() - t0)
            assert abs(dc.objective(x)) <= 1e-6
            assert abs(res.value) <= 1e-6
            assert np.max(np.abs(x - 1)) <= 1e-6
            assert times[-1] < 60
        d["text"] = "runtimes " + ", ".join(f"{t:.2f}s" for t in times)


def test_criterion_06_oracle_equivalence():
    with criterion(6, "primal and dual QCP algorithms equal the enumeration oracle") as d:
        worst = 0.0
        for kind, key in instances():
            ref = oracle(kind, key)
            for alg in ("primal", "dual"):
                val = qcp_run(kind, key, alg).value
                rel = abs(val - ref) / max(1.0, abs(ref))
                worst = max(worst, rel)
        d["text"] = f"{len(instances())} instances, worst relative gap {worst:.1e}"
        assert worst <= 1e-6


def test_criterion_07_iteration_trend():
    with criterion(7, "mean primal QCP iteration counts at desk scale") as d:
        m2 = np.mean([qcp_run("lmp", (2, 20, 30, s), "primal").iterations for s in SEEDS])
        m3 = np.mean([qcp_run("lmp", (3, 50, 30, s), "primal").iterations for s in SEEDS])
        d["text"] = f"q=2 (20,30): {m2:.1f}, q=3 (50,30): {m3:.1f}"
        assert 4 <= m2 <= 14
        assert 9 <= m3 <= 36


def test_criterion_08_failed_cuts():
    with criterion(8, "failed cuts, most-violating versus first-violating dual rule") as d:
        parts = []
        for q in (2, 3, 4):
            a = np.mean([qcp_run("lmp", (q, 50, 30, s), "dual").failed_cuts for s in SEEDS])
            b = np.mean([qcp_run("lmp", (q, 50, 30, s), "dual-se").failed_cuts for s in SEEDS])
            parts.append(f"q={q}: {a:.1f} vs {b:.1f}")
            d["text"] = "; ".join(parts)
            assert a <= b
            if q >= 3:
                assert a < b


class CheckingBackend:
    """Bundled simplex that verifies strong duality on every optimal solve."""

    def __init__(self):
        self.inner = SimplexSolver()
        self.optimal = 0
        self.worst = 0.0

    def solve(self, lp):
        sol = self.inner.solve(lp)
        if sol.optimal:
            r = optimality_residuals(lp, sol)
            scale = max(1.0, abs(sol.objective_value))
            self.worst = max(self.worst, r["gap"] / scale)
            assert r["primal"] <= 1e-7 * scale and r["dual"] <= 1e-7 * scale
            assert r["complementarity"] <= 1e-6 * scale and r["gap"] <= 1e-6 * scale
            self.optimal += 1
        return sol


@st.composite
def cut_sequences(draw):
    q = draw(st.integers(2, 4))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    cuts = []
    for _ in range(draw(st.integers(1, 8))):
        w = np.abs(rng.normal(size=q)) + 0.05
        cuts.append((w, float(w @ rng.uniform(0, 1, size=q))))
    return q, cuts


@settings(max_examples=150, deadline=None)
@given(cut_sequences())
def _incremental_matches_scratch(data):
    q, cuts = data
    h = HPolyhedron(np.eye(q), np.zeros(q))
    approx = OuterApprox.from_hrep(h)
    for w, g in cuts:
        h = h.with_row(w, g)
        approx = add_halfspace(approx, w, g)
        ref = dd_convert(h)
        assert same_point_set(approx.vertices, ref.points, 1e-6)
        assert same_point_set(approx.rays, ref.directions, 1e-6)


def test_criterion_09_invariants():
    with criterion(9, "weak duality, lower bounds, incremental enumeration, LP duality") as d:
        # weak duality on final vertex pairs of every enumerated instance
        worst_phi = np.inf
        pairs = [enumeration(kind, key)[1:] for kind, key in instances()]
        ex = prepare(make_example_41()).problem.vlp
        pairs.append((benson_primal(ex), benson_dual(ex)))
        pairs.append((benson_primal(tiny_vlp()), benson_dual(tiny_vlp())))
        for p, q in pairs:
            c = p.images.c
            for y in p.images.primal_points:
                for ys in q.images.dual_points:
                    worst_phi = min(worst_phi, coupling_phi(y, ys, c))
        assert worst_phi >= -1e-6
        # lower-bound monotonicity of the QCP runs
        runs = [qcp_run(kind, key, alg) for kind, key in instances() for alg in ("primal", "dual")]
        runs += [qcp_run("lmp", (q, 50, 30, s), alg) for q in (2, 4) for s in SEEDS
                 for alg in ("dual", "dual-se")]
        for res in runs:
            lb = np.asarray(res.lower_bounds)
            assert np.all(np.diff(lb) >= -1e-9 * np.maximum(1.0, np.abs(lb[:-1])))
            assert lb[-1] <= res.value + 1e-9 * max(1.0, abs(res.value))
        # incremental cuts agree with from-scratch enumeration
        _incremental_matches_scratch()
        # strong duality on every optimal LP of a representative set of solves
        backend = CheckingBackend()
        for model in (make_example_41(), make_example_61(), lmp_model(2, 20, 30, 0),
                      lmp_model(3, 50, 30, 0), cqp_model(0)):
            for alg in ("primal", "dual", "dual-se"):
                solve(model, alg, backend=backend)
        d["text"] = (f"min phi {worst_phi:.1e}, {len(runs)} bound sequences, "
                     f"{backend.optimal} LPs, worst relative gap {backend.worst:.1e}")


def test_criterion_10_boundary_problem():
    with criterion(10, "boundary problem guard and small instance") as d:
        P = sin_floor_matrix(1, 10)
        r = np.abs(P).sum(axis=1)
        nr = float(np.linalg.norm(r))
        Q = image_polytope(P)
        with pytest.raises(ValueError):
            make_boundary_problem(Q, L=2 * nr, Rbound=nr, c=2 * nr ** 2)
        with pytest.raises(ValueError):
            make_boundary_problem(Q, L=2 * nr, Rbound=nr, c=nr ** 2)
        dc, _ = example_75(1, 10)
        assert dc.meta["c"] == 2 * nr ** 2 + 1
        res = solve(make_dc_dual(dc), "primal")
        x = dc_recover(dc, res.y)
        # boundary of the interval P[-e, e]: its two endpoints, from all sign vectors
        signs = 1.0 - 2.0 * ((np.arange(2 ** 10)[:, None] >> np.arange(10)) & 1)
        image = signs @ P[0]
        grid = np.array([image.min(), image.max()])
        ref = float(np.min(grid ** 2))
        d["text"] = f"value {dc.objective(x):.6f}, brute force {ref:.6f}"
        assert abs(dc.objective(x) - ref) <= 1e-3
