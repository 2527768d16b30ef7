"""Quasi-concave minimisation over polyhedral images.

Both solvers exploit that the minimum of a quasi-concave, cone-monotone
``f`` over ``P[S]`` is attained at a vertex of the upper image, and that the
minimum of ``f`` over the vertices of any outer approximation is a lower
bound.

``solve_primal_qcp`` cuts only at the vertex minimising ``f``.
``solve_dual_qcp`` keeps a primal and a dual outer approximation and picks
dual vertices that violate the optimality condition ``phi(t, .) >= 0``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionError, ContractError
from .lp import EQ, GE, LinearProgram, solve_lp
from .polyhedra import OuterApprox, PolyCone, add_halfspace, cone_interior_point
from .scalarization import (VlpProblem, coupling_phi, dual_cut, omega, solve_p1_d1,
                            solve_p2_d2, z_tolerance)
from .vlp import (MAX_ITER, IterationRecord, bootstrap_dual, dual_start, initial_outer_approx)

logger = logging.getLogger(__name__)

PHI_TOL = 1e-9
TIE_TOL = 1e-12


class Objective:
    """Extended-real objective ``f: R^q -> R u {-inf}`` with a per-point cache.

    Parameters
    ----------
    func
        Callable taking a q-vector.  May return ``-inf``; ``+inf`` at a
        selected vertex is treated as a contract violation.
    description
        Free-form tag used in logs and result files.
    """

    def __init__(self, func: Callable[[np.ndarray], float], description: str = "",
                 params: dict | None = None):
        self.func = func
        self.description = description
        self.params = params or {}
        self._cache: dict[bytes, float] = {}
        self.evaluations = 0

    def __call__(self, y) -> float:
        y = np.ascontiguousarray(y, dtype=float)
        key = y.tobytes()
        val = self._cache.get(key)
        if val is None:
            val = float(self.func(y))
            if math.isnan(val):
                raise ContractError(f"objective returned NaN at {y}")
            self._cache[key] = val
            self.evaluations += 1
        return val

    def clear_cache(self) -> None:
        self._cache.clear()


@dataclass
class QcpProblem:
    vlp: VlpProblem
    f: Objective

    @property
    def q(self) -> int:
        return self.vlp.q


@dataclass
class QcpResult:
    x: np.ndarray
    y: np.ndarray
    value: float
    iterations: int
    lp_solves: int
    failed_cuts: int = 0
    history: list = field(default_factory=list)
    lower_bounds: list = field(default_factory=list)
    algorithm: str = ""
    wall_time: float = 0.0
    approx: OuterApprox | None = None
    dual_approx: OuterApprox | None = None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "value": _json_float(self.value),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "iterations": self.iterations,
            "lp_solves": self.lp_solves,
            "failed_cuts": self.failed_cuts,
            "wall_time": self.wall_time,
        }


def _json_float(v: float):
    if math.isfinite(v):
        return v
    return "-inf" if v < 0 else "inf"


def vertex_argmin_f(f: Objective, vertices: np.ndarray) -> tuple[int, float]:
    """Index and value of the vertex minimising ``f``; ties go to the lexicographically smallest."""
    vals = np.array([f(v) for v in vertices])
    if np.any(vals == np.inf):
        bad = vertices[int(np.argmax(vals == np.inf))]
        raise ContractError(f"objective is +inf at vertex {bad}")
    best = vals.min()
    if np.isfinite(best):
        ties = np.flatnonzero(vals <= best + TIE_TOL * max(1.0, abs(best)))
    else:
        ties = np.flatnonzero(vals == best)
    if ties.size > 1:
        sub = vertices[ties]
        ties = ties[np.lexsort(sub.T[::-1])]
    i = int(ties[0])
    return i, float(vals[i])


def recover_preimage(vlp: VlpProblem, t, tol: float = 1e-6, backend=None) -> np.ndarray:
    """A feasible ``x`` with ``P x = t``, found by a zero-objective LP."""
    t = np.asarray(t, dtype=float)
    A = np.vstack([vlp.A, vlp.P])
    rhs = np.concatenate([vlp.b, t])
    sense = [GE] * vlp.m + [EQ] * vlp.q
    sol = solve_lp(LinearProgram(np.zeros(vlp.n), A, rhs, sense), backend)
    if not sol.optimal:
        raise AssumptionError(f"no feasible preimage for {t} ({sol.status.value})")
    x = sol.x
    if np.max(np.abs(vlp.P @ x - t)) > tol * max(1.0, np.max(np.abs(t))):
        raise AssumptionError("preimage residual too large")
    return x


def _contains_vertex(vertices: np.ndarray, t: np.ndarray) -> bool:
    scale = max(1.0, np.max(np.abs(t)))
    return bool(np.min(np.max(np.abs(vertices - t), axis=1)) <= 1e-9 * scale)


def _finish_x(vlp: VlpProblem, t: np.ndarray, x: np.ndarray | None, backend) -> np.ndarray:
    """Prefer the LP point when it maps onto ``t``; otherwise solve for a preimage."""
    if x is not None and np.max(np.abs(vlp.P @ x - t)) <= 1e-7 * max(1.0, np.max(np.abs(t))):
        return x
    try:
        return recover_preimage(vlp, t, backend=backend)
    except AssumptionError:
        if x is None:
            raise
        return x


def solve_primal_qcp(problem: QcpProblem, O0: OuterApprox | None = None, backend=None,
                     max_iter: int = MAX_ITER) -> QcpResult:
    """Cut at the ``f``-minimal vertex of the outer approximation until it lies in the image."""
    vlp, f = problem.vlp, problem.f
    start = time.perf_counter()
    approx = O0.copy() if O0 is not None else initial_outer_approx(vlp, backend)
    lp_solves = 0 if O0 is not None else len(approx.offsets)
    history, bounds = [], []
    x = None
    for it in range(1, max_iter + 1):
        idx, ft = vertex_argmin_f(f, approx.vertices)
        t = approx.vertices[idx].copy()
        bounds.append(ft)
        res = solve_p2_d2(vlp, t, backend)
        lp_solves += 1
        rec = IterationRecord(it, t=t, f_t=ft, z=res.z, cut_normal=res.w, cut_offset=res.offset)
        history.append(rec)
        if res.z <= z_tolerance(t):
            rec.action = "confirm"
            x = res.x
            break
        new = add_halfspace(approx, res.w, res.offset)
        if _contains_vertex(new.vertices, t):
            logger.debug("cut did not remove %s; accepting it", t)
            rec.action = "stalled"
            x = res.x
            break
        approx = new
        rec.action = "cut"
        rec.n_vertices = approx.vertices.shape[0]
    else:
        raise RuntimeError("iteration limit reached")
    x = _finish_x(vlp, t, x, backend)
    y = vlp.P @ x
    return QcpResult(x=x, y=y, value=f(y), iterations=it, lp_solves=lp_solves, history=history,
                     lower_bounds=bounds, algorithm="primal",
                     wall_time=time.perf_counter() - start, approx=approx)


def solve_dual_qcp(problem: QcpProblem, rule: str = "min_phi", O0: OuterApprox | None = None,
                   backend=None, max_iter: int = MAX_ITER) -> QcpResult:
    """Dual-driven outer approximation for quasi-concave minimisation.

    Each iteration solves one weighted-sum LP for the selected dual vertex
    ``t*``, cuts the dual approximation if ``t*`` lies outside the lower
    image, and always cuts the primal approximation with the supporting
    half-space found.  The next ``t*`` is a dual vertex violating
    ``phi(t, .) >= 0`` at the ``f``-minimal primal vertex ``t``: the most
    violating one for ``rule="min_phi"``, the first in insertion order for
    ``rule="first_violating"``.

    A failed cut is an iteration (after the first) whose primal half-space
    does not remove the primal vertex selected in the previous iteration.
    """
    if rule not in ("min_phi", "first_violating"):
        raise ValueError(f"unknown selection rule {rule!r}")
    vlp, f, c = problem.vlp, problem.f, problem.vlp.c
    start = time.perf_counter()
    approx = O0.copy() if O0 is not None else initial_outer_approx(vlp, backend)
    lp_solves = 0 if O0 is not None else len(approx.offsets)
    t_star, _ = dual_start(vlp)
    dual: OuterApprox | None = None
    history, bounds = [], []
    failed = 0
    prev_t = None
    for it in range(1, max_iter + 1):
        w = omega(t_star, c)
        res = solve_p1_d1(vlp, w, backend)
        lp_solves += 1
        y = vlp.P @ res.x
        gap = t_star[-1] - w @ y
        rec = IterationRecord(it, t_star=t_star.copy(), z=gap)
        history.append(rec)
        if dual is None:
            dual = bootstrap_dual(vlp, y)
        elif gap > z_tolerance(t_star):
            a, g = dual_cut(y, c)
            new = add_halfspace(dual, a, g)
            if _contains_vertex(new.vertices, t_star):
                dual.processed[_vertex_index(dual.vertices, t_star)] = True
            else:
                dual = new
        else:
            dual.processed[_vertex_index(dual.vertices, t_star)] = True
        gamma = float(w @ y)
        approx = add_halfspace(approx, w, gamma)
        if prev_t is not None and w @ prev_t >= gamma - 1e-9 * max(1.0, abs(gamma)):
            failed += 1
            rec.action = "failed"
        else:
            rec.action = "cut"
        rec.cut_normal, rec.cut_offset = w, gamma

        idx, ft = vertex_argmin_f(f, approx.vertices)
        t = approx.vertices[idx].copy()
        bounds.append(ft)
        rec.t, rec.f_t = t, ft
        rec.n_vertices = approx.vertices.shape[0]
        phis = np.array([coupling_phi(t, v, c) for v in dual.vertices])
        scale = max(1.0, np.max(np.abs(t)))
        violating = phis < -PHI_TOL * scale
        if not violating.any():
            break
        violating &= ~dual.processed
        if not violating.any():
            logger.warning("only confirmed dual vertices violate the optimality test; stopping")
            break
        cand = np.flatnonzero(violating)
        j = int(cand[np.argmin(phis[cand])]) if rule == "min_phi" else int(cand[0])
        t_star = dual.vertices[j].copy()
        rec.phi = float(phis[j])
        prev_t = t
    else:
        raise RuntimeError("iteration limit reached")
    x = _finish_x(vlp, t, None, backend)
    lp_solves += 1
    y = vlp.P @ x
    algo = "dual" if rule == "min_phi" else "dual-se"
    return QcpResult(x=x, y=y, value=f(y), iterations=it, lp_solves=lp_solves, failed_cuts=failed,
                     history=history, lower_bounds=bounds, algorithm=algo,
                     wall_time=time.perf_counter() - start, approx=approx, dual_approx=dual)


def _vertex_index(vertices: np.ndarray, v: np.ndarray) -> int:
    return int(np.argmin(np.max(np.abs(vertices - v), axis=1)))


@dataclass
class QcpModel:
    """Raw problem data before an interior point of the cone has been fixed.

    ``solve`` in :mod:`qcpvlp.runner` turns a model into a solvable
    :class:`QcpProblem`, lifting non-solid cones and flipping signs when the
    interior point found has a negative last coordinate.
    """

    P: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cone: PolyCone
    f: Objective
    c: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(self.b.size, self.P.shape[1])
        if self.c is not None:
            self.c = np.asarray(self.c, dtype=float).reshape(-1)

    @property
    def q(self) -> int:
        return self.P.shape[0]

    def to_problem(self) -> QcpProblem:
        """Solid cone with ``c_q = 1`` only; see :func:`qcpvlp.runner.prepare`."""
        c = self.c if self.c is not None else cone_interior_point(self.cone)
        return QcpProblem(VlpProblem(self.P, self.A, self.b, self.cone, c), self.f)
