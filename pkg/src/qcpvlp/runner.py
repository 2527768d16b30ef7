"""Entry point that prepares a model for the solvers and maps results back.

Non-solid cones go through the lifting.  If the interior point of the
cone can only be normalised with a negative last coordinate, the problem is
solved for ``(-C, -P, -c)`` with ``y -> f(-y)`` and the image is negated
afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lifting import LiftedProblem, lift_problem, project_back
from .polyhedra import PolyCone, cone_interior_point
from .qcp import (Objective, QcpModel, QcpProblem, QcpResult, solve_dual_qcp,
                  solve_primal_qcp)
from .scalarization import VlpProblem
from .vlp import benson_dual, benson_primal

ALGORITHMS = ("primal", "dual", "dual-se", "benson-primal", "benson-dual")


@dataclass
class Prepared:
    problem: QcpProblem
    lifted: LiftedProblem | None = None
    flipped: bool = False


def _flip(model: QcpModel, c: np.ndarray) -> QcpModel:
    base = model.f
    f = Objective(lambda y: base(-y), f"flipped({base.description})", dict(base.params))
    cone = PolyCone(-model.cone.Y, -model.cone.Z)
    return QcpModel(-model.P, model.A, model.b, cone, f, -c, model.name)


def prepare(model: QcpModel, c=None) -> Prepared:
    """Build a solvable problem with a solid cone and ``c_q = 1``."""
    lifted = None
    if not model.cone.is_solid:
        lifted = lift_problem(model)
        model = lifted.lifted
    if c is None:
        c = model.c if model.c is not None else cone_interior_point(model.cone)
    c = np.asarray(c, dtype=float)
    if c.size != model.q:
        raise ValueError(f"interior point has length {c.size}, expected {model.q}")
    flipped = False
    if c[-1] < 0:
        model = _flip(model, c)
        c = -c
        flipped = True
    if c[-1] <= 0:
        raise ValueError("interior point needs a nonzero last coordinate")
    c = c / c[-1]
    vlp = VlpProblem(model.P, model.A, model.b, model.cone, c)
    return Prepared(QcpProblem(vlp, model.f), lifted, flipped)


def _unflip(result: QcpResult, model: QcpModel) -> QcpResult:
    result.y = model.P @ result.x
    result.value = model.f(result.y)
    return result


def solve(model: QcpModel, algorithm: str = "primal", c=None, backend=None) -> QcpResult:
    """Solve a quasi-concave model with one of the QCP algorithms."""
    if algorithm not in ("primal", "dual", "dual-se"):
        raise ValueError(f"algorithm {algorithm!r} does not return a QCP solution")
    prep = prepare(model, c)
    if algorithm == "primal":
        res = solve_primal_qcp(prep.problem, backend=backend)
    else:
        rule = "min_phi" if algorithm == "dual" else "first_violating"
        res = solve_dual_qcp(prep.problem, rule=rule, backend=backend)
    if prep.lifted is not None:
        res = project_back(res, prep.lifted)
    elif prep.flipped:
        res = _unflip(res, model)
    return res


def oracle_value(model: QcpModel, backend=None) -> tuple[float, np.ndarray]:
    """Minimum of ``f`` over all vertices of the (lifted) upper image.

    Enumerates the whole upper image with the primal Benson algorithm and
    scans every vertex; meant as a brute-force reference.
    """
    prep = prepare(model)
    run = benson_primal(prep.problem.vlp, backend=backend)
    f = prep.problem.f
    vals = np.array([f(v) for v in run.approx.vertices])
    i = int(np.argmin(vals))
    y = run.approx.vertices[i]
    if prep.lifted is not None:
        y = prep.lifted.project(y)
    elif prep.flipped:
        y = -y
    return float(vals[i]), y


def solve_vlp(model: QcpModel, algorithm: str, c=None, backend=None):
    """Run a full Benson enumeration on the model's vector linear program."""
    prep = prepare(model, c)
    if algorithm == "benson-primal":
        return prep, benson_primal(prep.problem.vlp, backend=backend)
    if algorithm == "benson-dual":
        return prep, benson_dual(prep.problem.vlp, backend=backend)
    raise ValueError(f"unknown enumeration algorithm {algorithm!r}")
