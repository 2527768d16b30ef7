"""One-dimensional lifting for ordering cones with empty interior.

The image ``P x`` is extended by the coordinate ``-e @ P x`` and the cone
``C = cone(Y)`` is replaced by ``R = cone([I, (Y; -e @ Y)])``, which is
solid.  Points of the lifted upper image lying on ``{e @ y = 0}`` project
onto the original upper image, and the lifted objective is ``-inf`` off
that hyperplane's upper side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPointedError, QcpError
from .polyhedra import PolyCone
from .qcp import Objective, QcpModel, QcpResult
from .scalarization import VlpProblem

LIFT_TOL = 1e-7
HYPERPLANE_TOL = 1e-6


def lifted_cone(cone: PolyCone) -> PolyCone:
    q = cone.dim
    Y = cone.Y
    extra = np.vstack([Y, -Y.sum(axis=0, keepdims=True)])
    R = PolyCone.from_generators(np.hstack([np.eye(q + 1), extra]))
    if not R.is_pointed:
        raise NotPointedError("lifted cone is not pointed")
    return R


class LiftedObjective:
    """``f(y)`` when ``e @ y + eta >= -tol``, ``-inf`` otherwise."""

    def __init__(self, base: Objective, tol: float = LIFT_TOL):
        self.base = base
        self.tol = tol

    def __call__(self, y_eta: np.ndarray) -> float:
        y = y_eta[:-1]
        if y.sum() + y_eta[-1] < -self.tol * max(1.0, np.max(np.abs(y_eta))):
            return -np.inf
        return self.base(y)


@dataclass
class LiftedProblem:
    base: QcpModel
    lifted: QcpModel

    def project(self, y_lifted: np.ndarray) -> np.ndarray:
        return np.asarray(y_lifted)[:-1]


def lift_problem(model: QcpModel) -> LiftedProblem:
    if model.cone.Y.shape[1] and not model.cone.is_pointed:
        raise NotPointedError("ordering cone must be pointed")
    P_bar = np.vstack([model.P, -model.P.sum(axis=0, keepdims=True)])
    f_bar = Objective(LiftedObjective(model.f), f"lifted({model.f.description})",
                      dict(model.f.params))
    lifted = QcpModel(P_bar, model.A, model.b, lifted_cone(model.cone), f_bar,
                      name=f"{model.name}:lifted" if model.name else "lifted")
    return LiftedProblem(model, lifted)


def project_back(lifted_result: QcpResult, lp: LiftedProblem) -> QcpResult:
    """Drop the extra coordinate and re-evaluate the base objective."""
    x = lifted_result.x
    y = lp.base.P @ x
    y_bar = lp.lifted.P @ x
    resid = abs(y_bar.sum())
    if resid > HYPERPLANE_TOL * max(1.0, np.max(np.abs(y_bar))):
        raise QcpError(f"lifted solution is off the projection hyperplane (residual {resid:.3g})")
    out = QcpResult(x=x, y=y, value=lp.base.f(y), iterations=lifted_result.iterations,
                    lp_solves=lifted_result.lp_solves, failed_cuts=lifted_result.failed_cuts,
                    history=lifted_result.history, lower_bounds=lifted_result.lower_bounds,
                    algorithm=lifted_result.algorithm, wall_time=lifted_result.wall_time,
                    approx=lifted_result.approx, dual_approx=lifted_result.dual_approx)
    return out


def naive_lifting(model: QcpModel) -> VlpProblem:
    """The orthant-ordered reformulation with extra variables ``y``.

    Decision vector ``(x, y)``; constraints ``Z.T y >= Z.T P x`` and
    ``A x >= b``; image ``(y, -e @ y)`` ordered by the nonnegative orthant.
    It is unbounded whenever C is not {0}, so the solver rejects it.
    """
    q, n = model.P.shape
    Z = model.cone.Z
    A = np.vstack([np.hstack([-(Z.T @ model.P), Z.T]),
                   np.hstack([model.A, np.zeros((model.A.shape[0], q))])])
    b = np.concatenate([np.zeros(Z.shape[1]), model.b])
    P = np.vstack([np.hstack([np.zeros((q, n)), np.eye(q)]),
                   np.hstack([np.zeros((1, n)), -np.ones((1, q))])])
    return VlpProblem(P, A, b, PolyCone.orthant(q + 1), np.ones(q + 1))
