"""Vector linear programs and their scalarised LP pairs.

``VlpProblem`` holds ``min_C P x  s.t.  A x >= b``.  Two scalarisations are
provided:

* weighted sum: ``min w @ P x  s.t.  A x >= b``; the multipliers ``u`` of the
  constraint rows satisfy ``A.T u = P.T w``.
* translative: ``min z  s.t.  A x >= b,  Z.T (t + z c - P x) >= 0``.  Its
  multipliers ``(u, v)`` give a weight ``w = Z v`` with ``c @ w = 1`` and the
  supporting half-space ``{y : w @ y >= b @ u}`` of the upper image.

The coupling function ``phi(y, y*) = omega(y*) @ y - y*_q`` links points of
the upper image with points of the lower image of the dual problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, LpFailure
from .lp import GE, LinearProgram, LpBackend, LpStatus, solve_lp
from .polyhedra import PolyCone

Z_TOL = 1e-7


@dataclass(frozen=True)
class VlpProblem:
    P: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cone: PolyCone
    c: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        A = np.asarray(self.A, dtype=float).reshape(b.size, P.shape[1])
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.cone.dim != P.shape[0] or c.size != P.shape[0]:
            raise ValueError("cone, c and P disagree on the image dimension")
        if abs(c[-1] - 1.0) > 1e-12:
            raise ValueError("c must be normalised to c_q = 1")
        if not np.all(self.cone.Z.T @ c > 0):
            raise ValueError("c must lie in the interior of the ordering cone")
        for name, val in (("P", P), ("A", A), ("b", b), ("c", c)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "_split", _split_singletons(A, b))

    @property
    def q(self) -> int:
        return self.P.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def Z(self) -> np.ndarray:
        return self.cone.Z

    def image(self, x) -> np.ndarray:
        return self.P @ np.asarray(x, dtype=float)

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x - self.b >= -tol * max(1.0, np.max(np.abs(x), initial=0.0))))


@dataclass(frozen=True)
class _RowSplit:
    """Singleton rows of ``A x >= b`` turned into variable bounds."""

    general: np.ndarray      # indices of rows kept as constraints
    bounds: np.ndarray       # n x 2
    lower_row: np.ndarray    # row index defining each lower bound, -1 if none
    upper_row: np.ndarray


def _split_singletons(A: np.ndarray, b: np.ndarray) -> _RowSplit:
    m, n = A.shape
    nnz = np.count_nonzero(A, axis=1)
    bounds = np.tile([-np.inf, np.inf], (n, 1))
    lower_row = -np.ones(n, dtype=int)
    upper_row = -np.ones(n, dtype=int)
    general = []
    for i in range(m):
        if nnz[i] != 1:
            if nnz[i] == 0 and b[i] > 0:
                raise AssumptionError("constraint 0 >= b_i with b_i > 0: infeasible")
            if nnz[i] > 1:
                general.append(i)
            continue
        j = int(np.flatnonzero(A[i])[0])
        a = A[i, j]
        v = b[i] / a
        if a > 0 and v > bounds[j, 0]:
            bounds[j, 0], lower_row[j] = v, i
        elif a < 0 and v < bounds[j, 1]:
            bounds[j, 1], upper_row[j] = v, i
    if np.any(bounds[:, 0] > bounds[:, 1] + 1e-12):
        raise AssumptionError("variable bounds are inconsistent: the feasible set is empty")
    bounds[:, 1] = np.maximum(bounds[:, 1], bounds[:, 0])
    return _RowSplit(np.array(general, dtype=int), bounds, lower_row, upper_row)


def _solve_split(vlp: "VlpProblem", obj, extra_A=None, extra_b=None, n_extra: int = 0,
                 backend=None):
    """Solve ``min obj @ (x, v)`` over ``A x >= b`` plus extra rows in ``(x, v)``.

    Singleton rows of A enter as bounds on x; the extra variables v are free.
    Returns the LP solution and the multipliers of the rows of A followed by
    those of the extra rows.
    """
    sp = vlp._split
    n = vlp.n
    Ag = np.hstack([vlp.A[sp.general], np.zeros((sp.general.size, n_extra))])
    bg = vlp.b[sp.general]
    if extra_A is not None:
        Ag = np.vstack([Ag, extra_A])
        bg = np.concatenate([bg, extra_b])
    bounds = np.vstack([sp.bounds, np.tile([-np.inf, np.inf], (n_extra, 1))])
    sol = solve_lp(LinearProgram(obj, Ag, bg, [GE] * bg.size, bounds), backend)
    if not sol.optimal:
        return sol, None
    u = np.zeros(vlp.m)
    k = sp.general.size
    u[sp.general] = np.maximum(sol.duals[:k], 0.0)
    d = sol.reduced_costs[:n]
    for j in range(n):
        if d[j] > 0 and sp.lower_row[j] >= 0:
            i = sp.lower_row[j]
            u[i] = d[j] / vlp.A[i, j]
        elif d[j] < 0 and sp.upper_row[j] >= 0:
            i = sp.upper_row[j]
            u[i] = d[j] / vlp.A[i, j]
    return sol, np.concatenate([u, np.maximum(sol.duals[k:], 0.0)])


def omega(t_star, c) -> np.ndarray:
    """``(t*_1, ..., t*_{q-1}, 1 - sum_{i<q} c_i t*_i)``."""
    t_star = np.asarray(t_star, dtype=float)
    c = np.asarray(c, dtype=float)
    out = t_star.copy()
    out[-1] = 1.0 - c[:-1] @ t_star[:-1]
    return out


def coupling_phi(y, y_star, c) -> float:
    y = np.asarray(y, dtype=float)
    y_star = np.asarray(y_star, dtype=float)
    c = np.asarray(c, dtype=float)
    return float(y[:-1] @ y_star[:-1] + y[-1] * (1.0 - c[:-1] @ y_star[:-1]) - y_star[-1])


def dual_cut(y, c) -> tuple[np.ndarray, float]:
    """Half-space ``{y* : phi(y, y*) >= 0}`` written as ``normal @ y* >= offset``."""
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=float)
    normal = np.append(y[:-1] - y[-1] * c[:-1], -1.0)
    return normal, -float(y[-1])


def delta_hrep(cone: PolyCone, c) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``{y* : omega(y*) in C+}``, one per generator of C."""
    c = np.asarray(c, dtype=float)
    Y = cone.Y
    normals = np.hstack([(Y[:-1] - np.outer(c[:-1], Y[-1])).T, np.zeros((Y.shape[1], 1))])
    return normals, -Y[-1].copy()


@dataclass
class WeightedSumResult:
    x: np.ndarray
    u: np.ndarray
    value: float
    lp_iterations: int = 0


@dataclass
class TranslativeResult:
    x: np.ndarray
    z: float
    u: np.ndarray
    w: np.ndarray
    s: np.ndarray
    offset: float
    lp_iterations: int = 0

    @property
    def cut(self) -> tuple[np.ndarray, float]:
        return self.w, self.offset


def _check(sol, what):
    if sol.status is LpStatus.UNBOUNDED:
        raise AssumptionError(f"{what} is unbounded: the image is not bounded w.r.t. the cone")
    if sol.status is LpStatus.INFEASIBLE:
        raise AssumptionError(f"{what} is infeasible: the feasible set is empty")
    if not sol.optimal:
        raise LpFailure(f"{what} failed: {sol.message}", sol.status)


def solve_p1_d1(vlp: VlpProblem, w, backend: LpBackend | None = None) -> WeightedSumResult:
    """Weighted-sum LP ``min w @ P x`` over the feasible set, with its dual."""
    w = np.asarray(w, dtype=float)
    sol, u = _solve_split(vlp, vlp.P.T @ w, backend=backend)
    _check(sol, "weighted-sum LP")
    x = sol.x[:vlp.n]
    return WeightedSumResult(x, u, float(w @ (vlp.P @ x)), sol.iterations)


def solve_p2_d2(vlp: VlpProblem, t, backend: LpBackend | None = None) -> TranslativeResult:
    """Translative LP for the reference point ``t``, with its dual.

    Returns the optimal ``(x, z)``, the multipliers ``u`` of ``A x >= b``, the
    weight ``w`` (normalised to ``c @ w = 1``), the boundary point
    ``s = t + z c`` and the cut offset ``b @ u``.
    """
    t = np.asarray(t, dtype=float)
    Z = vlp.Z
    m, n = vlp.m, vlp.n
    zc = Z.T @ vlp.c
    rows = np.hstack([-(Z.T @ vlp.P), zc[:, None]])
    obj = np.zeros(n + 1)
    obj[-1] = 1.0
    sol, duals = _solve_split(vlp, obj, rows, -(Z.T @ t), 1, backend)
    _check(sol, "translative LP")
    x, z = sol.x[:n], float(sol.x[n])
    u, v = duals[:m], duals[m:]
    w = Z @ v
    cw = float(vlp.c @ w)
    if cw <= 0:
        raise LpFailure("translative LP returned a degenerate dual weight", sol.status)
    w, u = w / cw, u / cw
    return TranslativeResult(x=x, z=z, u=u, w=w, s=t + z * vlp.c, lp_iterations=sol.iterations,
                             offset=float(vlp.b @ u))


def z_tolerance(t) -> float:
    return Z_TOL * max(1.0, float(np.max(np.abs(t), initial=0.0)))


def check_bounded(vlp: VlpProblem, backend: LpBackend | None = None) -> np.ndarray:
    """Verify C-boundedness and return the weighted-sum values for each column of Z.

    Raises AssumptionError if some weighted-sum LP is unbounded or the
    feasible set is empty.
    """
    betas = []
    for i in range(vlp.Z.shape[1]):
        betas.append(solve_p1_d1(vlp, vlp.Z[:, i], backend).value)
    return np.array(betas)
