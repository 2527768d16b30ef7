"""Linear programming backend.

The bundled solver is a dense two-phase revised simplex method that returns
primal and dual optimal solutions.  Other solvers can be plugged in through
the :class:`LpBackend` protocol; :class:`HighsBackend` wraps scipy's HiGHS
interface and is mostly used as an independent cross-check in the tests.

Sign conventions for ``LpSolution.duals`` (minimisation):

* ``>=`` rows have nonnegative multipliers,
* ``<=`` rows have nonpositive multipliers,
* ``=`` rows are free,

so that ``reduced_costs = objective - constraint_matrix.T @ duals`` and, at an
optimum, ``objective @ x == rhs @ duals + reduced_costs @ x``.
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
REFACTOR_EVERY = 64


def feasibility_tolerance() -> float:
    """Feasibility tolerance, overridable through ``QCP_LP_TOL``."""
    raw = os.environ.get("QCP_LP_TOL")
    if raw is None:
        return DEFAULT_FEAS_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise ValueError(f"QCP_LP_TOL must be a float, got {raw!r}") from None
    if not tol > 0:
        raise ValueError("QCP_LP_TOL must be positive")
    return tol


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL = "numerical"


GE, EQ, LE = ">=", "=", "<="


@dataclass
class LinearProgram:
    """min objective @ x  s.t.  constraint_matrix @ x (sense) rhs,  lower <= x <= upper."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    constraint_sense: Sequence[str] | None = None
    variable_bounds: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        A = np.asarray(self.constraint_matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        self.constraint_matrix = A
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        m = self.rhs.size
        if A.shape != (m, n):
            raise ValueError(f"constraint matrix has shape {A.shape}, expected {(m, n)}")
        if self.constraint_sense is None:
            self.constraint_sense = [GE] * m
        self.constraint_sense = [_normalize_sense(s) for s in self.constraint_sense]
        if len(self.constraint_sense) != m:
            raise ValueError("one constraint sense per row required")
        if self.variable_bounds is None:
            self.variable_bounds = np.tile([-np.inf, np.inf], (n, 1))
        self.variable_bounds = np.asarray(self.variable_bounds, dtype=float).reshape(n, 2)
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(A))
                and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP data must be finite")
        if np.any(self.variable_bounds[:, 0] > self.variable_bounds[:, 1]):
            raise ValueError("variable lower bound exceeds upper bound")

    @property
    def shape(self):
        return self.constraint_matrix.shape


def _normalize_sense(s: str) -> str:
    s = s.strip()
    if s in (">=", "G", "ge", ">"):
        return GE
    if s in ("<=", "L", "le", "<"):
        return LE
    if s in ("=", "==", "E", "eq"):
        return EQ
    raise ValueError(f"unknown constraint sense {s!r}")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective_value: float = np.nan
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpBackend(Protocol):
    def solve(self, lp: LinearProgram) -> LpSolution: ...


def optimality_residuals(lp: LinearProgram, sol: LpSolution) -> dict:
    """Primal/dual feasibility, complementary slackness and duality gap of ``sol``.

    All values are absolute and nonnegative; the dual objective accounts for
    active variable bounds through the reduced costs.
    """
    A, b, c = lp.constraint_matrix, lp.rhs, lp.objective
    x, y = sol.x, sol.duals
    lo, up = lp.variable_bounds[:, 0], lp.variable_bounds[:, 1]
    sense = np.array(lp.constraint_sense)
    ax = A @ x
    slack = ax - b
    primal = 0.0
    if slack.size:
        primal = max(
            np.max(-slack[sense == GE], initial=0.0),
            np.max(slack[sense == LE], initial=0.0),
            np.max(np.abs(slack[sense == EQ]), initial=0.0),
        )
    primal = max(primal, np.max(lo - x, initial=0.0), np.max(x - up, initial=0.0))
    d = c - A.T @ y
    dual = 0.0
    if y.size:
        dual = max(np.max(-y[sense == GE], initial=0.0), np.max(y[sense == LE], initial=0.0))
    # d_j > 0 needs a finite lower bound, d_j < 0 a finite upper bound
    dual = max(dual,
               np.max(np.where(np.isinf(lo), np.maximum(d, 0.0), 0.0), initial=0.0),
               np.max(np.where(np.isinf(up), np.maximum(-d, 0.0), 0.0), initial=0.0))
    comp = np.max(np.abs(y * slack), initial=0.0)
    comp = max(comp, np.max(np.abs(np.where(d > 0, d * (x - np.where(np.isinf(lo), x, lo)), 0.0)),
                            initial=0.0),
               np.max(np.abs(np.where(d < 0, d * (x - np.where(np.isinf(up), x, up)), 0.0)),
                      initial=0.0))
    dual_obj = b @ y
    dual_obj += np.sum(np.where(d > 0, d * np.where(np.isinf(lo), 0.0, lo), 0.0))
    dual_obj += np.sum(np.where(d < 0, d * np.where(np.isinf(up), 0.0, up), 0.0))
    gap = abs(c @ x - dual_obj)
    return {"primal": float(primal), "dual": float(dual),
            "complementarity": float(comp), "gap": float(gap),
            "dual_objective": float(dual_obj)}


# --------------------------------------------------------------------------
# bundled revised simplex
# --------------------------------------------------------------------------

@dataclass
class _StandardForm:
    A: np.ndarray            # m x N, rows scaled so that b >= 0
    b: np.ndarray
    c: np.ndarray
    row_sign: np.ndarray     # +1/-1 applied to each standard row
    n_orig_rows: int
    var_cols: list = field(default_factory=list)  # per original var: [(col, coef), ...]
    shift: np.ndarray = None
    slack_col: np.ndarray = None                  # per standard row, -1 if none
    slack_coef: np.ndarray = None


def _to_standard_form(lp: LinearProgram) -> _StandardForm:
    A0, b0, c0 = lp.constraint_matrix, lp.rhs, lp.objective
    m0, n = A0.shape
    lo, up = lp.variable_bounds[:, 0], lp.variable_bounds[:, 1]

    shift = np.zeros(n)
    var_cols = []
    col_cost = []
    # columns of the transformed structural variables, expressed per original var
    T = []  # list of (orig var, coef)
    ub_rows = []  # (std col, bound)
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            k = len(T)
            T.append((j, 1.0))
            var_cols.append([(k, 1.0)])
            if np.isfinite(up[j]):
                ub_rows.append((k, up[j] - lo[j]))
        elif np.isfinite(up[j]):
            shift[j] = up[j]
            k = len(T)
            T.append((j, -1.0))
            var_cols.append([(k, -1.0)])
        else:
            k = len(T)
            T.append((j, 1.0))
            T.append((j, -1.0))
            var_cols.append([(k, 1.0), (k + 1, -1.0)])
    ns = len(T)
    M = np.zeros((n, ns))
    for k, (j, coef) in enumerate(T):
        M[j, k] = coef
    A_struct = A0 @ M
    b_struct = b0 - A0 @ shift
    c_struct = c0 @ M

    m = m0 + len(ub_rows)
    n_slack = sum(1 for s in lp.constraint_sense if s != EQ) + len(ub_rows)
    N = ns + n_slack
    A = np.zeros((m, N))
    b = np.zeros(m)
    A[:m0, :ns] = A_struct
    b[:m0] = b_struct
    slack_col = -np.ones(m, dtype=int)
    slack_coef = np.zeros(m)
    col = ns
    for i, s in enumerate(lp.constraint_sense):
        if s == GE:
            A[i, col] = -1.0
        elif s == LE:
            A[i, col] = 1.0
        else:
            continue
        slack_col[i] = col
        slack_coef[i] = A[i, col]
        col += 1
    for r, (k, bound) in enumerate(ub_rows):
        i = m0 + r
        A[i, k] = 1.0
        A[i, col] = 1.0
        b[i] = bound
        slack_col[i] = col
        slack_coef[i] = 1.0
        col += 1
    c = np.zeros(N)
    c[:ns] = c_struct
    row_sign = np.where(b < 0, -1.0, 1.0)
    A *= row_sign[:, None]
    b *= row_sign
    slack_coef *= row_sign
    return _StandardForm(A=A, b=b, c=c, row_sign=row_sign, n_orig_rows=m0,
                         var_cols=var_cols, shift=shift, slack_col=slack_col,
                         slack_coef=slack_coef)


class _Breakdown(Exception):
    pass


class SimplexSolver:
    """Dense two-phase revised simplex with Dantzig pricing.

    Bland's rule takes over after ``2 * (m + n)`` consecutive degenerate
    pivots and stays active until the next nondegenerate pivot.  The basis
    inverse is kept explicitly and refactorised every few dozen pivots.
    """

    def __init__(self, feas_tol: float | None = None, max_iter: int | None = None):
        self.feas_tol = feas_tol
        self.max_iter = max_iter

    # the scratch state below lives only for the duration of one solve
    def solve(self, lp: LinearProgram) -> LpSolution:
        tol = self.feas_tol if self.feas_tol is not None else feasibility_tolerance()
        sf = _to_standard_form(lp)
        m, N = sf.A.shape
        n_orig = lp.objective.size
        if m == 0:
            return self._solve_unconstrained(lp, sf)

        # initial basis: slack columns with +1 coefficient, artificials elsewhere
        basis = np.empty(m, dtype=int)
        art_rows = []
        for i in range(m):
            if sf.slack_col[i] >= 0 and sf.slack_coef[i] > 0:
                basis[i] = sf.slack_col[i]
            else:
                art_rows.append(i)
        n_art = len(art_rows)
        A = np.hstack([sf.A, np.zeros((m, n_art))])
        for k, i in enumerate(art_rows):
            A[i, N + k] = 1.0
            basis[i] = N + k
        is_art = np.zeros(N + n_art, dtype=bool)
        is_art[N:] = True
        b = sf.b
        scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
        max_iter = self.max_iter or 50 * (m + N + n_art) + 1000

        iters = 0
        try:
            B_inv = np.eye(m)
            x_B = b.copy()
            if n_art:
                c1 = np.zeros(N + n_art)
                c1[N:] = 1.0
                status, B_inv, x_B, k = self._iterate(A, b, c1, basis, B_inv, x_B,
                                                      ~np.zeros(N + n_art, dtype=bool),
                                                      n_orig, max_iter, tol)
                iters += k
                if status != LpStatus.OPTIMAL:
                    return LpSolution(LpStatus.NUMERICAL, iterations=iters,
                                      message=f"phase 1 ended with {status.value}")
                infeas = float(np.sum(x_B[is_art[basis]]))
                if infeas > tol * scale:
                    return LpSolution(LpStatus.INFEASIBLE, iterations=iters,
                                      objective_value=np.nan,
                                      message=f"phase 1 infeasibility {infeas:.3e}")
                B_inv, x_B = self._drive_out_artificials(A, b, basis, B_inv, x_B, is_art)
            c2 = np.concatenate([sf.c, np.zeros(n_art)])
            allowed = ~is_art
            status, B_inv, x_B, k = self._iterate(A, b, c2, basis, B_inv, x_B, allowed,
                                                  n_orig, max_iter, tol)
            iters += k
        except _Breakdown as exc:
            return LpSolution(LpStatus.NUMERICAL, iterations=iters, message=str(exc))
        if status == LpStatus.UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, iterations=iters, objective_value=-np.inf)
        if status != LpStatus.OPTIMAL:
            return LpSolution(status, iterations=iters, message="iteration limit")

        x_std = np.zeros(N + n_art)
        x_std[basis] = x_B
        x_std = np.maximum(x_std, 0.0)
        x = sf.shift.copy()
        for j, cols in enumerate(sf.var_cols):
            for k, coef in cols:
                x[j] += coef * x_std[k]
        y_std = c2[basis] @ B_inv
        duals = (sf.row_sign * y_std)[: sf.n_orig_rows]
        sol = LpSolution(LpStatus.OPTIMAL, x=x, duals=duals,
                         objective_value=float(lp.objective @ x),
                         reduced_costs=lp.objective - lp.constraint_matrix.T @ duals,
                         iterations=iters)
        res = optimality_residuals(lp, sol)
        obj_scale = max(1.0, abs(sol.objective_value))
        if res["gap"] > 1e-6 * obj_scale:
            logger.warning("strong duality check failed: gap %.3e", res["gap"])
            sol.status = LpStatus.NUMERICAL
            sol.message = f"duality gap {res['gap']:.3e}"
        return sol

    def _solve_unconstrained(self, lp, sf):
        c = lp.objective
        lo, up = lp.variable_bounds[:, 0], lp.variable_bounds[:, 1]
        x = np.where(c > 0, lo, np.where(c < 0, up, np.where(np.isfinite(lo), lo,
                                                               np.where(np.isfinite(up), up, 0.0))))
        if not np.all(np.isfinite(x)):
            return LpSolution(LpStatus.UNBOUNDED, objective_value=-np.inf)
        return LpSolution(LpStatus.OPTIMAL, x=x, duals=np.zeros(0),
                          objective_value=float(c @ x), reduced_costs=c.copy())

    def _refactor(self, A, b, basis):
        B = A[:, basis]
        try:
            B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise _Breakdown("singular basis matrix") from None
        if not np.all(np.isfinite(B_inv)):
            raise _Breakdown("singular basis matrix")
        return B_inv, B_inv @ b

    def _iterate(self, A, b, c, basis, B_inv, x_B, allowed, n_orig, max_iter, tol):
        m, N = A.shape
        degenerate = 0
        bland = False
        bland_after = 2 * (m + n_orig)
        since_refactor = 0
        for it in range(max_iter):
            y = c[basis] @ B_inv
            d = c - y @ A
            d[basis] = 0.0
            cand = allowed & (d < -OPT_TOL * max(1.0, np.abs(c).max(initial=0.0)))
            if not cand.any():
                return LpStatus.OPTIMAL, B_inv, x_B, it
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                dj = np.where(cand, d, 0.0)
                j = int(np.argmin(dj))
            alpha = B_inv @ A[:, j]
            pos = alpha > PIVOT_TOL
            if not pos.any():
                return LpStatus.UNBOUNDED, B_inv, x_B, it
            xb = np.maximum(x_B, 0.0)
            ratios = np.full(m, np.inf)
            ratios[pos] = xb[pos] / alpha[pos]
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(alpha[ties])])
            piv = alpha[r]
            if abs(piv) < PIVOT_TOL:
                raise _Breakdown(f"pivot {piv:.3e} below tolerance")
            if theta <= tol * 1e-3:
                degenerate += 1
                if degenerate >= bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False
            # product-form update of the inverse
            row = B_inv[r] / piv
            B_inv -= np.outer(alpha, row)
            B_inv[r] = row
            x_r = xb[r] / piv
            x_B = x_B - alpha * x_r
            x_B[r] = x_r
            basis[r] = j
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                B_inv, x_B = self._refactor(A, b, basis)
                since_refactor = 0
        return LpStatus.NUMERICAL, B_inv, x_B, max_iter

    def _drive_out_artificials(self, A, b, basis, B_inv, x_B, is_art):
        m = A.shape[0]
        for r in range(m):
            if not is_art[basis[r]]:
                continue
            row = B_inv[r] @ A
            row[is_art] = 0.0
            row[basis] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= PIVOT_TOL:
                continue  # redundant row; artificial stays basic at zero
            alpha = B_inv @ A[:, j]
            piv = alpha[r]
            pivot_row = B_inv[r] / piv
            B_inv = B_inv - np.outer(alpha, pivot_row)
            B_inv[r] = pivot_row
            x_r = x_B[r] / piv
            x_B = x_B - alpha * x_r
            x_B[r] = x_r
            basis[r] = j
        return self._refactor(A, b, basis)


class HighsBackend:
    """scipy/HiGHS backend with the same sign conventions as the bundled solver."""

    def solve(self, lp: LinearProgram) -> LpSolution:
        from scipy.optimize import linprog

        A, b = lp.constraint_matrix, lp.rhs
        sense = np.array(lp.constraint_sense)
        ub_rows = np.flatnonzero(sense != EQ)
        eq_rows = np.flatnonzero(sense == EQ)
        sgn = np.where(sense[ub_rows] == GE, -1.0, 1.0)
        A_ub = A[ub_rows] * sgn[:, None] if ub_rows.size else None
        b_ub = b[ub_rows] * sgn if ub_rows.size else None
        A_eq = A[eq_rows] if eq_rows.size else None
        b_eq = b[eq_rows] if eq_rows.size else None
        bounds = [(None if np.isinf(lo) else lo, None if np.isinf(up) else up)
                  for lo, up in lp.variable_bounds]
        res = linprog(lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        if res.status == 2:
            # presolve may report "infeasible" for unbounded-or-infeasible; settle it
            feas = linprog(np.zeros_like(lp.objective), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
                           b_eq=b_eq, bounds=bounds, method="highs")
            if feas.status == 0:
                return LpSolution(LpStatus.UNBOUNDED, objective_value=-np.inf, message=res.message)
            return LpSolution(LpStatus.INFEASIBLE, message=res.message)
        if res.status == 3:
            return LpSolution(LpStatus.UNBOUNDED, objective_value=-np.inf, message=res.message)
        if res.status != 0:
            return LpSolution(LpStatus.NUMERICAL, message=res.message)
        duals = np.zeros(b.size)
        if ub_rows.size:
            duals[ub_rows] = res.ineqlin.marginals * sgn
        if eq_rows.size:
            duals[eq_rows] = res.eqlin.marginals
        return LpSolution(LpStatus.OPTIMAL, x=res.x, duals=duals,
                          objective_value=float(res.fun),
                          reduced_costs=lp.objective - A.T @ duals,
                          iterations=int(getattr(res, "nit", 0)))


_default_backend: LpBackend | None = None


def default_backend() -> LpBackend:
    global _default_backend
    if _default_backend is None:
        name = os.environ.get("QCP_LP_BACKEND", "simplex").lower()
        if name == "highs":
            _default_backend = HighsBackend()
        elif name == "simplex":
            _default_backend = SimplexSolver()
        else:
            raise ValueError(f"QCP_LP_BACKEND must be 'simplex' or 'highs', got {name!r}")
    return _default_backend


def set_default_backend(backend: LpBackend | None) -> None:
    global _default_backend
    _default_backend = backend


def solve_lp(lp: LinearProgram, backend: LpBackend | None = None) -> LpSolution:
    return (backend or default_backend()).solve(lp)
