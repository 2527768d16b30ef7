"""Problem builders: multiplicative programs, concave quadratics, DC programs,
convex minimisation over a polytope boundary, and two small worked instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionError, QcpError
from .lp import EQ, GE, LinearProgram, solve_lp
from .polyhedra import HPolyhedron, PolyCone, PPolyhedron
from .qcp import Objective, QcpModel

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# --------------------------------------------------------------------------
# linear multiplicative programs
# --------------------------------------------------------------------------

@dataclass
class LmpInstance:
    """``min prod(C x + d)  s.t.  A x >= b,  l <= x <= u``."""

    A: np.ndarray
    b: np.ndarray
    l: np.ndarray
    u: np.ndarray
    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.l = np.asarray(self.l, dtype=float).reshape(-1)
        self.u = np.asarray(self.u, dtype=float).reshape(-1)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        n = self.A.shape[1]
        if self.l.size != n or self.u.size != n or self.C.shape[1] != n:
            raise ValueError("inconsistent dimensions")
        if self.d.size != self.C.shape[0]:
            raise ValueError("one offset per factor required")
        if np.any(self.l > self.u):
            raise ValueError("box lower bound exceeds upper bound")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "b", "l", "u", "C", "d")}

    @classmethod
    def from_dict(cls, d: dict) -> "LmpInstance":
        return cls(d["A"], d["b"], d["l"], d["u"], d["C"], d["d"])


def gen_lmp_random(q: int, m: int, n: int, seed: int) -> LmpInstance:
    """Uniform [0, 10] data for A, b and the factor rows; box [0, 100]; d = 0."""
    if q < 1 or m < 1 or n < 1:
        raise ValueError("q, m and n must be positive")
    rng = make_rng(seed)
    A = rng.uniform(0.0, 10.0, size=(m, n))
    C = rng.uniform(0.0, 10.0, size=(q, n))
    b = rng.uniform(0.0, 10.0, size=m)
    return LmpInstance(A, b, np.zeros(n), np.full(n, 100.0), C, np.zeros(q))


def product_objective(d=None) -> Objective:
    def f(y):
        z = y if d is None else y + d
        if np.any(z < 0):
            return -np.inf
        return float(np.prod(z))
    return Objective(f, "product", {"d": None if d is None else np.asarray(d).tolist()})


def make_lmp(inst: LmpInstance) -> QcpModel:
    n = inst.A.shape[1]
    A = np.vstack([inst.A, np.eye(n), -np.eye(n)])
    b = np.concatenate([inst.b, inst.l, -inst.u])
    d = inst.d if np.any(inst.d != 0) else None
    q = inst.C.shape[0]
    return QcpModel(inst.C, A, b, PolyCone.orthant(q), product_objective(d), name="lmp")


# --------------------------------------------------------------------------
# concave quadratic programs
# --------------------------------------------------------------------------

def sin_floor_matrix(q: int, n: int) -> np.ndarray:
    """``P[i, j] = floor(q * sin(j * q + i + 1))`` for zero-based i, j."""
    if q < 1 or n < 1:
        raise ValueError("q and n must be positive")
    i = np.arange(1, q + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    return np.floor(q * np.sin((j - 1) * q + i))


def neg_square_objective() -> Objective:
    return Objective(lambda y: -float(y @ y), "neg_square")


def box_constraints(n: int, lo: float = -1.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    return np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([np.full(n, lo), np.full(n, -hi)])


def make_cqp(q: int, n: int) -> QcpModel:
    """``min -|P x|^2`` over the box ``[-1, 1]^n``; ordered by the cone {0}."""
    if q > n:
        raise ValueError("need q <= n")
    A, b = box_constraints(n)
    return QcpModel(sin_floor_matrix(q, n), A, b, PolyCone.trivial(q), neg_square_objective(),
                    name="cqp")


def gen_cqp_random(q: int, n: int, seed: int) -> QcpModel:
    """Box-constrained ``min -|P x|^2`` with integer ``P`` drawn uniformly from ``{-q..q}``."""
    if q > n:
        raise ValueError("need q <= n")
    P = make_rng(seed).integers(-q, q + 1, size=(q, n)).astype(float)
    A, b = box_constraints(n)
    return QcpModel(P, A, b, PolyCone.trivial(q), neg_square_objective(), name=f"cqp-{seed}")


def cqp_bruteforce(P: np.ndarray) -> float:
    """Exact ``min -|P u|^2`` over the box by scanning all sign vectors (small n only)."""
    n = P.shape[1]
    if n > 22:
        raise ValueError("too many variables for exhaustive search")
    best = 0.0
    for k in range(0, 2 ** n, 4096):
        idx = np.arange(k, min(2 ** n, k + 4096))
        U = 1.0 - 2.0 * ((idx[:, None] >> np.arange(n)[None, :]) & 1)
        best = max(best, float(np.max(np.sum((U @ P.T) ** 2, axis=1))))
    return -best


# --------------------------------------------------------------------------
# worked instances
# --------------------------------------------------------------------------

EX41_A6 = np.array([[1.2, 1.4, 0.4, 0.8],
                    [-0.7, 0.8, 0.8, 0.0],
                    [0.0, 1.2, 0.0, 0.4],
                    [2.8, -2.1, 0.5, 0.0],
                    [0.4, 2.1, -1.5, -0.2],
                    [-0.6, -1.3, 2.4, 0.5]])
EX41_B6 = np.array([6.8, 0.8, 2.1, 1.2, 1.4, 0.8])


def make_example_41(c=(-0.25, 1.0)) -> QcpModel:
    """Two-dimensional image of a 4-variable polytope with a concave objective."""
    A = np.vstack([-EX41_A6, np.eye(4)])
    b = np.concatenate([-EX41_B6, np.zeros(4)])
    P = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, -0.5, 0.3, 1.0]])
    f = Objective(lambda y: -abs(y[0]) ** 1.5 - 0.1 * (y[1] - 4.5) ** 2, "example41")
    cone = PolyCone.from_generators([[-1.0, 0.0], [0.0, 1.0]])
    return QcpModel(P, A, b, cone, f, None if c is None else np.asarray(c, float), "example41")


def make_example_61() -> QcpModel:
    """``min y1 - y2^2`` with the non-solid cone generated by (1, 0)."""
    P = np.array([[1.0, 1.0, -1.0], [1.0, 0.0, 1.0]])
    A = np.vstack([np.eye(3), [[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]])
    b = np.array([-1.0, -1.0, -1.0, -1.0, -1.0])
    f = Objective(lambda y: y[0] - y[1] ** 2, "example61")
    return QcpModel(P, A, b, PolyCone.from_generators([[1.0], [0.0]]), f, name="example61")


# --------------------------------------------------------------------------
# epigraphs and conjugates
# --------------------------------------------------------------------------

def epigraph_value(epi: PPolyhedron, x) -> float:
    """``h(x) = min{r : (x, r) in epi}`` by LP; ``inf`` outside the domain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    Ax, ar = epi.A[:, :n], epi.A[:, n]
    k = epi.n_lifting
    obj = np.zeros(1 + k)
    obj[0] = 1.0
    lp = LinearProgram(obj, np.hstack([ar[:, None], epi.B]), epi.b - Ax @ x, [GE] * epi.b.size)
    sol = solve_lp(lp)
    if sol.status.value == "infeasible":
        return math.inf
    if sol.status.value == "unbounded":
        return -math.inf
    if not sol.optimal:
        raise QcpError(f"epigraph LP failed: {sol.message}")
    return float(sol.x[0])


def conjugate_via_lp(epi: PPolyhedron, y) -> tuple[float, np.ndarray]:
    """``sup{y @ x - r : (x, r) in epi}`` and a maximising ``x``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    k = epi.n_lifting
    obj = np.concatenate([-y, [1.0], np.zeros(k)])
    lp = LinearProgram(obj, np.hstack([epi.A, epi.B]), epi.b, [GE] * epi.b.size)
    sol = solve_lp(lp)
    if sol.status.value == "unbounded":
        return math.inf, np.full(n, np.nan)
    if not sol.optimal:
        raise QcpError(f"conjugate LP failed ({sol.status.value})")
    return -float(sol.objective_value), sol.x[:n]


def polyhedral_conjugate(epi_h) -> PPolyhedron:
    """P-representation of the epigraph of the conjugate of a polyhedral function.

    For ``epi h = {(x, r) : exists u, Mx x + mr r + Mu u >= rhs}`` the
    conjugate's epigraph is ``{(y, s) : exists lam >= 0, Mx.T lam = -y,
    mr @ lam = 1, Mu.T lam = 0, s >= -rhs @ lam}``.
    """
    if isinstance(epi_h, HPolyhedron):
        epi_h = PPolyhedron.from_h(epi_h)
    n = epi_h.dim - 1
    Mx, mr, Mu, rhs = epi_h.A[:, :n], epi_h.A[:, n], epi_h.B, epi_h.b
    rows = rhs.size
    k = Mu.shape[1]
    zeros_s = np.zeros((n, 1))
    A_blocks, B_blocks, b_blocks = [], [], []

    def add(A_, B_, b_):
        A_blocks.append(A_)
        B_blocks.append(B_)
        b_blocks.append(b_)

    add(np.hstack([np.eye(n), zeros_s]), Mx.T, np.zeros(n))
    add(np.hstack([-np.eye(n), zeros_s]), -Mx.T, np.zeros(n))
    add(np.zeros((1, n + 1)), mr[None, :], np.ones(1))
    add(np.zeros((1, n + 1)), -mr[None, :], -np.ones(1))
    if k:
        add(np.zeros((k, n + 1)), Mu.T, np.zeros(k))
        add(np.zeros((k, n + 1)), -Mu.T, np.zeros(k))
    add(np.zeros((rows, n + 1)), np.eye(rows), np.zeros(rows))
    add(np.append(np.zeros(n), 1.0)[None, :], rhs[None, :], np.zeros(1))
    out = PPolyhedron(np.vstack(A_blocks), np.vstack(B_blocks), np.concatenate(b_blocks))
    # the conjugate must be proper: some lam has to satisfy the equations
    eq = np.vstack([mr[None, :], Mu.T]) if k else mr[None, :]
    lp = LinearProgram(np.zeros(rows), eq, np.concatenate([[1.0], np.zeros(k)]), [EQ] * eq.shape[0],
                       np.tile([0.0, np.inf], (rows, 1)))
    if not solve_lp(lp).optimal:
        raise ValueError("function is improper: its conjugate has empty domain")
    return out


# --------------------------------------------------------------------------
# DC programs
# --------------------------------------------------------------------------

@dataclass
class DcInstance:
    """``min g(x) - h(x)`` with one polyhedral component.

    ``orientation="primal"`` uses the epigraph of ``g`` as constraint set and
    needs ``h``.  ``orientation="dual"`` uses the epigraph of the conjugate of
    ``h`` and needs ``g_conj`` (the conjugate of ``g``) together with
    ``g_conj_argmax`` returning a maximiser of ``y @ x - g(x)``.
    """

    n: int
    orientation: str = "primal"
    epi_g: PPolyhedron | None = None
    epi_h: PPolyhedron | None = None
    g: Callable | None = None
    h: Callable | None = None
    g_conj: Callable | None = None
    g_conj_argmax: Callable | None = None
    name: str = "dc"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.orientation not in ("primal", "dual"):
            raise ValueError("orientation must be 'primal' or 'dual'")

    def objective(self, x) -> float:
        return float(self.g(x) - self.h(x))


def _last_ray_cone(dim: int) -> PolyCone:
    return PolyCone.from_generators(np.eye(dim)[:, -1:])


def make_dc_primal(dc: DcInstance) -> QcpModel:
    """``min r - h(x)  s.t.  (x, r) in epi g`` with the cone of the r-direction."""
    if dc.epi_g is None or dc.h is None:
        raise ValueError("primal orientation needs epi_g and h")
    epi = dc.epi_g
    n = dc.n
    A = np.hstack([epi.A, epi.B])
    P = np.hstack([np.eye(n + 1), np.zeros((n + 1, epi.n_lifting))])
    h = dc.h
    f = Objective(lambda y: float(y[-1] - h(y[:-1])), "dc_primal")
    return QcpModel(P, A, epi.b, _last_ray_cone(n + 1), f, name=f"{dc.name}:primal")


def make_dc_dual(dc: DcInstance) -> QcpModel:
    """``min s - g*(y)  s.t.  (y, s) in epi h*``."""
    if dc.epi_h is None or dc.g_conj is None:
        raise ValueError("dual orientation needs epi_h and g_conj")
    epi = polyhedral_conjugate(dc.epi_h)
    n = dc.n
    A = np.hstack([epi.A, epi.B])
    P = np.hstack([np.eye(n + 1), np.zeros((n + 1, epi.n_lifting))])
    gc = dc.g_conj
    f = Objective(lambda y: float(y[-1] - gc(y[:-1])), "dc_dual")
    return QcpModel(P, A, epi.b, _last_ray_cone(n + 1), f, name=f"{dc.name}:dual")


def dc_recover(dc: DcInstance, y) -> np.ndarray:
    """Map a solution image back to a point ``x`` of the original DC program."""
    y = np.asarray(y, dtype=float)
    if dc.orientation == "primal":
        return y[:dc.n]
    if dc.g_conj_argmax is None:
        raise ValueError("dual orientation needs g_conj_argmax to recover x")
    return np.asarray(dc.g_conj_argmax(y[:dc.n]), dtype=float)


def _example_73_epi_g(q: int, box: float = 10.0) -> PPolyhedron:
    """Epigraph of |x1 - 1| + 200 sum max(0, |x_{i-1}| - x_i), restricted to the box.

    Auxiliary variables: a_1..a_{q-1} (bounds on |x_i|), s (bound on |x1-1|),
    m_2..m_q (bounds on the max terms).  Column order: x, r, a, s, m.
    """
    na, nm = q - 1, q - 1
    width = q + 1 + na + 1 + nm
    ix = lambda i: i
    ir = q
    ia = lambda i: q + 1 + i
    i_s = q + 1 + na
    im = lambda i: q + 2 + na + i
    rows, rhs = [], []

    def row(entries, value):
        r = np.zeros(width)
        for j, v in entries:
            r[j] += v
        rows.append(r)
        rhs.append(value)

    for i in range(na):
        row([(ia(i), 1), (ix(i), -1)], 0.0)
        row([(ia(i), 1), (ix(i), 1)], 0.0)
    row([(i_s, 1), (ix(0), -1)], -1.0)
    row([(i_s, 1), (ix(0), 1)], 1.0)
    for i in range(nm):
        row([(im(i), 1)], 0.0)
        row([(im(i), 1), (ia(i), -1), (ix(i + 1), 1)], 0.0)
    row([(ir, 1), (i_s, -1)] + [(im(i), -200.0) for i in range(nm)], 0.0)
    for i in range(q):
        row([(ix(i), 1)], -box)
        row([(ix(i), -1)], -box)
    M = np.array(rows)
    return PPolyhedron(M[:, :q + 1], M[:, q + 1:], np.array(rhs))


def _example_73_epi_h(q: int) -> PPolyhedron:
    """Epigraph of 100 sum (|x_{i-1}| - x_i); column order x, r, a."""
    na = q - 1
    width = q + 1 + na
    rows, rhs = [], []
    for i in range(na):
        for sgn in (-1.0, 1.0):
            r = np.zeros(width)
            r[q + 1 + i] = 1.0
            r[i] = sgn
            rows.append(r)
            rhs.append(0.0)
    r = np.zeros(width)
    r[q] = 1.0
    for i in range(na):
        r[q + 1 + i] -= 100.0
        r[i + 1] += 100.0
    rows.append(r)
    rhs.append(0.0)
    M = np.array(rows)
    return PPolyhedron(M[:, :q + 1], M[:, q + 1:], np.array(rhs))


def example_73_g(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(abs(x[0] - 1) + 200 * np.sum(np.maximum(0.0, np.abs(x[:-1]) - x[1:])))


def example_73_h(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(100 * np.sum(np.abs(x[:-1]) - x[1:]))


def make_example_73(q: int, orientation: str = "dual") -> DcInstance:
    """Chained absolute-value DC program on the box [-10, 10]^q (optimum 0 at e)."""
    if q < 1:
        raise ValueError("q must be positive")
    epi_g = _example_73_epi_g(q)
    epi_h = _example_73_epi_h(q)
    return DcInstance(
        n=q, orientation=orientation, epi_g=epi_g, epi_h=epi_h,
        g=lambda x: example_73_g(x) if np.all(np.abs(x) <= 10 + 1e-9) else math.inf,
        h=example_73_h,
        g_conj=lambda y: conjugate_via_lp(epi_g, y)[0],
        g_conj_argmax=lambda y: conjugate_via_lp(epi_g, y)[1],
        name=f"example73_q{q}", meta={"q": q})


# --------------------------------------------------------------------------
# convex minimisation over the boundary of a polytope
# --------------------------------------------------------------------------

def neg_conjugate_quadratic(y, Q: PPolyhedron, tol: float = 1e-10, max_iter: int = 10_000,
                            return_argmin: bool = False):
    """``min_{x in Q} x @ x - y @ x`` by away-step Frank-Wolfe.

    The linear minimisation oracle is an LP over the P-representation of Q.
    Stops when the Frank-Wolfe duality gap drops below ``tol`` (scaled by the
    problem size); raises QcpError if ``max_iter`` is reached first.
    """
    y = np.asarray(y, dtype=float)
    n = Q.dim
    k = Q.n_lifting
    M = np.hstack([Q.A, Q.B])

    def lmo(grad):
        lp = LinearProgram(np.concatenate([grad, np.zeros(k)]), M, Q.b, [GE] * Q.b.size)
        sol = solve_lp(lp)
        if not sol.optimal:
            raise AssumptionError(f"linear oracle over Q failed ({sol.status.value})")
        return sol.x[:n]

    atoms = [lmo(-y)]
    weights = [1.0]
    x = atoms[0].copy()
    scale = max(1.0, float(np.max(np.abs(y))), float(np.max(np.abs(x))) ** 2)
    for _ in range(max_iter):
        grad = 2.0 * x - y
        s = lmo(grad)
        gap = float(grad @ (x - s))
        if gap <= tol * scale:
            val = float(x @ x - y @ x)
            return (val, x) if return_argmin else val
        a_idx = int(np.argmax([grad @ a for a in atoms]))
        away_gap = float(grad @ (atoms[a_idx] - x))
        if gap >= away_gap:
            d = s - x
            gmax = 1.0
        else:
            d = x - atoms[a_idx]
            wa = weights[a_idx]
            gmax = wa / (1.0 - wa) if wa < 1.0 else np.inf
        dd = float(d @ d)
        if dd <= 1e-300:
            val = float(x @ x - y @ x)
            return (val, x) if return_argmin else val
        gamma = min(max(-float(grad @ d) / (2.0 * dd), 0.0), gmax)
        if gap >= away_gap:
            weights = [w * (1.0 - gamma) for w in weights]
            for i, a in enumerate(atoms):
                if np.max(np.abs(a - s)) <= 1e-12:
                    weights[i] += gamma
                    break
            else:
                atoms.append(s)
                weights.append(gamma)
        else:
            weights = [w * (1.0 + gamma) for w in weights]
            weights[a_idx] -= gamma
        keep = [i for i, w in enumerate(weights) if w > 1e-14]
        atoms = [atoms[i] for i in keep]
        weights = [weights[i] for i in keep]
        tot = sum(weights)
        weights = [w / tot for w in weights]
        x = np.sum([w * a for w, a in zip(weights, atoms)], axis=0)
    raise QcpError("Frank-Wolfe iteration cap reached before the gap tolerance")


def image_polytope(P: np.ndarray) -> PPolyhedron:
    """``{P u : -e <= u <= e}`` as a P-representation."""
    q, m = P.shape
    A = np.vstack([np.eye(q), -np.eye(q), np.zeros((2 * m, q))])
    B = np.vstack([-P, P, np.eye(m), -np.eye(m)])
    b = np.concatenate([np.zeros(2 * q), -np.ones(2 * m)])
    return PPolyhedron(A, B, b)


def gauge_epigraph(Q: PPolyhedron, c: float) -> PPolyhedron:
    """Epigraph of ``h_c``: the cone generated by ``Q x {c}``."""
    n = Q.dim
    A = np.vstack([np.hstack([Q.A, -(Q.b / c)[:, None]]),
                   np.append(np.zeros(n), 1.0)[None, :]])
    B = np.vstack([Q.B, np.zeros((1, Q.n_lifting))])
    return PPolyhedron(A, B, np.zeros(A.shape[0]))


def make_boundary_problem(Q: PPolyhedron, L: float, Rbound: float, c: float,
                          g: Callable | None = None, neg_conj: Callable | None = None,
                          ) -> DcInstance:
    """DC reformulation of ``min g(x)`` over the boundary of the polytope Q.

    The concave part is ``h_c - c`` with ``epi h_c = cone(Q x {c})``; the
    reformulation is exact when ``c > L * Rbound``.  Without ``g`` the
    objective is ``x @ x`` with its conjugate computed by Frank-Wolfe.
    """
    if not c > L * Rbound:
        raise ValueError(f"c = {c} must exceed L * R = {L * Rbound}")
    if g is None:
        g = lambda x: float(np.asarray(x) @ np.asarray(x))
        neg_conj = lambda y: neg_conjugate_quadratic(y, Q, return_argmin=True)
    elif neg_conj is None:
        raise ValueError("a custom g needs its negative conjugate handle")
    epi_hc = gauge_epigraph(Q, c)
    # h = h_c - c: shift r by c
    shift = epi_hc.A[:, -1] * c
    epi_h = PPolyhedron(epi_hc.A, epi_hc.B, epi_hc.b - shift)
    n = Q.dim
    return DcInstance(
        n=n, orientation="dual", epi_h=epi_h,
        g=g, h=lambda x: epigraph_value(epi_hc, x) - c,
        g_conj=lambda y: -neg_conj(y)[0],
        g_conj_argmax=lambda y: neg_conj(y)[1],
        name="boundary", meta={"c": c, "L": L, "R": Rbound})


def example_75(q: int, m: int) -> tuple[DcInstance, PPolyhedron]:
    """``min x @ x`` over the boundary of ``P[-e, e]`` with the sine-floor ``P``."""
    P = sin_floor_matrix(q, m)
    r = np.abs(P).sum(axis=1)
    nr = float(np.linalg.norm(r))
    Q = image_polytope(P)
    return make_boundary_problem(Q, L=2 * nr, Rbound=nr, c=2 * nr ** 2 + 1), Q
