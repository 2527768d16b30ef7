"""Polyhedra, polyhedral cones and incremental vertex enumeration.

Three representations are supported:

* ``HPolyhedron``: ``{y : normals @ y >= offsets}``
* ``VPolyhedron``: ``conv(points) + cone(directions)``
* ``PPolyhedron``: ``{x : exists u, A x + B u >= b}``

``OuterApprox`` couples an H-representation with its synchronised vertex and
extreme-ray lists.  It is updated one half-space at a time with
:func:`add_halfspace`, a double-description step working on homogenised
generators ``(v, 1)`` for points and ``(r, 0)`` for rays.  :func:`dd_convert`
is an independent brute-force H-to-V conversion used for bootstrapping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPolyhedronError, NonSolidConeError, NotPointedError
from .lp import EQ, GE, LinearProgram, solve_lp

TOL = 1e-7          # global feasibility tolerance
GEOM_EPS = 1e-9     # relative tolerance for incidence / side classification
MERGE_TOL = 1e-7    # duplicate generators closer than this (inf-norm, relative) are merged


def _as_matrix(a, cols=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        if cols is not None and a.size == 0:
            return a.reshape(0, cols)
        a = a.reshape(1, -1) if cols is None or a.size == cols else a.reshape(-1, cols)
    return a


def _unit_inf(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.max(np.abs(v), axis=-1, keepdims=True)
    out = v / np.where(n > 0, n, 1.0)
    out[np.abs(out) < 1e-14] = 0.0
    return out


# --------------------------------------------------------------------------
# representations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HPolyhedron:
    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        normals = np.asarray(self.normals, dtype=float)
        if normals.ndim == 1:
            normals = normals.reshape(offsets.size, -1) if offsets.size else normals.reshape(0, -1)
        if normals.shape[0] != offsets.size:
            raise ValueError("one offset per normal row required")
        if normals.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise ValueError("H-representation must be finite")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def contains(self, y, tol: float = TOL) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.normals @ y - self.offsets >= -tol))

    def with_row(self, w, gamma) -> "HPolyhedron":
        return HPolyhedron(np.vstack([self.normals, np.asarray(w, float).reshape(1, -1)]),
                           np.append(self.offsets, float(gamma)))

    def to_dict(self) -> dict:
        return {"normals": self.normals.tolist(), "offsets": self.offsets.tolist()}

    @classmethod
    def from_dict(cls, d: dict, dim: int | None = None) -> "HPolyhedron":
        normals = np.asarray(d["normals"], dtype=float)
        if normals.size == 0:
            normals = normals.reshape(0, dim if dim is not None else d.get("dim", 1))
        return cls(normals, d["offsets"])


@dataclass(frozen=True)
class VPolyhedron:
    points: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("a V-representation needs at least one point")
        q = points.shape[1]
        dirs = np.asarray(self.directions, dtype=float)
        dirs = dirs.reshape(-1, q) if dirs.size else np.zeros((0, q))
        if dirs.shape[0] and np.any(np.max(np.abs(dirs), axis=1) == 0):
            raise ValueError("directions must be nonzero")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "directions", dirs)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def contains(self, y, tol: float = TOL) -> bool:
        """Membership in conv(points) + cone(directions), decided by an LP."""
        y = np.asarray(y, dtype=float)
        k, r = self.points.shape[0], self.directions.shape[0]
        A = np.vstack([np.hstack([self.points.T, self.directions.T]),
                       np.concatenate([np.ones(k), np.zeros(r)])[None, :]])
        rhs = np.append(y, 1.0)
        bounds = np.tile([0.0, np.inf], (k + r, 1))
        sol = solve_lp(LinearProgram(np.zeros(k + r), A, rhs, [EQ] * A.shape[0], bounds))
        if not sol.optimal:
            return False
        return bool(np.max(np.abs(A @ sol.x - rhs)) <= tol * max(1.0, np.max(np.abs(y))))

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "directions": self.directions.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "VPolyhedron":
        return cls(d["points"], d.get("directions", []))


@dataclass(frozen=True)
class PPolyhedron:
    """``{x : exists u, A x + B u >= b}``."""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(b.size, -1)
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(b.size, -1) if B.size else np.zeros((b.size, 0))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_lifting(self) -> int:
        return self.B.shape[1]

    @classmethod
    def from_h(cls, h: HPolyhedron) -> "PPolyhedron":
        return cls(h.normals, np.zeros((h.offsets.size, 0)), h.offsets)

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        k = self.n_lifting
        lp = LinearProgram(np.zeros(k), self.B, self.b - self.A @ x + (-tol),
                           [GE] * self.b.size)
        return solve_lp(lp).optimal

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PPolyhedron":
        return cls(d["A"], d.get("B", []), d["b"])


@dataclass(frozen=True)
class PolyCone:
    """Polyhedral cone ``{Y lam : lam >= 0} = {y : Z.T y >= 0}``.

    ``Y`` is q x o (generators as columns), ``Z`` is q x p (inequality
    normals as columns).  Use :meth:`from_generators` or
    :meth:`from_inequalities` when only one form is known.
    """

    Y: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        q = Y.shape[0] if Y.ndim == 2 else Z.shape[0]
        Y = Y.reshape(q, -1) if Y.size else np.zeros((q, 0))
        Z = Z.reshape(q, -1) if Z.size else np.zeros((q, 0))
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Z", Z)

    @property
    def dim(self) -> int:
        return self.Y.shape[0]

    @classmethod
    def from_generators(cls, Y) -> "PolyCone":
        Y = np.asarray(Y, dtype=float)
        Z = cone_generators(Y.T, Y.shape[0]) if Y.size else _full_space(Y.shape[0])
        return cls(Y, Z)

    @classmethod
    def from_inequalities(cls, Z) -> "PolyCone":
        Z = np.asarray(Z, dtype=float)
        return cls(cone_generators(Z.T, Z.shape[0]), Z)

    @classmethod
    def orthant(cls, q: int) -> "PolyCone":
        return cls(np.eye(q), np.eye(q))

    @classmethod
    def trivial(cls, q: int) -> "PolyCone":
        """The cone {0}."""
        return cls(np.zeros((q, 0)), np.hstack([np.eye(q), -np.eye(q)]))

    @property
    def is_solid(self) -> bool:
        return self.Y.shape[1] > 0 and np.linalg.matrix_rank(self.Y) == self.dim

    @property
    def is_pointed(self) -> bool:
        return self.Z.shape[1] > 0 and np.linalg.matrix_rank(self.Z) == self.dim

    def contains(self, y, tol: float = TOL) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.Z.T @ y >= -tol * max(1.0, np.max(np.abs(y), initial=0.0))))

    def contains_by_generators(self, y, tol: float = TOL) -> bool:
        y = np.asarray(y, dtype=float)
        o = self.Y.shape[1]
        if o == 0:
            return bool(np.max(np.abs(y), initial=0.0) <= tol)
        lp = LinearProgram(np.zeros(o), self.Y, y, [EQ] * self.dim,
                           np.tile([0.0, np.inf], (o, 1)))
        return solve_lp(lp).optimal

    def to_dict(self) -> dict:
        return {"Y": self.Y.tolist(), "Z": self.Z.tolist()}

    @classmethod
    def from_dict(cls, d: dict, dim: int | None = None) -> "PolyCone":
        Y = np.asarray(d.get("Y", []), dtype=float)
        Z = np.asarray(d.get("Z", []), dtype=float)
        if Y.size == 0 and Z.size == 0:
            raise ValueError("cone needs Y or Z")
        if Y.size and Z.size:
            return cls(Y, Z)
        if Y.size:
            return cls.from_generators(Y)
        return cls.from_inequalities(Z)


def _full_space(q: int) -> np.ndarray:
    """Generators (as columns) of R^q; also the inequality form of the cone {0}."""
    return np.hstack([np.eye(q), -np.eye(q)])


# --------------------------------------------------------------------------
# conversions
# --------------------------------------------------------------------------

def _homogenized_rows(h: HPolyhedron) -> np.ndarray:
    """Rows of {(y, s) : normals y - offsets s >= 0, s >= 0}."""
    q = h.dim
    rows = np.hstack([h.normals, -h.offsets[:, None]])
    return np.vstack([rows, np.eye(q + 1)[-1]])


def dd_convert(h: HPolyhedron, eps: float = GEOM_EPS) -> VPolyhedron:
    """V-representation of a pointed, nonempty H-polyhedron.

    Enumerates every (q)-subset of rows of the homogenised system and keeps
    the feasible one-dimensional solution spaces.  Exponential in the number
    of rows, so it is only meant for small bootstrap systems.
    """
    H = _homogenized_rows(h)
    d = H.shape[1]
    k = H.shape[0]
    row_scale = np.maximum(np.max(np.abs(H), axis=1), 1e-300)
    Hn = H / row_scale[:, None]
    if k < d - 1:
        raise NotPointedError("too few constraints for a pointed polyhedron")
    subsets = np.array(list(itertools.combinations(range(k), d - 1)), dtype=int)
    found = []
    chunk = 4096
    for start in range(0, len(subsets), chunk):
        sub = subsets[start:start + chunk]
        M = Hn[sub]                                   # (s, d-1, d)
        _, sv, vt = np.linalg.svd(M)
        smax = np.maximum(sv[:, 0], 1e-300)
        full_rank = sv[:, -1] > 1e-10 * smax
        g = vt[:, -1, :]
        for gi in g[full_rank]:
            for sign in (1.0, -1.0):
                cand = sign * gi
                if np.all(Hn @ cand >= -eps * max(1.0, np.max(np.abs(cand)))):
                    found.append(cand)
                    break
    points, rays = [], []
    for g in found:
        if g[-1] > eps:
            points.append(g[:-1] / g[-1])
        else:
            r = g[:-1]
            if np.max(np.abs(r)) > eps:
                rays.append(_unit_inf(r))
    if not points:
        if _feasible(h):
            raise NotPointedError("polyhedron has no vertices (lineality space)")
        raise EmptyPolyhedronError("H-representation is infeasible")
    points = _dedupe(np.array(points))
    rays = _dedupe(np.array(rays)) if rays else np.zeros((0, h.dim))
    order = np.lexsort(points.T[::-1])
    return VPolyhedron(points[order], rays)


def _feasible(h: HPolyhedron) -> bool:
    lp = LinearProgram(np.zeros(h.dim), h.normals, h.offsets, [GE] * h.offsets.size)
    return solve_lp(lp).optimal


def _dedupe(X: np.ndarray, tol: float = MERGE_TOL) -> np.ndarray:
    keep = []
    for x in X:
        scale = max(1.0, np.max(np.abs(x)))
        if not any(np.max(np.abs(x - y)) <= tol * scale for y in keep):
            keep.append(x)
    return np.array(keep).reshape(-1, X.shape[1])


def cone_generators(N, q: int | None = None) -> np.ndarray:
    """Generators (columns) of ``{y : N y >= 0}``, lineality included as +-pairs."""
    N = np.asarray(N, dtype=float)
    if q is None:
        q = N.shape[1]
    N = N.reshape(-1, q)
    if N.shape[0] == 0:
        return _full_space(q)
    _, sv, vt = np.linalg.svd(N)
    rank = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300)))
    lineality = vt[rank:]
    gens = []
    if rank > 0:
        U = vt[:rank]                          # orthonormal basis of the row space
        reduced = HPolyhedron(N @ U.T, np.zeros(N.shape[0]))
        v = dd_convert(reduced)
        for z in v.directions:
            gens.append(_unit_inf(U.T @ z))
    for l in lineality:
        l = _unit_inf(l)
        gens.append(l)
        gens.append(-l)
    if not gens:
        return np.zeros((q, 0))
    G = np.array(gens)
    G[np.abs(G - np.round(G)) < 1e-12] = np.round(G[np.abs(G - np.round(G)) < 1e-12])
    return _dedupe(G).T


def recession_cone(h: HPolyhedron) -> PolyCone:
    Z = h.normals.T
    return PolyCone(cone_generators(h.normals, h.dim), Z)


def positive_dual(cone: PolyCone) -> PolyCone:
    return PolyCone(cone.Z, cone.Y)


def cone_interior_point(cone: PolyCone) -> np.ndarray:
    """A point ``c`` with ``Z.T c > 0`` and ``|c_q| = 1``.

    Tries the normalised sum of generators first and falls back to an LP that
    maximises the smallest normalised slack with ``c_q`` fixed to +1, then -1.
    """
    if not cone.is_solid:
        raise NonSolidConeError("cone has empty interior")
    q = cone.dim
    Z = cone.Z
    cand = cone.Y.sum(axis=1)
    if Z.shape[1] == 0:
        return np.eye(q)[-1]
    znorm = np.linalg.norm(Z, axis=0)
    if abs(cand[-1]) > 1e-12:
        c = cand / abs(cand[-1])
        if np.all(Z.T @ c > 1e-9 * znorm * max(1.0, np.max(np.abs(c)))):
            return c
    for sign in (1.0, -1.0):
        # variables (c, s): max s  s.t.  Z.T c - |z_i| s >= 0, c_q = sign, s <= 1
        A = np.vstack([np.hstack([Z.T, -znorm[:, None]]),
                       np.append(np.eye(q)[-1], 0.0)[None, :]])
        rhs = np.append(np.zeros(Z.shape[1]), sign)
        bounds = np.tile([-np.inf, np.inf], (q + 1, 1))
        bounds[-1] = [-np.inf, 1.0]
        obj = np.zeros(q + 1)
        obj[-1] = -1.0
        sol = solve_lp(LinearProgram(obj, A, rhs, [GE] * Z.shape[1] + [EQ], bounds))
        if sol.optimal and sol.x[-1] > 1e-9:
            c = sol.x[:q]
            c[-1] = sign
            return c
    raise NonSolidConeError("no interior point with nonzero last coordinate found")


# --------------------------------------------------------------------------
# outer approximations
# --------------------------------------------------------------------------

@dataclass
class OuterApprox:
    """H-representation with synchronised vertices, extreme rays and processed flags."""

    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray
    rays: np.ndarray
    processed: np.ndarray = field(default=None)

    def __post_init__(self):
        q = self.vertices.shape[1]
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, q)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        self.rays = np.asarray(self.rays, dtype=float).reshape(-1, q)
        if self.processed is None:
            self.processed = np.zeros(self.vertices.shape[0], dtype=bool)

    @classmethod
    def from_hrep(cls, h: HPolyhedron) -> "OuterApprox":
        v = dd_convert(h)
        return cls(h.normals.copy(), h.offsets.copy(), v.points, v.directions)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def hrep(self) -> HPolyhedron:
        return HPolyhedron(self.normals, self.offsets)

    @property
    def vrep(self) -> VPolyhedron:
        return VPolyhedron(self.vertices, self.rays)

    def unprocessed(self) -> np.ndarray:
        return np.flatnonzero(~self.processed)

    def mark_processed(self, index: int) -> None:
        self.processed[index] = True

    def copy(self) -> "OuterApprox":
        return OuterApprox(self.normals.copy(), self.offsets.copy(), self.vertices.copy(),
                           self.rays.copy(), self.processed.copy())


def _incidence(approx: OuterApprox, eps: float) -> np.ndarray:
    """Boolean (generators x rows+1) incidence matrix; last column is s >= 0."""
    V, R = approx.vertices, approx.rays
    N, o = approx.normals, approx.offsets
    nscale = np.maximum(np.max(np.abs(N), axis=1), 1e-300) if N.size else np.ones(0)
    resV = V @ N.T - o
    tolV = eps * nscale[None, :] * np.maximum(1.0, np.max(np.abs(V), axis=1))[:, None]
    resR = R @ N.T
    tolR = eps * nscale[None, :] * np.ones((R.shape[0], 1))
    inc = np.vstack([np.abs(resV) <= tolV, np.abs(resR) <= tolR])
    s_col = np.concatenate([np.zeros(V.shape[0], bool), np.ones(R.shape[0], bool)])
    return np.hstack([inc, s_col[:, None]])


def add_halfspace(approx: OuterApprox, w, gamma, eps: float = GEOM_EPS) -> OuterApprox:
    """Intersect ``approx`` with ``{y : w @ y >= gamma}``.

    Returns a new OuterApprox: the H-representation gains the row, vertices
    and rays violating the cut are dropped, and each adjacent pair straddling
    the hyperplane contributes a new generator on it.  Adjacency uses the
    combinatorial test on incidence sets (no third generator shares all the
    constraints tight at both).
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    gamma = float(gamma)
    q = approx.dim
    d = q + 1
    V, R = approx.vertices, approx.rays
    nv = V.shape[0]
    wscale = max(np.max(np.abs(w)), 1e-300)
    valV = V @ w - gamma
    valR = R @ w
    tolV = eps * wscale * np.maximum(1.0, np.max(np.abs(V), axis=1))
    tolR = eps * wscale * np.ones(R.shape[0])
    val = np.concatenate([valV, valR])
    tol = np.concatenate([tolV, tolR])
    plus = val > tol
    minus = val < -tol

    normals = np.vstack([approx.normals, w[None, :]])
    offsets = np.append(approx.offsets, gamma)
    if not minus.any():
        return OuterApprox(normals, offsets, V.copy(), R.copy(), approx.processed.copy())

    inc = _incidence(approx, eps)
    G = np.vstack([np.hstack([V, np.ones((nv, 1))]), np.hstack([R, np.zeros((R.shape[0], 1))])])
    P_idx = np.flatnonzero(plus)
    M_idx = np.flatnonzero(minus)
    new_gens = []
    if P_idx.size:
        common = inc[P_idx][:, None, :] & inc[M_idx][None, :, :]   # (p, m, k+1)
        counts = common.sum(axis=2)
        cand = np.argwhere(counts >= d - 2)
        if cand.size:
            C = common[cand[:, 0], cand[:, 1]].astype(np.int32)     # (pairs, k+1)
            cover = inc.astype(np.int32) @ C.T                      # (gens, pairs)
            supersets = (cover == counts[cand[:, 0], cand[:, 1]][None, :]).sum(axis=0)
            adj = cand[supersets == 2]
            for a, b in adj:
                i, j = P_idx[a], M_idx[b]
                g = val[i] * G[j] - val[j] * G[i]
                new_gens.append(g)

    keep = ~minus
    keepV, keepR = keep[:nv], keep[nv:]
    verts = list(V[keepV])
    rays = list(R[keepR])
    processed = list(approx.processed[keepV])
    for g in new_gens:
        if g[-1] > eps * max(1.0, np.max(np.abs(g[:-1]))):
            p = g[:-1] / g[-1]
            scale = max(1.0, np.max(np.abs(p)))
            if not any(np.max(np.abs(p - v)) <= MERGE_TOL * scale for v in verts):
                verts.append(p)
                processed.append(False)
        else:
            r = _unit_inf(g[:-1])
            if not any(np.max(np.abs(r - s)) <= MERGE_TOL for s in rays):
                rays.append(r)
    if not verts:
        raise EmptyPolyhedronError("cut leaves an empty polyhedron")
    return OuterApprox(normals, offsets, np.array(verts).reshape(-1, q),
                       np.array(rays).reshape(-1, q), np.array(processed, dtype=bool))


def same_point_set(A, B, tol: float = 1e-7) -> bool:
    """True if A and B contain the same rows up to permutation and ``tol``."""
    A = np.asarray(A, float).reshape(-1, np.shape(B)[1] if np.size(B) else np.shape(A)[-1])
    B = np.asarray(B, float).reshape(-1, A.shape[1])
    if A.shape[0] != B.shape[0]:
        return False
    used = np.zeros(B.shape[0], dtype=bool)
    for a in A:
        scale = max(1.0, np.max(np.abs(a)))
        dist = np.max(np.abs(B - a), axis=1) if B.size else np.array([])
        dist[used] = np.inf
        j = int(np.argmin(dist)) if dist.size else -1
        if j < 0 or dist[j] > tol * scale:
            return False
        used[j] = True
    return True
