"""Outer approximation algorithms for the upper image and the lower image.

``benson_primal`` shrinks an outer approximation of the upper image
``P[S] + C`` with translative cuts until every vertex is confirmed.
``benson_dual`` does the same for the lower image of the dual problem using
weighted-sum LPs and coupling-function cuts.  ``geometric_duality_check``
compares the two results face by face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometricDualityError
from .polyhedra import (GEOM_EPS, HPolyhedron, OuterApprox, add_halfspace, dd_convert,
                        same_point_set)
from .scalarization import (VlpProblem, check_bounded, coupling_phi, delta_hrep, dual_cut,
                            omega, solve_p1_d1, solve_p2_d2, z_tolerance)

logger = logging.getLogger(__name__)

MAX_ITER = 10_000


@dataclass
class IterationRecord:
    """One row of an iteration log; unused fields stay ``None``."""

    iteration: int
    t: np.ndarray | None = None
    f_t: float | None = None
    t_star: np.ndarray | None = None
    phi: float | None = None
    z: float | None = None
    lp_status: str = "optimal"
    action: str = ""
    cut_normal: np.ndarray | None = None
    cut_offset: float | None = None
    n_vertices: int = 0

    def as_row(self) -> dict:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, np.ndarray):
                return " ".join(repr(float(a)) for a in v)
            return v
        return {k: fmt(v) for k, v in self.__dict__.items()}


@dataclass
class ImagePair:
    """V- and H-descriptions of the upper image and/or the lower image."""

    c: np.ndarray
    primal_points: np.ndarray | None = None
    primal_dirs: np.ndarray | None = None
    primal_hrep: HPolyhedron | None = None
    dual_points: np.ndarray | None = None
    dual_hrep: HPolyhedron | None = None

    @property
    def dual_dirs(self) -> np.ndarray:
        q = self.c.size
        return -np.eye(q)[-1:]

    def merged(self, other: "ImagePair") -> "ImagePair":
        pick = lambda a, b: a if a is not None else b
        return ImagePair(self.c,
                         pick(self.primal_points, other.primal_points),
                         pick(self.primal_dirs, other.primal_dirs),
                         pick(self.primal_hrep, other.primal_hrep),
                         pick(self.dual_points, other.dual_points),
                         pick(self.dual_hrep, other.dual_hrep))


@dataclass
class VlpRun:
    approx: OuterApprox
    images: ImagePair
    solutions: list = field(default_factory=list)
    log: list = field(default_factory=list)
    iterations: int = 0
    lp_solves: int = 0


def initial_outer_approx(vlp: VlpProblem, backend=None) -> OuterApprox:
    """``{y : Z.T y >= beta}`` with ``beta_i`` the weighted-sum value for column ``i`` of Z."""
    betas = check_bounded(vlp, backend)
    return OuterApprox.from_hrep(HPolyhedron(vlp.Z.T.copy(), betas))


def _lex_first(points: np.ndarray, candidates: np.ndarray) -> int:
    sub = points[candidates]
    order = np.lexsort(sub.T[::-1])
    return int(candidates[order[0]])


def _still_vertex(approx: OuterApprox, t: np.ndarray) -> bool:
    if approx.vertices.shape[0] == 0:
        return False
    scale = max(1.0, np.max(np.abs(t)))
    return bool(np.min(np.max(np.abs(approx.vertices - t), axis=1)) <= 1e-9 * scale)


def benson_primal(vlp: VlpProblem, O0: OuterApprox | None = None, backend=None,
                  max_iter: int = MAX_ITER) -> VlpRun:
    """Outer approximation of the upper image by translative cuts.

    Vertices are handled in lexicographic order; a vertex is confirmed once
    its translative LP reports ``z <= tol``.  Confirmed vertices stay
    confirmed for the rest of the run.
    """
    approx = O0.copy() if O0 is not None else initial_outer_approx(vlp, backend)
    run = VlpRun(approx, ImagePair(vlp.c))
    lp_solves = len(approx.offsets) if O0 is None else 0
    preimage: dict[bytes, np.ndarray] = {}
    it = 0
    while True:
        todo = approx.unprocessed()
        if todo.size == 0:
            break
        it += 1
        if it > max_iter:
            raise RuntimeError("iteration limit reached")
        idx = _lex_first(approx.vertices, todo)
        t = approx.vertices[idx].copy()
        res = solve_p2_d2(vlp, t, backend)
        lp_solves += 1
        rec = IterationRecord(it, t=t, z=res.z, cut_normal=res.w, cut_offset=res.offset)
        if res.z > z_tolerance(t):
            new = add_halfspace(approx, res.w, res.offset)
            if _still_vertex(new, t):
                # numerically ineffective cut: accept t rather than loop
                logger.debug("cut did not remove %s; accepting it", t)
                approx.mark_processed(idx)
                preimage[t.tobytes()] = res.x
                rec.action = "stalled"
            else:
                approx = new
                rec.action = "cut"
        else:
            approx.mark_processed(idx)
            preimage[t.tobytes()] = res.x
            rec.action = "confirm"
        rec.n_vertices = approx.vertices.shape[0]
        run.log.append(rec)
    run.approx = approx
    run.iterations = it
    run.lp_solves = lp_solves
    run.solutions = [preimage.get(v.tobytes()) for v in approx.vertices]
    run.images = ImagePair(vlp.c, approx.vertices.copy(), vlp.cone.Y.T.copy(),
                           facet_hrep(approx))
    return run


def dual_start(vlp: VlpProblem) -> tuple[np.ndarray, np.ndarray]:
    """Initial dual point: normalised sum of the columns of Z (last entry +inf)."""
    w = vlp.Z.sum(axis=1)
    t_star = w / (vlp.c @ w)
    t_star[-1] = np.inf
    return t_star, w / (vlp.c @ w)


def bootstrap_dual(vlp: VlpProblem, y: np.ndarray) -> OuterApprox:
    """Vertices of the starting region intersected with the first dual cut."""
    normals, offsets = delta_hrep(vlp.cone, vlp.c)
    a, g = dual_cut(y, vlp.c)
    h = HPolyhedron(np.vstack([normals, a]), np.append(offsets, g))
    return OuterApprox.from_hrep(h)


def benson_dual(vlp: VlpProblem, backend=None, max_iter: int = MAX_ITER) -> VlpRun:
    """Outer approximation of the lower image by coupling-function cuts."""
    t_star, w = dual_start(vlp)
    res = solve_p1_d1(vlp, w, backend)
    y = vlp.P @ res.x
    approx = bootstrap_dual(vlp, y)
    run = VlpRun(approx, ImagePair(vlp.c))
    a, g = dual_cut(y, vlp.c)
    run.log.append(IterationRecord(1, t_star=t_star, z=np.inf, action="cut", cut_normal=a,
                                   cut_offset=g, n_vertices=approx.vertices.shape[0]))
    points = [y]
    it, lp_solves = 1, 1
    while True:
        todo = approx.unprocessed()
        if todo.size == 0:
            break
        it += 1
        if it > max_iter:
            raise RuntimeError("iteration limit reached")
        idx = _lex_first(approx.vertices, todo)
        t_star = approx.vertices[idx].copy()
        w = omega(t_star, vlp.c)
        res = solve_p1_d1(vlp, w, backend)
        lp_solves += 1
        y = vlp.P @ res.x
        gap = t_star[-1] - w @ y
        rec = IterationRecord(it, t_star=t_star, z=gap)
        if gap > z_tolerance(t_star):
            a, g = dual_cut(y, vlp.c)
            new = add_halfspace(approx, a, g)
            rec.cut_normal, rec.cut_offset = a, g
            if _still_vertex(new, t_star):
                approx.mark_processed(idx)
                rec.action = "stalled"
            else:
                approx = new
                points.append(y)
                rec.action = "cut"
        else:
            approx.mark_processed(idx)
            rec.action = "confirm"
        rec.n_vertices = approx.vertices.shape[0]
        run.log.append(rec)
    run.approx = approx
    run.iterations = it
    run.lp_solves = lp_solves
    run.solutions = points
    run.images = ImagePair(vlp.c, dual_points=approx.vertices.copy(),
                           dual_hrep=facet_hrep(approx))
    return run


# --------------------------------------------------------------------------
# faces and geometric duality
# --------------------------------------------------------------------------

def facet_hrep(approx: OuterApprox, eps: float = 1e-7) -> HPolyhedron:
    """Irredundant H-representation: rows whose tight generators span a hyperplane."""
    q = approx.dim
    V, R = approx.vertices, approx.rays
    G = np.vstack([np.hstack([V, np.ones((V.shape[0], 1))]),
                   np.hstack([R, np.zeros((R.shape[0], 1))])])
    rows, offs = [], []
    for a, g in zip(approx.normals, approx.offsets):
        scale = max(np.max(np.abs(a)), 1e-300)
        res = np.concatenate([V @ a - g, R @ a])
        tol = eps * scale * np.concatenate([np.maximum(1.0, np.max(np.abs(V), axis=1)),
                                            np.ones(R.shape[0])])
        tight = np.abs(res) <= tol
        if tight.sum() < q or np.linalg.matrix_rank(G[tight], tol=1e-9) < q:
            continue
        an, gn = a / scale, g / scale
        if any(np.max(np.abs(an - r)) <= 1e-7 and abs(gn - o) <= 1e-7 * max(1, abs(gn))
               for r, o in zip(rows, offs)):
            continue
        rows.append(an)
        offs.append(gn)
    return HPolyhedron(np.array(rows).reshape(-1, q), np.array(offs))


def primal_facets_as_dual_points(h: HPolyhedron, c: np.ndarray) -> np.ndarray:
    """Map facets ``w @ y >= gamma`` of the upper image to lower-image points."""
    out = []
    for w, g in zip(h.normals, h.offsets):
        cw = c @ w
        if cw <= 1e-12:
            continue
        w, g = w / cw, g / cw
        out.append(np.append(w[:-1], g))
    return np.array(out).reshape(-1, c.size)


def split_dual_facets(h: HPolyhedron, eps: float = GEOM_EPS):
    """Return (non-vertical rows, vertical rows) of a lower-image H-representation."""
    scale = np.maximum(np.max(np.abs(h.normals), axis=1), 1e-300)
    vertical = np.abs(h.normals[:, -1]) <= eps * scale
    return np.flatnonzero(~vertical), np.flatnonzero(vertical)


def dual_facets_as_primal_points(h: HPolyhedron, c: np.ndarray) -> np.ndarray:
    """Map non-vertical facets of the lower image to points of the upper image."""
    nonvert, _ = split_dual_facets(h)
    out = []
    for i in nonvert:
        a, beta = h.normals[i], h.offsets[i]
        s = -a[-1]
        if s <= 0:
            continue
        a, beta = a / s, beta / s
        yq = -beta
        out.append(np.append(a[:-1] + yq * c[:-1], yq))
    return np.array(out).reshape(-1, c.size)


@dataclass
class DualityReport:
    ok: bool
    n_primal_vertices: int
    n_dual_nonvertical_facets: int
    n_primal_facets: int
    n_dual_vertices: int
    max_incidence_residual: float
    min_phi: float
    unmatched_primal: list = field(default_factory=list)
    unmatched_dual: list = field(default_factory=list)


def _match(A: np.ndarray, B: np.ndarray):
    """Greedy nearest matching; returns (max distance, unmatched rows of A)."""
    worst, missing = 0.0, []
    for a in A:
        if B.shape[0] == 0:
            missing.append(a.tolist())
            continue
        d = np.max(np.abs(B - a), axis=1) / max(1.0, np.max(np.abs(a)))
        j = int(np.argmin(d))
        worst = max(worst, float(d[j]))
        if d[j] > 1e-6:
            missing.append(a.tolist())
    return worst, missing


def geometric_duality_check(images: ImagePair, tol: float = 1e-6,
                            strict: bool = False) -> DualityReport:
    """Compare a primal and a dual image description through the duality map.

    Checks that primal vertices and non-vertical dual facets correspond one to
    one, that primal facets and dual vertices correspond one to one, and that
    the coupling function is nonnegative on all vertex pairs.
    """
    c = images.c
    pv, dv = images.primal_points, images.dual_points
    ph, dh = images.primal_hrep, images.dual_hrep
    nonvert, _ = split_dual_facets(dh)
    from_dual = dual_facets_as_primal_points(dh, c)
    from_primal = primal_facets_as_dual_points(ph, c)
    r1, miss_p = _match(pv, from_dual)
    r1b, miss_p2 = _match(from_dual, pv)
    r2, miss_d = _match(dv, from_primal)
    r2b, miss_d2 = _match(from_primal, dv)
    phis = np.array([[coupling_phi(y, ys, c) for ys in dv] for y in pv])
    min_phi = float(phis.min()) if phis.size else 0.0
    resid = max(r1, r1b, r2, r2b)
    ok = (pv.shape[0] == len(nonvert) and ph.offsets.size == dv.shape[0]
          and resid < tol and min_phi >= -tol
          and same_point_set(pv, from_dual, tol) and same_point_set(dv, from_primal, tol))
    report = DualityReport(ok, pv.shape[0], len(nonvert), ph.offsets.size, dv.shape[0], resid,
                           min_phi, miss_p + miss_p2, miss_d + miss_d2)
    if strict and not ok:
        raise GeometricDualityError("upper and lower image descriptions do not correspond", report)
    return report
