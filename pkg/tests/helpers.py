import numpy as np

from qcpvlp.polyhedra import PolyCone
from qcpvlp.problems import make_example_41
from qcpvlp.runner import prepare
from qcpvlp.scalarization import VlpProblem


def tiny_vlp():
    """P = I, A = I, b = 0, C = R^2_+, c = (1, 1): upper image is R^2_+."""
    return VlpProblem(np.eye(2), np.eye(2), np.zeros(2), PolyCone.orthant(2), np.ones(2))


def example41_vlp():
    return prepare(make_example_41()).problem.vlp


def feasible_images(vlp, count, seed=0):
    """Images of LP-optimal points for random weights in the dual cone."""
    from qcpvlp.scalarization import solve_p1_d1
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        w = vlp.Z @ rng.uniform(0.05, 1, size=vlp.Z.shape[1])
        out.append(vlp.P @ solve_p1_d1(vlp, w).x)
    return np.array(out)


def random_vlp(seed, q=2, n=4, m=6, cone="orthant"):
    """Bounded random VLP: box-constrained random polytope and a random image map."""
    rng = np.random.default_rng(seed)
    A = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([-rng.uniform(0.5, 2.0, size=m), -np.ones(2 * n)])
    P = rng.normal(size=(q, n))
    if cone == "orthant":
        C = PolyCone.orthant(q)
    else:
        C = PolyCone.from_generators(np.eye(q) + 0.3 * rng.uniform(-1, 1, size=(q, q)) * (1 - np.eye(q)))
    from qcpvlp.polyhedra import cone_interior_point
    c = cone_interior_point(C)
    if c[-1] < 0:
        C = PolyCone(-C.Y, -C.Z)
        c = -c
    return VlpProblem(P, A, b, C, c / c[-1])


def match_within(A, B, atol):
    """Both point sets have the same size and each point has a partner within ``atol``."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape != B.shape:
        return False
    d = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2)
    return bool(np.all(d.min(axis=1) <= atol) and np.all(d.min(axis=0) <= atol))
