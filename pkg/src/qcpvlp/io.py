"""Problem files, result files, iteration logs and vertex dumps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .polyhedra import OuterApprox, PolyCone
from .problems import (DcInstance, LmpInstance, dc_recover, example_75, gen_cqp_random, gen_lmp_random,
                       make_cqp, make_dc_dual, make_dc_primal, make_example_41,
                       make_example_61, make_example_73, make_lmp, neg_square_objective,
                       product_objective, sin_floor_matrix)
from .qcp import Objective, QcpModel, QcpResult

FAMILIES = ("lmp", "cqp", "dc_primal", "dc_dual", "boundary", "example41", "example61",
            "raw_qcp")


class ProblemFormatError(ValueError):
    """A problem file or builtin specification could not be interpreted."""


@dataclass
class LoadedProblem:
    family: str
    model: QcpModel
    params: dict = field(default_factory=dict)
    dc: DcInstance | None = None

    def report(self, result: QcpResult) -> dict:
        out = result.to_dict()
        out["family"] = self.family
        out["params"] = self.params
        if self.dc is not None:
            x = dc_recover(self.dc, result.y)
            out["dc_solution"] = x.tolist()
            out["dc_value"] = _num(self.dc.objective(x))
        return out


def _num(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "-inf" if v < 0 else "inf"


# --------------------------------------------------------------------------
# builtin objectives for raw problems
# --------------------------------------------------------------------------

def _linear(params):
    a = np.asarray(params["a"], dtype=float)
    return Objective(lambda y: float(a @ y), "linear", params)


def _neg_weighted_square(params):
    w = np.asarray(params.get("weights", []), dtype=float)
    if w.size == 0:
        return neg_square_objective()
    return Objective(lambda y: -float(np.sum(w * y * y)), "neg_weighted_square", params)


OBJECTIVES = {
    "product": lambda p: product_objective(p.get("d")),
    "neg_square": _neg_weighted_square,
    "linear": _linear,
    "example41": lambda p: make_example_41().f,
    "example61": lambda p: make_example_61().f,
}


def objective_from_dict(desc: dict) -> Objective:
    name = desc.get("name")
    if name not in OBJECTIVES:
        raise ProblemFormatError(f"unknown objective {name!r}; known: {sorted(OBJECTIVES)}")
    try:
        return OBJECTIVES[name](desc.get("params", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"bad parameters for objective {name!r}: {exc}") from None


# --------------------------------------------------------------------------
# problem construction
# --------------------------------------------------------------------------

def _int(d, key, default=None):
    v = d.get(key, default)
    if v is None:
        raise ProblemFormatError(f"missing integer field {key!r}")
    try:
        iv = int(v)
    except (TypeError, ValueError):
        raise ProblemFormatError(f"field {key!r} must be an integer") from None
    if iv != float(v):
        raise ProblemFormatError(f"field {key!r} must be an integer")
    return iv


def problem_from_dict(d: dict) -> LoadedProblem:
    if not isinstance(d, dict):
        raise ProblemFormatError("problem description must be a JSON object")
    family = d.get("family")
    if family not in FAMILIES:
        raise ProblemFormatError(f"unknown family {family!r}; expected one of {FAMILIES}")
    try:
        return _build(family, d)
    except ProblemFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"invalid {family} description: {exc}") from None


def _build(family: str, d: dict) -> LoadedProblem:
    if family == "lmp":
        if "instance" in d:
            inst = LmpInstance.from_dict(d["instance"])
            params = {}
        else:
            params = {k: _int(d, k) for k in ("q", "m", "n", "seed")}
            inst = gen_lmp_random(**params)
        return LoadedProblem(family, make_lmp(inst), params)
    if family == "cqp":
        q, n = _int(d, "q"), _int(d, "n")
        if "seed" in d and "P" not in d:
            seed = _int(d, "seed")
            return LoadedProblem(family, gen_cqp_random(q, n, seed), {"q": q, "n": n, "seed": seed})
        model = make_cqp(q, n)
        if "P" in d:
            P = np.asarray(d["P"], dtype=float)
            if P.shape != (q, n):
                raise ProblemFormatError("embedded P has the wrong shape")
            model.P = P
        return LoadedProblem(family, model, {"q": q, "n": n})
    if family in ("dc_primal", "dc_dual"):
        q = _int(d, "q")
        if q < 1:
            raise ProblemFormatError("q must be positive")
        orient = "primal" if family == "dc_primal" else "dual"
        dc = make_example_73(q, orient)
        model = make_dc_primal(dc) if orient == "primal" else make_dc_dual(dc)
        return LoadedProblem(family, model, {"q": q}, dc)
    if family == "boundary":
        q, m = _int(d, "q"), _int(d, "m")
        if not 1 <= q <= m:
            raise ProblemFormatError("need 1 <= q <= m")
        dc, _ = example_75(q, m)
        return LoadedProblem(family, make_dc_dual(dc), {"q": q, "m": m}, dc)
    if family == "example41":
        c = d.get("c", [-0.25, 1.0])
        return LoadedProblem(family, make_example_41(c), {"c": list(map(float, c))})
    if family == "example61":
        return LoadedProblem(family, make_example_61(), {})
    # raw_qcp
    P = np.atleast_2d(np.asarray(d["P"], dtype=float))
    A = np.asarray(d["A"], dtype=float)
    b = np.asarray(d["b"], dtype=float)
    cone = PolyCone.from_dict(d["cone"]) if "cone" in d else PolyCone.orthant(P.shape[0])
    f = objective_from_dict(d["objective"])
    c = d.get("c")
    model = QcpModel(P, A.reshape(b.size, P.shape[1]), b, cone, f,
                     None if c is None else np.asarray(c, dtype=float), name="raw_qcp")
    return LoadedProblem(family, model, {})


def load_problem(path) -> LoadedProblem:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: malformed JSON ({exc})") from None
    return problem_from_dict(d)


def builtin_problem(name: str, params: dict | None = None) -> LoadedProblem:
    """Builtins: example41, example61, example73 (q), example73-primal (q), example75 (q, m),
    cqp (q, n), lmp (q, m, n, seed)."""
    params = dict(params or {})
    table = {
        "example41": {"family": "example41"},
        "example61": {"family": "example61"},
        "example73": {"family": "dc_dual", "q": 3},
        "example73-primal": {"family": "dc_primal", "q": 3},
        "example75": {"family": "boundary", "q": 1, "m": 10},
        "cqp": {"family": "cqp", "q": 2, "n": 10},
        "lmp": {"family": "lmp", "q": 2, "m": 20, "n": 30, "seed": 0},
    }
    if name not in table:
        raise ProblemFormatError(f"unknown builtin {name!r}; known: {sorted(table)}")
    d = dict(table[name])
    d.update(params)
    return problem_from_dict(d)


def generate_instance(family: str, q: int, m: int | None = None, n: int | None = None,
                      seed: int = 0) -> dict:
    """Problem-file dictionary with all data embedded."""
    if q is None or q < 1:
        raise ProblemFormatError("q must be a positive integer")
    if family == "lmp":
        if not m or not n or m < 1 or n < 1:
            raise ProblemFormatError("lmp needs positive m and n")
        inst = gen_lmp_random(q, m, n, seed)
        return {"family": "lmp", "generator": {"q": q, "m": m, "n": n, "seed": seed,
                                                "rng": "PCG64"},
                "instance": inst.to_dict()}
    if family == "cqp":
        if not n or n < q:
            raise ProblemFormatError("cqp needs n >= q")
        return {"family": "cqp", "q": q, "n": n, "P": sin_floor_matrix(q, n).tolist()}
    if family in ("dc_primal", "dc_dual"):
        return {"family": family, "q": q}
    if family == "boundary":
        if not m or m < q:
            raise ProblemFormatError("boundary needs m >= q")
        return {"family": "boundary", "q": q, "m": m}
    raise ProblemFormatError(f"cannot generate family {family!r}")


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_log(history, path) -> None:
    rows = [rec.as_row() for rec in history]
    fields = list(rows[0].keys()) if rows else ["iteration"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def write_vertices(approx: OuterApprox, path, kind: str = "primal") -> None:
    """CSV of vertices and extreme directions, one per line, for external plotting."""
    q = approx.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "type", "processed"] + [f"y{i + 1}" for i in range(q)])
        for v, p in zip(approx.vertices, approx.processed):
            w.writerow([kind, "point", int(p)] + [repr(float(a)) for a in v])
        for r in approx.rays:
            w.writerow([kind, "direction", ""] + [repr(float(a)) for a in r])


def approx_to_dict(approx: OuterApprox) -> dict:
    return {"normals": approx.normals.tolist(), "offsets": approx.offsets.tolist(),
            "points": approx.vertices.tolist(), "directions": approx.rays.tolist()}
