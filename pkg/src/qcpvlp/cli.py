"""Command-line front end: ``solve``, ``gen`` and ``bench``.

Exit codes: 0 success, 1 solver failure, 2 usage or parse error.  Failures
print a one-line JSON object ``{"error": ..., "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as qio
from . import scalarization
from .errors import QcpError
from .runner import ALGORITHMS, solve, solve_vlp

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2
QCP_ALGORITHMS = ("primal", "dual", "dual-se")


class UsageError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse vector {text!r}") from None
    if not vals:
        raise UsageError("empty vector")
    return np.array(vals)


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def parse_seeds(text: str) -> list[int]:
    """``"0-9"``, ``"1,4,7"`` or a mix such as ``"0-2,8"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed specification {part!r}") from None
    if not seeds:
        raise UsageError("seed list is empty")
    return seeds


def parse_grid(text: str, family: str) -> list[tuple[int, ...]]:
    """Cells separated by commas; ``q:m:n`` for lmp and ``q:n`` for cqp."""
    want = 3 if family == "lmp" else 2
    cells = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            cell = tuple(int(v) for v in part.split(":"))
        except ValueError:
            raise UsageError(f"bad grid cell {part!r}") from None
        if len(cell) != want or min(cell) < 1:
            raise UsageError(f"grid cell {part!r} needs {want} positive integers")
        cells.append(cell)
    if not cells:
        raise UsageError("grid is empty")
    return cells


def _set_tolerance(tol: float | None) -> None:
    if tol is None:
        return
    if not tol > 0:
        raise UsageError("--tolerance must be positive")
    os.environ["QCP_LP_TOL"] = repr(tol)
    scalarization.Z_TOL = tol


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

def _listed(a):
    return None if a is None else np.asarray(a).tolist()


def _load(args) -> qio.LoadedProblem:
    if bool(args.builtin) == bool(args.input):
        raise UsageError("give exactly one of --builtin and --input")
    if args.builtin:
        params = _parse_params(args.param)
        if args.seed is not None:
            params["seed"] = args.seed
        return qio.builtin_problem(args.builtin, params)
    return qio.load_problem(args.input)


def cmd_solve(args) -> int:
    _set_tolerance(args.tolerance)
    loaded = _load(args)
    c = _parse_vector(args.c) if args.c else None
    if args.algorithm in QCP_ALGORITHMS:
        res = solve(loaded.model, args.algorithm, c=c)
        out = loaded.report(res)
        history = res.history
        approxes = {"primal": res.approx, "dual": res.dual_approx}
    else:
        t0 = time.perf_counter()
        prep, run = solve_vlp(loaded.model, args.algorithm, c=c)
        out = {"algorithm": args.algorithm, "family": loaded.family, "params": loaded.params,
               "iterations": run.iterations, "lp_solves": run.lp_solves,
               "wall_time": time.perf_counter() - t0,
               "lifted": prep.lifted is not None, "flipped": prep.flipped,
               "points": _listed(run.images.primal_points),
               "directions": _listed(run.images.primal_dirs),
               "dual_points": _listed(run.images.dual_points)}
        history = run.log
        approxes = {"primal" if args.algorithm == "benson-primal" else "dual": run.approx}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.log:
        qio.write_log(history, args.log)
    if args.dump_approx:
        for kind, approx in approxes.items():
            if approx is not None:
                qio.write_vertices(approx, f"{args.dump_approx}_{kind}.csv", kind)
    return EXIT_OK


# --------------------------------------------------------------------------
# gen
# --------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.q is None or args.q < 1:
        raise UsageError("--q must be a positive integer")
    d = qio.generate_instance(args.family, args.q, args.m, args.n, args.seed or 0)
    text = json.dumps(d, indent=1, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------

def _bench_one(family: str, cell: tuple, seed: int, algorithms: tuple) -> dict:
    if family == "lmp":
        q, m, n = cell
        loaded = qio.problem_from_dict({"family": "lmp", "q": q, "m": m, "n": n, "seed": seed})
    else:
        q, n = cell
        loaded = qio.problem_from_dict({"family": "cqp", "q": q, "n": n, "seed": seed})
    row = {"seed": seed}
    for alg in algorithms:
        try:
            res = solve(loaded.model, alg)
        except QcpError as exc:
            row[alg] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        row[alg] = {"time": res.wall_time, "iterations": res.iterations,
                    "lp_solves": res.lp_solves, "failed_cuts": res.failed_cuts,
                    "value": res.value}
    return row


def bench_rows(family: str, cells, seeds, algorithms=QCP_ALGORITHMS, jobs: int = 1) -> list[dict]:
    """Per-cell averages over the seeds; failing instances are counted and skipped."""
    rows = []
    for cell in cells:
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as ex:
                runs = list(ex.map(_bench_one, [family] * len(seeds), [cell] * len(seeds),
                                   seeds, [tuple(algorithms)] * len(seeds)))
        else:
            runs = [_bench_one(family, cell, s, tuple(algorithms)) for s in seeds]
        row = {"family": family, "q": cell[0],
               "m": cell[1] if family == "lmp" else "",
               "n": cell[-1], "seeds": len(seeds)}
        for alg in algorithms:
            ok = [r[alg] for r in runs if "error" not in r[alg]]
            row[f"{alg}_failures"] = len(runs) - len(ok)
            for key in ("time", "iterations", "lp_solves", "failed_cuts"):
                row[f"{alg}_{key}"] = float(np.mean([o[key] for o in ok])) if ok else ""
        rows.append(row)
    return rows


def cmd_bench(args) -> int:
    seeds = parse_seeds(args.seeds)
    cells = parse_grid(args.grid, args.family)
    algorithms = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    bad = [a for a in algorithms if a not in QCP_ALGORITHMS]
    if bad or not algorithms:
        raise UsageError(f"algorithms must be chosen from {QCP_ALGORITHMS}")
    _set_tolerance(args.tolerance)
    rows = bench_rows(args.family, cells, seeds, algorithms, args.jobs)
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcpvlp", description="Quasi-concave minimisation through vector linear "
                                           "programming outer approximation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem")
    s.add_argument("--builtin", help="builtin problem name")
    s.add_argument("--input", help="JSON problem file")
    s.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="builtin parameter, e.g. q=4 (repeatable)")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="primal")
    s.add_argument("--tolerance", type=float)
    s.add_argument("--seed", type=int, help="seed for generated builtins")
    s.add_argument("--c", help="interior point of the cone, comma-separated")
    s.add_argument("--output", help="result JSON path (default stdout)")
    s.add_argument("--log", help="CSV iteration log path")
    s.add_argument("--dump-approx", help="prefix for CSV vertex dumps of the final approximations")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="write a problem file")
    g.add_argument("family", choices=("lmp", "cqp", "dc_primal", "dc_dual", "boundary"))
    g.add_argument("--q", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="average statistics over seeded instances")
    b.add_argument("family", choices=("lmp", "cqp"))
    b.add_argument("--grid", required=True, help="cells q:m:n (lmp) or q:n (cqp), comma-separated")
    b.add_argument("--seeds", required=True, help="e.g. 0-9 or 1,3,5")
    b.add_argument("--algorithms", default=",".join(QCP_ALGORITHMS))
    b.add_argument("--tolerance", type=float)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except qio.ProblemFormatError as exc:
        return _fail("parse", str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_USAGE)
    except (QcpError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
