"""Command-line interface: ``specoa generate | solve | oracle | bench``.

Exit codes: 0 optimal (or oracle agreement), 1 error, 2 limit reached,
3 infeasible, 4 oracle mismatch.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bsdp1 import ParseError, emit_instance, read_instance
from .instances import BRUTE_FORCE_CAP, FAMILIES, GeneratorSpec, brute_force
from .model import IsdpInstance
from .oa import CUT_MODES, OaLimits, run_lazy_soc, run_oa, run_oa_soc

__all__ = [
    "ALGORITHMS",
    "CSV_HEADER",
    "BenchRecord",
    "shifted_geometric_mean",
    "main",
]

ALGORITHMS = {"oa": run_oa, "oa_soc": run_oa_soc, "lazy_soc": run_lazy_soc}
CSV_HEADER = ("instance", "algo", "status", "value", "bound", "gap",
              "iterations", "cuts", "nodes", "time_s")
AGG_HEADER = ("config", "algo", "runs", "sgm_time_s", "limit_hits", "errors")
SGM_SHIFT = 10.0
ORACLE_RTOL = 1e-6

EXIT_OK, EXIT_ERROR, EXIT_LIMIT, EXIT_INFEASIBLE, EXIT_MISMATCH = 0, 1, 2, 3, 4
_STATUS_EXIT = {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE,
                "time_limit": EXIT_LIMIT, "iteration_limit": EXIT_LIMIT}


def shifted_geometric_mean(times, shift: float = SGM_SHIFT) -> float:
    """``(prod(t + s))**(1/n) - s``.

    The log of the product decides the route: when the product fits in a
    double it is formed directly (exact on round inputs), otherwise the mean
    of the logs is exponentiated.
    """
    y = np.asarray(list(times), float)
    if y.size == 0:
        raise ValueError("shifted geometric mean of an empty list")
    if shift < 0 or np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("times must be finite and nonnegative, shift nonnegative")
    if np.all(y == y[0]):
        return float(y[0])
    z = y + shift
    if np.any(z == 0):
        return -float(shift)
    logs = np.log(z)
    total = math.fsum(logs)
    if -700.0 < total < 700.0:
        return float(math.prod(z) ** (1.0 / y.size) - shift)
    return float(math.exp(total / y.size) - shift)


@dataclass
class BenchRecord:
    instance: str
    algo: str
    status: str
    value: float
    bound: float
    gap: float
    iterations: int
    cuts: int
    nodes: int
    time_s: float

    def row(self) -> list[str]:
        return [self.instance, self.algo, self.status, _num(self.value), _num(self.bound),
                _num(self.gap), str(self.iterations), str(self.cuts), str(self.nodes),
                f"{self.time_s:.4f}"]


def _num(v: float) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _record(name: str, rep) -> BenchRecord:
    return BenchRecord(name, rep.algo, rep.status, rep.value, rep.bound, rep.gap,
                       rep.iterations, rep.cuts, rep.nodes, rep.time_s)


def _solve(inst, algo: str, eps: float, time_limit: float, cut_mode: str | None):
    fn = ALGORITHMS[algo]
    if isinstance(inst, IsdpInstance) and algo != "oa":
        raise ValueError(f"--algo {algo} needs a binary QCQP instance; use --algo oa")
    kw = {}
    if cut_mode is not None:
        if algo == "oa" and cut_mode not in ("aggregate", "linear"):
            raise ValueError("--algo oa supports --cut-mode aggregate or linear")
        kw["cut_mode"] = cut_mode
    return fn(inst, eps=eps, limits=OaLimits(time_limit=time_limit), **kw)


# -- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        spec = GeneratorSpec(args.family, args.n, args.param, args.seed, args.card_relation)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = emit_instance(spec.generate())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load(path):
    try:
        return read_instance(path)
    except ParseError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
    return None


def _print_report(name, rep, as_csv: bool) -> None:
    rec = _record(name, rep)
    if as_csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow(rec.row())
    else:
        print(" ".join(f"{k}={v}" for k, v in zip(CSV_HEADER, rec.row())))


def _finite_json(d):
    return {k: (_num(v) if isinstance(v, float) and not math.isfinite(v) else v)
            for k, v in d.items()}


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if inst is None:
        return EXIT_ERROR
    try:
        rep = _solve(inst, args.algo, args.eps, args.time_limit, args.cut_mode)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    name = getattr(inst, "name", "") or Path(args.instance).stem
    if args.json:
        d = _finite_json(rep.as_dict())
        d["instance"] = name
        d["seed"] = args.seed
        print(json.dumps(d))
    else:
        _print_report(name, rep, args.csv)
    return _STATUS_EXIT.get(rep.status, EXIT_ERROR)


def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    if inst is None:
        return EXIT_ERROR
    if isinstance(inst, IsdpInstance):
        print("error: the brute-force oracle covers binary QCQP instances only", file=sys.stderr)
        return EXIT_ERROR
    if inst.n > BRUTE_FORCE_CAP:
        print(f"error: n={inst.n} exceeds the brute-force cap of {BRUTE_FORCE_CAP}",
              file=sys.stderr)
        return EXIT_ERROR
    bf = brute_force(inst)
    try:
        rep = _solve(inst, args.algo, args.eps, args.time_limit, args.cut_mode)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"brute_force={_num(bf.value)} {args.algo}={_num(rep.value)} status={rep.status}")
    if not bf.feasible:
        return EXIT_OK if rep.status == "infeasible" else EXIT_MISMATCH
    if rep.status == "infeasible" or not math.isfinite(rep.value):
        return EXIT_MISMATCH
    agree = abs(rep.value - bf.value) <= ORACLE_RTOL * max(1.0, abs(bf.value))
    return EXIT_OK if agree else EXIT_MISMATCH


def _bench_task(task):
    spec, algo, eps, time_limit, cut_mode = task
    try:
        rep = _solve(spec.generate(), algo, eps, time_limit, cut_mode)
        return _record(spec.name, rep)
    except Exception as exc:  # recorded as an error row, the sweep goes on
        logging.getLogger("specoa.cli").warning("%s/%s failed: %s", spec.name, algo, exc)
        nan = float("nan")
        return BenchRecord(spec.name, algo, "error", nan, nan, nan, 0, 0, 0, 0.0)


def _config_name(family, n, param) -> str:
    return f"{family}_n{n}_{'d' if family == 'qkp' else 'k'}{param:g}"


def bench_tasks(family, sizes, params, reps, algos, *, seed=0, eps=1e-6, time_limit=3600.0,
                cut_mode=None, card_relation="eq"):
    """``(config, task)`` pairs in output order: configuration, rep, algorithm."""
    out = []
    for n in sizes:
        for p in params:
            for r in range(reps):
                spec = GeneratorSpec(family, n, p, seed + r, card_relation)
                for algo in algos:
                    out.append((_config_name(family, n, p), (spec, algo, eps, time_limit, cut_mode)))
    return out


def aggregate(configs, records):
    """One row per ``(config, algo)``: run count, SGM of times, limit hits, errors."""
    groups: dict = {}
    for cfg, rec in zip(configs, records):
        groups.setdefault((cfg, rec.algo), []).append(rec)
    rows = []
    for (cfg, algo), recs in groups.items():
        ok = [r.time_s for r in recs if r.status != "error"]
        sgm = shifted_geometric_mean(ok) if ok else float("nan")
        limits = sum(r.status in ("time_limit", "iteration_limit") for r in recs)
        errors = sum(r.status == "error" for r in recs)
        rows.append([cfg, algo, str(len(recs)), f"{sgm:.4f}", str(limits), str(errors)])
    return rows


def cmd_bench(args) -> int:
    for algo in args.algos:
        if algo not in ALGORITHMS:
            print(f"error: unknown algorithm {algo!r}", file=sys.stderr)
            return EXIT_ERROR
    try:
        for n in args.sizes:
            for p in args.params:
                GeneratorSpec(args.family, n, p, 0, args.card_relation)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    pairs = bench_tasks(args.family, args.sizes, args.params, args.reps, args.algos,
                        seed=args.seed, eps=args.eps, time_limit=args.time_limit,
                        cut_mode=args.cut_mode, card_relation=args.card_relation)
    configs = [c for c, _ in pairs]
    tasks = [t for _, t in pairs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            records = list(ex.map(_bench_task, tasks))
    else:
        records = [_bench_task(t) for t in tasks]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow(rec.row())
    buf.write("\n")
    w.writerow(AGG_HEADER)
    for row in aggregate(configs, records):
        w.writerow(row)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    if records and all(r.status == "error" for r in records):
        return EXIT_ERROR
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _names(text: str) -> list[str]:
    return [t for t in text.replace(",", " ").split()]


def _solver_flags(p: argparse.ArgumentParser, *, with_algo: bool = True) -> None:
    if with_algo:
        p.add_argument("--algo", choices=sorted(ALGORITHMS), default="oa_soc")
    p.add_argument("--eps", type=float, default=1e-6, help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=3600.0, help="seconds")
    p.add_argument("--cut-mode", choices=CUT_MODES, default=None,
                   help="certificate cut form (default: aggregate for oa, soc otherwise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--card-relation", choices=("le", "eq"), default="eq")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specoa", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="log OA iterations to stderr (-vv for debug)")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark instance in BSDP1 format")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--param", type=float, required=True, help="k for BLS, density for QKP")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--card-relation", choices=("le", "eq"), default="eq")
    g.add_argument("--out", help="output path (default: stdout)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="solve an instance file")
    s.add_argument("--instance", required=True)
    _solver_flags(s)
    out = s.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true")
    out.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", parents=[common], help="compare a solver against brute force")
    o.add_argument("--instance", required=True)
    _solver_flags(o)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark sweep and write CSV")
    b.add_argument("--family", choices=FAMILIES, required=True)
    b.add_argument("--sizes", type=_ints, required=True)
    b.add_argument("--params", type=_floats, required=True)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--algos", type=_names, default=["oa", "oa_soc", "lazy_soc"])
    b.add_argument("--out")
    b.add_argument("--jobs", type=int, default=1)
    _solver_flags(b, with_algo=False)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 means "limit reached" here.
        return EXIT_ERROR if exc.code else EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                            format="%(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
