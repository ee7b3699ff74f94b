"""Command-line interface: solve, bench, table, profile and list.

Exit status is 0 on success, 1 when a single solve ends in numerical failure
and 2 on a usage error (bad flags, unreadable or invalid config or records).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from ..driver import SolverConfig, Status
from .problems import builtin_suite, get_problem
from .runner import read_records, record_to_dict, run_experiment, run_one, write_records
from .tables import DEFAULT_F_TOLS, equivalence_table, gnuplot_script, performance_profile

_log = logging.getLogger("boxnmr")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if hasattr(v, "value"):
        return v.value
    return str(v)


def _dump(obj) -> str:
    return json.dumps(obj, default=_jsonable)


def _load_config(path, algorithm=None, epsilon=None, time_limit=None) -> SolverConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
            raise UsageError(f"config {path} must be a flat JSON object")
        data.setdefault("label", data.get("label") or Path(path).stem)
    if algorithm is not None:
        data["algorithm"] = algorithm
    if epsilon is not None:
        data["epsilon"] = epsilon
    if time_limit is not None:
        data["time_limit_seconds"] = time_limit
    try:
        return SolverConfig.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _trace_rows(rec) -> list[dict]:
    rows = []
    for e in rec.trace:
        row = {k: v for k, v in e.to_dict().items() if k != "info"}
        info = e.info
        for key in ("d_type", "minres_iters", "flag", "step", "lambda", "s_norm"):
            row[key] = info.get(key)
        rows.append(row)
    return rows


def cmd_list(args) -> int:
    probs = builtin_suite()
    rows = [{"name": p.name, "n": p.n, "f_opt": p.f_opt, "tags": " ".join(p.tags)} for p in probs]
    if args.format == "json":
        text = "".join(_dump(r) + "\n" for r in rows)
    elif args.format == "csv":
        text = _csv(rows)
    else:
        text = "".join(f"{r['name']:<26} n={r['n']:<4} f_opt={r['f_opt']!s:<22} {r['tags']}\n"
                       for r in rows)
    _emit(text, args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        problem = get_problem(args.problem)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    cfg = _load_config(args.config, args.algorithm, args.epsilon, args.time_limit)
    rec = run_one(problem, cfg)
    summary = record_to_dict(rec)
    summary.pop("version")
    summary["message"] = rec.message
    trace = _trace_rows(rec) if args.trace else []
    if args.format == "json":
        text = _dump(summary) + "\n" + "".join(_dump(r) + "\n" for r in trace)
    elif args.format == "csv":
        text = _csv([summary]) + ("\n" + _csv(trace) if trace else "")
    else:
        text = "".join(f"{k:>14}: {v}\n" for k, v in summary.items())
        if trace:
            text += "\n  k  kind                  f                      |g|_inf     free  tol\n"
            for r in trace:
                tol = "" if r["tol"] is None else f"{r['tol']:.2e}"
                text += (f"{r['k']:>3}  {r['step_kind'] or '-':<20}  {r['f']:<22.15g} "
                         f"{r['grad_norm']:<11.3e} {r['n_free']:>4}  {tol}\n")
    _emit(text, args.output)
    return EXIT_NUMERICAL if rec.status is Status.NUMERICAL_FAILURE else EXIT_OK


def cmd_bench(args) -> int:
    if args.problem:
        try:
            problems = [get_problem(n) for n in args.problem]
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
    else:
        problems = builtin_suite()
    if args.config:
        configs = [_load_config(p, None, args.epsilon, args.time_limit) for p in args.config]
    else:
        algos = args.algorithm or ["p", "t"]
        configs = [_load_config(None, a, args.epsilon, args.time_limit) for a in algos]
    try:
        records = run_experiment(problems, configs, args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    output = args.output or "runs.jsonl"
    write_records(records, output)
    counts = {}
    for r in records:
        counts[r.status.value] = counts.get(r.status.value, 0) + 1
    _log.info("wrote %d records to %s (%s)", len(records), output,
              ", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def _records(path):
    try:
        return read_records(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read records {path}: {exc}") from exc


def cmd_table(args) -> int:
    rows = _records(args.records)
    f_tols = args.f_tol or list(DEFAULT_F_TOLS)
    try:
        table = equivalence_table(rows, f_tols)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "json":
        text = _dump(table.to_json()) + "\n"
    elif args.format == "csv":
        text = table.to_csv()
    else:
        text = table.to_text()
    _emit(text, args.output)
    return EXIT_OK


def cmd_profile(args) -> int:
    rows = _records(args.records)
    f_tol = args.f_tol[0] if args.f_tol else 0.1
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            prof = performance_profile(rows, f_tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for w in caught:
        _log.warning("%s", w.message)
    csv_text = prof.to_csv()
    if not args.output:
        sys.stdout.write(csv_text)
        return EXIT_OK
    out = Path(args.output)
    out.write_text(csv_text)
    png = out.with_suffix(".png")
    out.with_suffix(".gp").write_text(gnuplot_script(out.name, prof.methods,
                                                     out.with_suffix(".gnuplot.png").name))
    if not args.no_figure and not prof.empty:
        from .plotting import plot_profile
        plot_profile(prof, png, f"Performance profile, f_tol = {f_tol:g} "
                                f"({len(prof.problems)} problems)")
    _log.info("wrote %s, %s%s", out, out.with_suffix(".gp"),
              "" if args.no_figure or prof.empty else f", {png}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write results to this path instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--verbose", "-v", action="count", default=0)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--epsilon", type=float, help="stopping tolerance on the reduced gradient")
    solver.add_argument("--time-limit", type=float, help="per-run wall-clock limit in seconds")

    parser = argparse.ArgumentParser(prog="boxnmr", description="Active-set Newton-MR solvers "
                                     "for bound-constrained minimization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", parents=[common], help="list the built-in problems")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("solve", parents=[common, solver], help="solve one problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--algorithm", choices=("p", "t"))
    p.add_argument("--config", help="flat JSON file of solver parameters")
    p.add_argument("--trace", action="store_true", help="also print the per-iteration trace")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", parents=[common, solver], help="run the suite into a records file")
    p.add_argument("--problem", action="append", help="restrict to this problem (repeatable)")
    p.add_argument("--algorithm", choices=("p", "t"), action="append",
                   help="default configuration of this algorithm (repeatable; default both)")
    p.add_argument("--config", action="append", help="configuration file (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="number of worker processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("table", parents=[common], help="success counts per tolerance")
    p.add_argument("records")
    p.add_argument("--f-tol", type=float, action="append", help="tolerance (repeatable)")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("profile", parents=[common], help="performance profile as CSV, "
                       "gnuplot script and PNG")
    p.add_argument("records")
    p.add_argument("--f-tol", type=float, action="append", help="equivalence tolerance (0.1)")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG rendering")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench" and args.verbose == 0:
        logging.getLogger("boxnmr").setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"boxnmr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
