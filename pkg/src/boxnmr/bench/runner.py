"""Run (problem, configuration) pairs, optionally in a process pool, and
persist the summaries as line-delimited JSON."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from ..driver import RunRecord, SolverConfig, Status, solve
from .problems import BenchmarkProblem

_log = logging.getLogger(__name__)

RECORDS_VERSION = 1
RECORD_FIELDS = ("problem", "config_label", "status", "f", "grad_norm", "iterations",
                 "n_f", "n_g", "n_hv", "wall_seconds", "version")


def run_one(problem: BenchmarkProblem, config: SolverConfig) -> RunRecord:
    """Solve one problem with one configuration; failures become statuses."""
    oracle = problem.oracle()
    try:
        rec = solve(oracle, problem.bounds, problem.x0, config)
    except Exception as exc:  # a broken objective must not abort the batch
        _log.warning("run %s/%s raised %r", problem.name, config.name, exc)
        c = oracle.counters()
        rec = RunRecord(Status.NUMERICAL_FAILURE, np.asarray(problem.x0, dtype=float), np.nan,
                        np.nan, 0, c["n_f"], c["n_g"], c["n_hv"], 0.0, message=repr(exc))
    rec.problem = problem.name
    rec.config_label = config.name
    return rec


def _run_pair(args):
    return run_one(*args)


def run_experiment(problems: Sequence[BenchmarkProblem], configs: Sequence[SolverConfig],
                   parallelism: int = 1) -> list[RunRecord]:
    """Run every problem under every configuration.

    Records come back ordered by (problem, configuration) as given, whatever
    order the workers finish in.  Configuration labels must be distinct.
    """
    if not problems or not configs:
        raise ValueError("need at least one problem and one configuration")
    labels = [c.name for c in configs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"configuration labels must be distinct, got {labels}")
    pairs = [(p, c) for p in problems for c in configs]
    if parallelism <= 1:
        return [run_one(p, c) for p, c in pairs]
    workers = min(parallelism, len(pairs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_pair, pairs))


def record_to_dict(rec: RunRecord) -> dict:
    out = rec.summary()
    out["version"] = RECORDS_VERSION
    return {k: out[k] for k in RECORD_FIELDS}


def _json_float(v):
    # JSON has no inf/nan; keep them readable and round-trippable
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


def write_records(records: Iterable[RunRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            row = {k: _json_float(v) for k, v in record_to_dict(rec).items()}
            fh.write(json.dumps(row) + "\n")


def read_records(path) -> list[dict]:
    """Load a records file; floats stored as strings (``inf``, ``nan``) are restored."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            missing = [k for k in RECORD_FIELDS if k not in row]
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {missing}")
            if row["version"] != RECORDS_VERSION:
                raise ValueError(f"{path}:{lineno}: unsupported records version {row['version']}")
            for k in ("f", "grad_norm", "wall_seconds"):
                if isinstance(row[k], str):
                    row[k] = float(row[k])
            rows.append(row)
    return rows
