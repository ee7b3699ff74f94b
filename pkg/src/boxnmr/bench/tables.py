"""Robustness tables and performance profiles over benchmark records.

Two final values are equivalent at tolerance ``f_tol`` when

    f_i <= f_min + f_tol * max(1, |f_min|)

where ``f_min`` is the best value any method found on that problem.  A run
that reaches ``f_i <= -1e12`` also counts as a success.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..driver import RunRecord, UNBOUNDED_THRESHOLD

_log = logging.getLogger(__name__)

DEFAULT_F_TOLS = tuple(10.0 ** -k for k in range(1, 9))


def _rows(records) -> list[dict]:
    rows = []
    for r in records:
        if isinstance(r, RunRecord):
            r = {"problem": r.problem, "config_label": r.config_label, "f": r.f,
                 "wall_seconds": r.wall_seconds, "status": r.status.value}
        rows.append(r)
    return rows


def _grid(records):
    """``{problem: {method: row}}`` plus ordered problem and method lists."""
    rows = _rows(records)
    if not rows:
        raise ValueError("no records")
    problems, methods, grid = [], [], {}
    for r in rows:
        p, m = r["problem"], r["config_label"]
        if p is None or m is None:
            raise ValueError("record without problem or config label")
        if p not in grid:
            grid[p] = {}
            problems.append(p)
        if m not in methods:
            methods.append(m)
        if m in grid[p]:
            raise ValueError(f"duplicate record for ({p}, {m})")
        grid[p][m] = r
    missing = [(p, m) for p in problems for m in methods if m not in grid[p]]
    if missing:
        raise ValueError(f"missing records for {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return grid, problems, methods


def _value(f) -> float:
    # a run that produced no value can never be the best one
    return np.inf if f is None or np.isnan(f) else float(f)


def equivalent(f_i: float, f_min: float, f_tol: float) -> bool:
    f_i = _value(f_i)
    if f_i <= UNBOUNDED_THRESHOLD:
        return True
    return bool(f_i <= f_min + f_tol * max(1.0, abs(f_min)))


@dataclass
class EquivalenceTable:
    methods: list
    problems: list
    f_tols: list
    f_min: dict
    success: dict = field(repr=False)   # success[method][f_tol] -> {problem: bool}
    counts: dict = field(default_factory=dict)  # counts[method][f_tol] -> int

    def common_successes(self, f_tol: float) -> list:
        """Problems on which every method is successful at ``f_tol``."""
        return [p for p in self.problems
                if all(self.success[m][f_tol][p] for m in self.methods)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method"] + [f"{t:g}" for t in self.f_tols])
        for m in self.methods:
            w.writerow([m] + [self.counts[m][t] for t in self.f_tols])
        return buf.getvalue()

    def to_text(self) -> str:
        width = max(len("f_tol"), *(len(m) for m in self.methods))
        head = f"{'f_tol':<{width}}" + "".join(f"{t:>8.0e}" for t in self.f_tols)
        lines = [f"{len(self.problems)} problems", head]
        for m in self.methods:
            lines.append(f"{m:<{width}}" + "".join(f"{self.counts[m][t]:>8d}" for t in self.f_tols))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"problems": self.problems, "methods": self.methods,
                "f_tols": list(self.f_tols), "f_min": self.f_min,
                "counts": {m: {f"{t:g}": c for t, c in d.items()} for m, d in self.counts.items()}}


def equivalence_table(records, f_tols=DEFAULT_F_TOLS) -> EquivalenceTable:
    """Success flags and counts per method and tolerance.

    Raises ``ValueError`` if some method lacks a record for some problem.
    """
    grid, problems, methods = _grid(records)
    f_tols = list(f_tols)
    f_min = {p: min(_value(grid[p][m]["f"]) for m in methods) for p in problems}
    success = {m: {t: {p: equivalent(grid[p][m]["f"], f_min[p], t) for p in problems}
                   for t in f_tols} for m in methods}
    counts = {m: {t: int(sum(success[m][t].values())) for t in f_tols} for m in methods}
    return EquivalenceTable(methods, problems, f_tols, f_min, success, counts)


@dataclass
class PerformanceProfile:
    methods: list
    problems: list
    times: dict     # method -> array of times over ``problems``
    tau: np.ndarray
    curves: dict    # method -> array of Gamma values over ``tau``

    @property
    def empty(self) -> bool:
        return not self.problems

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau"] + [f"Gamma_{m}" for m in self.methods])
        for i, t in enumerate(self.tau):
            w.writerow([repr(float(t))] + [repr(float(self.curves[m][i])) for m in self.methods])
        return buf.getvalue()


def profile_curves(times: dict, tau_grid) -> dict:
    """Fraction of problems each method solves within ``tau`` times the fastest.

    ``times`` maps each method to an array over the same problems.
    """
    methods = list(times)
    T = np.vstack([np.asarray(times[m], dtype=float) for m in methods])
    best = T.min(axis=0)
    tau = np.asarray(tau_grid, dtype=float)
    p = T.shape[1]
    # t <= tau * best, compared directly so that ties and zero times behave
    within = T[:, :, None] <= tau[None, None, :] * best[None, :, None]
    frac = within.sum(axis=1) / p
    return {m: frac[i] for i, m in enumerate(methods)}


def default_tau_grid(times: dict, points: int = 200) -> np.ndarray:
    """Log-spaced grid from 1 past the largest time ratio, plus every ratio itself."""
    T = np.vstack([np.asarray(v, dtype=float) for v in times.values()])
    best = T.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(best > 0, T / best, np.where(T > 0, np.inf, 1.0))
    finite = ratios[np.isfinite(ratios)]
    top = max(2.0, 1.1 * float(finite.max())) if finite.size else 2.0
    grid = np.concatenate([np.geomspace(1.0, top, points), finite.ravel()])
    return np.unique(grid)


def performance_profile(records, f_tol: float, tau_grid=None) -> PerformanceProfile:
    """Profile restricted to the problems every method solves at ``f_tol``.

    With no such problem the profile is empty and a warning is issued.
    """
    table = equivalence_table(records, [f_tol])
    if len(table.methods) < 2:
        raise ValueError("a performance profile needs at least two methods")
    grid, _, _ = _grid(records)
    common = table.common_successes(f_tol)
    if not common:
        warnings.warn(f"no problem is solved by every method at f_tol={f_tol:g}; "
                      "the performance profile is empty", RuntimeWarning, stacklevel=2)
        return PerformanceProfile(table.methods, [], {m: np.array([]) for m in table.methods},
                                  np.array([]), {m: np.array([]) for m in table.methods})
    times = {m: np.array([float(grid[p][m]["wall_seconds"]) for p in common])
             for m in table.methods}
    tau = default_tau_grid(times) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    return PerformanceProfile(table.methods, common, times, tau, profile_curves(times, tau))


def gnuplot_script(csv_path: str, methods: list, output: str = "profile.png") -> str:
    """A gnuplot script that plots the profile CSV as step curves."""
    n = len(methods)
    return "\n".join([
        "set datafile separator ','",
        "set key bottom right autotitle columnheader",
        "set logscale x 2",
        "set xlabel 'tau'",
        "set ylabel 'Gamma(tau)'",
        "set yrange [0:1.05]",
        "set terminal pngcairo size 800,600",
        f"set output '{output}'",
        f"plot for [i=2:{n + 1}] '{csv_path}' using 1:i with steps linewidth 2",
        "",
    ])
