"""Armijo backtracking with safeguarded quadratic interpolation, and extrapolation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import BoxBounds, LineSearchFailure, ObjectiveOracle, project

# interpolated trial is kept inside [LOW, HIGH] * previous trial
INTERP_LOW = 0.1
INTERP_HIGH = 0.5


@dataclass
class LineSearchResult:
    step: float
    value: float
    trial_count: int
    satisfied: bool
    backtracked: bool


def interpolation_step(phi0: float, slope0: float, t: float, phi_t: float) -> float:
    """Minimizer of the quadratic through ``(0, phi0)`` with slope ``slope0`` and
    ``(t, phi_t)``, clamped to ``[0.1 t, 0.5 t]``."""
    curv = phi_t - phi0 - slope0 * t
    if curv > 0.0 and np.isfinite(curv):
        t_new = -slope0 * t * t / (2.0 * curv)
    else:
        t_new = INTERP_HIGH * t
    return min(max(t_new, INTERP_LOW * t), INTERP_HIGH * t)


def armijo_backtrack(phi: Callable[[float], float], phi0: float, slope0: float, rho: float,
                     t0: float, max_trials: int = 50, phi_t0: float | None = None
                     ) -> LineSearchResult:
    """Find a step satisfying ``phi(t) <= phi0 + rho t slope0``.

    ``phi_t0`` may carry an already known value of ``phi(t0)``; it is then not
    re-evaluated and does not count as a trial.
    """
    if not slope0 < 0.0:
        raise ValueError("armijo_backtrack requires a descent slope (slope0 < 0)")
    if not t0 > 0.0:
        raise ValueError("initial step must be positive")
    t = t0
    trials = 0
    val = phi_t0
    while True:
        if val is None:
            val = phi(t)
            trials += 1
        if val <= phi0 + rho * t * slope0:
            return LineSearchResult(t, val, max(trials, 1), True, t < t0)
        if trials >= max_trials:
            raise LineSearchFailure(f"Armijo condition not met after {trials} trials")
        t = interpolation_step(phi0, slope0, t, val if np.isfinite(val) else np.inf)
        val = None


def extrapolate(oracle: ObjectiveOracle, bounds: BoxBounds, x: np.ndarray, direction: np.ndarray,
                alpha0: float, m: int, f_alpha0: float, start: np.ndarray | None = None):
    """Doubling search along the projected ray ``P(x + 2^u alpha0 d)``.

    Keeps doubling while the value does not increase and at most ``m`` extra
    evaluations have been spent.  Returns ``(point, value, evals)``.
    """
    cur = project(x + alpha0 * direction, bounds) if start is None else start
    f_cur = f_alpha0
    evals = 0
    scale = alpha0
    while evals + 1 <= m:
        scale *= 2.0
        trial = project(x + scale * direction, bounds)
        if not np.all(np.isfinite(trial)):
            break
        f_trial = oracle.f(trial)
        evals += 1
        if f_trial <= f_cur:
            cur, f_cur = trial, f_trial
        else:
            break
    return cur, f_cur, evals
