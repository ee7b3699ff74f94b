"""Monotone spectral projected gradient step for leaving faces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoxBounds, Iterate, ObjectiveOracle, project
from .linesearch import armijo_backtrack


@dataclass
class SpgMemory:
    prev_x: np.ndarray | None = None
    prev_grad: np.ndarray | None = None

    def __post_init__(self):
        if (self.prev_x is None) != (self.prev_grad is None):
            raise ValueError("prev_x and prev_grad must be given together")


def bb_stepsize(memory: SpgMemory, x, grad, reduced_grad, lambda_min: float, lambda_max: float) -> float:
    """Safeguarded Barzilai-Borwein scaling ``lambda`` (the step is ``1/lambda``).

    Uses ``s's / s'y`` when the previous pair gives ``s'y > 0`` and otherwise
    ``max(1, ||x||_inf) / ||reduced_grad||_inf``; both clamped to the safeguards.
    """
    raw = None
    if memory.prev_x is not None:
        s = x - memory.prev_x
        y = grad - memory.prev_grad
        sy = float(s @ y)
        if sy > 0.0:
            raw = float(s @ s) / sy
    if raw is None:
        raw = max(1.0, float(np.max(np.abs(x)))) / float(np.max(np.abs(reduced_grad)))
    return max(lambda_min, min(raw, lambda_max))


def spg_step(it: Iterate, oracle: ObjectiveOracle, bounds: BoxBounds, memory: SpgMemory, *,
             rho: float, lambda_min: float, lambda_max: float, max_trials: int = 50):
    """One monotone SPG iteration.

    Returns ``(x_next, f_next, memory, info)``.
    """
    lam = bb_stepsize(memory, it.x, it.grad, it.reduced_grad, lambda_min, lambda_max)
    v = project(it.x - lam * it.grad, bounds) - it.x
    slope = float(it.grad @ v)
    x, bounds_ = it.x, bounds

    def phi(t):
        return oracle.f(project(x + t * v, bounds_))

    ls = armijo_backtrack(phi, it.f_val, slope, rho, 1.0, max_trials)
    x_next = project(x + ls.step * v, bounds)
    new_memory = SpgMemory(it.x.copy(), it.grad.copy())
    info = {"lambda": lam, "step": ls.step, "backtracked": ls.backtracked,
            "v_norm": float(np.linalg.norm(v)), "slope": slope}
    return x_next, ls.value, new_memory, info
