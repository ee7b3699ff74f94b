"""One iteration of cubic-regularized Newton for box constraints.

The model at ``x`` is

    m(s) = <g, s> + 1/2 <H s, s> + omega ||s||^3,

minimized approximately over ``x + s`` in the box by projected gradient with
spectral steplengths.  A trial step is accepted when
``f(x) - f(x + s) >= alpha ||s||^3``; otherwise ``omega`` is increased.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoxBounds, Iterate, NumericalFailure, ObjectiveOracle, project

_log = logging.getLogger(__name__)

OMEGA_OVERFLOW = 1e30


class SubproblemNotSolved(Exception):
    """Inner iteration cap reached before the model certificates held."""


@dataclass
class CubicModel:
    x: np.ndarray
    g: np.ndarray
    hvp: object
    sigma_reg: float = 0.0

    def value(self, s: np.ndarray, hs: np.ndarray) -> float:
        ns = np.linalg.norm(s)
        return float(self.g @ s + 0.5 * (s @ hs) + self.sigma_reg * ns ** 3)

    def gradient(self, s: np.ndarray, hs: np.ndarray) -> np.ndarray:
        return self.g + hs + 3.0 * self.sigma_reg * np.linalg.norm(s) * s


@dataclass
class CubicStepOutcome:
    x_next: np.ndarray
    f_next: float
    step: np.ndarray
    regularization_used: float
    inner_iterations: int
    M_next: float
    info: dict = field(default_factory=dict)


def model_certificate(model: CubicModel, bounds: BoxBounds, z: np.ndarray, s: np.ndarray,
                      hs: np.ndarray) -> float:
    """Norm of the projected model gradient at ``z = x + s``."""
    return float(np.linalg.norm(z - project(z - model.gradient(s, hs), bounds)))


def solve_cubic_subproblem(model: CubicModel, bounds: BoxBounds, x: np.ndarray, gamma: float,
                           max_inner: int, rho: float = 1e-4):
    """Projected-gradient minimization of the cubic model over the box.

    Returns ``(z, s, hs, m_val, iterations)`` with ``z = x + s`` feasible,
    ``m(s) <= 0`` and projected model gradient ``<= gamma ||s||^2``.
    Raises :class:`SubproblemNotSolved` if ``max_inner`` iterations do not suffice.
    """
    n = x.size
    s = np.zeros(n)
    hs = np.zeros(n)
    m_val = 0.0
    z = x
    step = None
    prev = None
    for it in range(1, max_inner + 1):
        grad_m = model.gradient(s, hs)
        if step is None:
            # projected Cauchy step from s = 0
            gHg = float(grad_m @ model.hvp(grad_m))
            gg = float(grad_m @ grad_m)
            step = gg / gHg if gHg > 0.0 else 1.0 / max(math.sqrt(gg), 1e-300)
        elif prev is not None:
            ds = s - prev[0]
            dy = grad_m - prev[1]
            sy = float(ds @ dy)
            step = float(ds @ ds) / sy if sy > 0.0 else 1.0 / max(np.linalg.norm(grad_m), 1e-300)
            step = min(max(step, 1e-16), 1e16)

        direction = project(z - step * grad_m, bounds) - z
        slope = float(grad_m @ direction)
        if not slope < 0.0:
            break
        t = 1.0
        accepted = False
        for _ in range(60):
            z_t = project(z + t * direction, bounds)
            s_t = z_t - x
            hs_t = model.hvp(s_t)
            if not np.all(np.isfinite(hs_t)):
                raise NumericalFailure("non-finite Hessian-vector product in cubic subproblem")
            m_t = model.value(s_t, hs_t)
            if m_t <= m_val + rho * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        prev = (s, grad_m)
        z, s, hs, m_val = z_t, s_t, hs_t, m_t
        ns = np.linalg.norm(s)
        if ns < 1e-14 * max(1.0, np.linalg.norm(x)):
            continue
        if model_certificate(model, bounds, z, s, hs) <= gamma * ns * ns:
            return z, s, hs, m_val, it
    raise SubproblemNotSolved(f"cubic subproblem not solved in {max_inner} iterations")


def cubic_step(it: Iterate, oracle: ObjectiveOracle, bounds: BoxBounds, *, M_k: float, M: float,
               alpha: float, gamma: float, omega_min: float = 1e-6, zeta: float = 10.0,
               max_inner: int | None = None) -> CubicStepOutcome:
    """Regularization loop: first trial with ``omega = 0``, then
    ``max(omega_min, M_k)`` and geometric growth by ``zeta``."""
    x = it.x
    n = x.size
    if max_inner is None:
        max_inner = 200 * n
    hvp = lambda v: oracle.hessp(x, v)  # noqa: E731
    omega = 0.0
    trials = []
    total_inner = 0
    while True:
        model = CubicModel(x, it.grad, hvp, omega)
        try:
            z, s, hs, m_val, inner = solve_cubic_subproblem(model, bounds, x, gamma, max_inner)
            total_inner += inner
        except SubproblemNotSolved:
            total_inner += max_inner
            z = None
        if z is not None:
            f_z = oracle.f(z)
            ns = float(np.linalg.norm(s))
            decrease = it.f_val - f_z
            trials.append(omega)
            if decrease >= alpha * ns ** 3:
                cert = model_certificate(model, bounds, z, s, hs)
                M_next = max(omega / zeta, M)
                info = {"omega": omega, "omega_trials": trials, "s_norm": ns, "model_value": m_val,
                        "model_cert": cert, "decrease": decrease, "inner": total_inner}
                return CubicStepOutcome(z, f_z, s, omega, total_inner, M_next, info)
        else:
            trials.append(omega)
        omega = max(omega_min, M_k) if omega == 0.0 else zeta * omega
        if omega > OMEGA_OVERFLOW:
            raise NumericalFailure("cubic regularization weight overflow")
