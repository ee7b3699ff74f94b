"""Descent steps inside the current face of the box.

Two variants share the boundary handling and line search:

* :func:`face_step_p` -- MINRES direction, always safeguarded by
  :func:`correct_direction`, Armijo search and optional extrapolation.
* :func:`face_step_t` -- Newton-MR step that grades the MINRES direction with a
  quality flag, tightens the MINRES tolerance when the flag is raised and
  reports the switching state ``sigma`` used by the cubic-regularization driver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoxBounds, Iterate, ObjectiveOracle, project, reduced_oracle
from .linesearch import armijo_backtrack, extrapolate
from .minres import DType, minres_solve

# cap on Armijo-conditioned doublings; only reachable on unbounded problems
MAX_DOUBLINGS = 60


class StepKind(str, enum.Enum):
    INTERIOR_ARMIJO = "InteriorArmijo"
    BOUNDARY_IMPROVED = "BoundaryImproved"
    EXTRAPOLATED_INTERIOR = "ExtrapolatedInterior"
    EXTRAPOLATED_BOUNDARY = "ExtrapolatedBoundary"
    SPG = "SPG"
    CUBIC = "Cubic"


BOUNDARY_KINDS = (StepKind.BOUNDARY_IMPROVED, StepKind.EXTRAPOLATED_BOUNDARY)


class NpcMode(str, enum.Enum):
    USE_SOLUTION = "solution"
    USE_RESIDUAL = "residual"


@dataclass
class CorrectedDirection:
    d: np.ndarray
    beta1: float
    beta2: float
    was_scaled: bool
    was_mixed: bool


@dataclass
class FaceStepOutcome:
    x_next: np.ndarray
    f_next: float
    kind: StepKind
    sigma_next: int | None = None
    eta_next: float | None = None
    evals: int = 0
    info: dict = field(default_factory=dict)


def correct_direction(d1, g, a1: float, a2: float) -> CorrectedDirection:
    """Scale and mix ``d1`` with ``-g`` so that ``||d|| <= a1 ||g||`` and
    ``<g, d> <= -a2 ||g||^2``."""
    g = np.asarray(g, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        raise ValueError("correct_direction requires g != 0")
    d1norm = np.linalg.norm(d1)
    if d1norm <= a1 * gnorm:
        beta1 = 1.0
    else:
        beta1 = a1 * gnorm / d1norm
    d2 = beta1 * d1
    gg = gnorm * gnorm
    gd2 = float(g @ d2)
    if gd2 <= -a2 * gg:
        beta2 = 1.0
        d = d2
    else:
        gam = gd2 / gg
        beta2 = (1.0 - a2) / (1.0 + gam)
        # beta2 d2 - (1 - beta2) g, split into a part orthogonal to g and a part
        # along -(d2 + g); keeps <g, d> = -a2 ||g||^2 even when a2 is below eps
        d = (d2 - gam * g) / (1.0 + gam) - a2 * (d2 + g) / (1.0 + gam)
    return CorrectedDirection(d, beta1, beta2, beta1 < 1.0, beta2 < 1.0)


def minres_tolerance(grad_norm_now: float, grad_norm_initial: float,
                     eps_ini: float, eps_end: float) -> float:
    """Dynamic MINRES tolerance, log-linear in the reduced gradient norm.

    Equals ``eps_ini`` at the initial gradient norm and ``eps_end`` when the norm
    reaches ``eps_end`` (the stopping tolerance); clamped to that interval.
    """
    if grad_norm_initial <= eps_end or eps_ini <= eps_end:
        return eps_end
    a = math.log10(eps_end / eps_ini) / math.log10(eps_end / grad_norm_initial)
    b = 2.0 * math.log10(eps_ini) - a * math.log10(grad_norm_initial ** 2)
    val = math.sqrt(10.0 ** (a * math.log10(grad_norm_now ** 2) + b))
    return min(max(val, eps_end), eps_ini)


def ray_breakpoint(x, d_full, bounds: BoxBounds, free) -> tuple[float, np.ndarray]:
    """Largest ``t > 0`` with ``x + t d`` feasible and the coordinates that block it."""
    t = math.inf
    blocking = np.array([], dtype=int)
    for i in free:
        di = d_full[i]
        if di > 0.0 and np.isfinite(bounds.upper[i]):
            ti = (bounds.upper[i] - x[i]) / di
        elif di < 0.0 and np.isfinite(bounds.lower[i]):
            ti = (bounds.lower[i] - x[i]) / di
        else:
            continue
        if ti < t:
            t = ti
            blocking = np.array([i])
        elif ti == t:
            blocking = np.append(blocking, i)
    return t, blocking


def boundary_point(x, d_full, t, blocking, bounds: BoxBounds) -> np.ndarray:
    """``x + t d`` with the blocking coordinates placed exactly on their bounds."""
    z = project(x + t * d_full, bounds)
    for i in blocking:
        z[i] = bounds.upper[i] if d_full[i] > 0.0 else bounds.lower[i]
    return z


def strictly_inside(z, bounds: BoxBounds, free) -> bool:
    return bool(np.all(bounds.lower[free] < z[free]) and np.all(z[free] < bounds.upper[free]))


def left_face(x_next, bounds: BoxBounds, free) -> bool:
    """True if some previously free coordinate of ``x_next`` sits on a bound."""
    return not strictly_inside(x_next, bounds, free)


def _direction_stats(g, d):
    return {
        "g_norm": float(np.linalg.norm(g)),
        "d_norm": float(np.linalg.norm(d)),
        "gd": float(g @ d),
    }


class _Face:
    """Shared evaluation helpers for one face step."""

    def __init__(self, it: Iterate, oracle: ObjectiveOracle, bounds: BoxBounds):
        self.it = it
        self.oracle = oracle
        self.bounds = bounds
        self.free = it.face.free
        self.red = reduced_oracle(oracle, it.x, it.face)
        self.g = it.face.gather(it.grad)
        self.evals = 0

    def full(self, d):
        return self.it.face.scatter(d)

    def f_at(self, z):
        self.evals += 1
        return self.oracle.f(z)

    def phi(self, d_full):
        x, bounds = self.it.x, self.bounds
        return lambda t: self.f_at(project(x + t * d_full, bounds))

    def boundary_search(self, d_full, m):
        """Steps 2.1-2.3: returns ``("interior", None)``, ``("boundary", (x, f))``
        or ``("armijo", alpha0)``."""
        it, bounds = self.it, self.bounds
        trial = it.x + d_full
        if strictly_inside(trial, bounds, self.free):
            return "interior", 1.0
        p_trial = project(trial, bounds)
        f_p = self.f_at(p_trial)
        if f_p <= it.f_val:
            z, fz, ev = extrapolate(self.oracle, bounds, it.x, d_full, 1.0, m, f_p, start=p_trial)
            self.evals += ev
            return "boundary", (z, fz)
        t_ray, blocking = ray_breakpoint(it.x, d_full, bounds, self.free)
        if t_ray <= 1.0:
            t_max = t_ray
            z = boundary_point(it.x, d_full, t_max, blocking, bounds)
        else:
            # rounding: x + d left the open face although the exact breakpoint exceeds 1
            t_max, z = 1.0, p_trial
        f_z = self.f_at(z)
        if f_z <= it.f_val:
            z2, fz2, ev = extrapolate(self.oracle, bounds, it.x, d_full, t_max, m, f_z, start=z)
            self.evals += ev
            return "boundary", (z2, fz2)
        return "armijo", (t_max, f_z)


def face_step_p(it: Iterate, oracle: ObjectiveOracle, bounds: BoxBounds, *, rho: float, m: int,
                a1: float, a2: float, eps_mr: float, npc_mode: NpcMode = NpcMode.USE_SOLUTION,
                max_trials: int = 50) -> FaceStepOutcome:
    """One MINRES-based descent step within the face of ``it``."""
    fc = _Face(it, oracle, bounds)
    g = fc.g
    out = minres_solve(fc.red.hessp_at_zero(), g, min(eps_mr, 1.0))
    if out.d_type is DType.NPC:
        if npc_mode is NpcMode.USE_RESIDUAL:
            d1 = out.residual
        else:
            d1 = out.solution if np.any(out.solution != 0.0) else -g
    else:
        d1 = out.solution
    cd = correct_direction(d1, g, a1, a2)
    d = cd.d
    d_full = fc.full(d)
    slope = float(g @ d)
    info = {"d_type": out.d_type.value, "minres_iters": out.iterations, "eps_mr": eps_mr,
            "beta1": cd.beta1, "beta2": cd.beta2, **_direction_stats(g, d)}

    status, payload = fc.boundary_search(d_full, m)
    if status == "boundary":
        z, fz = payload
        return FaceStepOutcome(z, fz, StepKind.BOUNDARY_IMPROVED, evals=fc.evals,
                               info={**info, "alpha0": None, "step": None, "backtracked": False})
    if status == "interior":
        alpha0, f_alpha0 = 1.0, None
    else:
        alpha0, f_alpha0 = payload
    ls = armijo_backtrack(fc.phi(d_full), it.f_val, slope, rho, alpha0, max_trials, f_alpha0)
    info.update(alpha0=alpha0, step=ls.step, backtracked=ls.backtracked)
    z = project(it.x + ls.step * d_full, bounds)
    if ls.backtracked:
        return FaceStepOutcome(z, ls.value, StepKind.INTERIOR_ARMIJO, evals=fc.evals, info=info)
    z2, fz2, ev = extrapolate(oracle, bounds, it.x, d_full, alpha0, m, ls.value, start=z)
    fc.evals += ev
    kind = StepKind.EXTRAPOLATED_BOUNDARY if left_face(z2, bounds, fc.free) else StepKind.EXTRAPOLATED_INTERIOR
    return FaceStepOutcome(z2, fz2, kind, evals=fc.evals, info=info)


def newton_mr_flag(out, g, hvp, eta_k: float) -> int:
    """Quality flag of a MINRES direction (1 = needs safeguarding)."""
    if not out.certified:
        return 1
    if out.d_type is DType.SOL:
        s, r = out.solution, out.residual
        curv = float(s @ out.hs) / float(s @ s)
        rr = float(r @ r)
        if rr > 0.0:
            curv = min(curv, float(r @ out.hr) / rr)
        return int(curv < eta_k)
    return int(np.linalg.norm(out.hr) <= eta_k * np.linalg.norm(out.hs))


def face_step_t(it: Iterate, oracle: ObjectiveOracle, bounds: BoxBounds, *, rho: float, m: int,
                a1: float, a2: float, eta_k: float, eta: float, tau: float,
                max_trials: int = 50) -> FaceStepOutcome:
    """One Newton-MR step within the face of ``it``; reports ``sigma`` and ``eta``."""
    fc = _Face(it, oracle, bounds)
    g = fc.g
    hvp = fc.red.hessp_at_zero()
    out = minres_solve(hvp, g, eta_k)
    d1 = out.solution if out.d_type is DType.SOL else out.residual
    flag = newton_mr_flag(out, g, hvp, eta_k)
    eta_next = max(tau * eta_k, eta) if flag else eta_k
    if flag:
        cd = correct_direction(d1, g, a1, a2)
        d = cd.d
    else:
        d = d1
    d_full = fc.full(d)
    slope = float(g @ d)
    info = {"d_type": out.d_type.value, "minres_iters": out.iterations, "flag": flag,
            "eta_k": eta_k, **_direction_stats(g, d)}

    def done(z, fz, kind, sigma, **extra):
        return FaceStepOutcome(z, fz, kind, sigma, eta_next, fc.evals, {**info, **extra})

    status, payload = fc.boundary_search(d_full, m)
    if status == "boundary":
        z, fz = payload
        return done(z, fz, StepKind.BOUNDARY_IMPROVED, 2, alpha0=None, step=None, backtracked=False)
    if status == "interior":
        alpha0, f_alpha0 = 1.0, None
    else:
        alpha0, f_alpha0 = payload
    ls = armijo_backtrack(fc.phi(d_full), it.f_val, slope, rho, alpha0, max_trials, f_alpha0)
    z = project(it.x + ls.step * d_full, bounds)
    if ls.backtracked:
        return done(z, ls.value, StepKind.INTERIOR_ARMIJO, flag, alpha0=alpha0, step=ls.step,
                    backtracked=True)

    if flag:
        z2, fz2, ev = extrapolate(oracle, bounds, it.x, d_full, alpha0, m, ls.value, start=z)
        fc.evals += ev
        if left_face(z2, bounds, fc.free):
            return done(z2, fz2, StepKind.EXTRAPOLATED_BOUNDARY, 2, alpha0=alpha0, step=ls.step,
                        backtracked=False)
        return done(z2, fz2, StepKind.EXTRAPOLATED_INTERIOR, 1, alpha0=alpha0, step=ls.step,
                    backtracked=False)

    # Flag = 0, full step accepted: Armijo-conditioned doubling.
    x, f0 = it.x, it.f_val
    j, f_j = 0, ls.value
    left_box = False
    while j < MAX_DOUBLINGS:
        t_next = 2.0 ** (j + 1) * alpha0
        cand = x + t_next * d_full
        if not bounds.contains(cand):
            left_box = True
            break
        f_next = fc.f_at(cand)
        if f_next <= f0 + rho * t_next * slope:
            j, f_j = j + 1, f_next
        else:
            break
    t_j = 2.0 ** j * alpha0
    z = project(x + t_j * d_full, bounds)
    extra = dict(alpha0=alpha0, step=t_j, backtracked=False, doublings=j)
    if not left_box:
        return done(z, f_j, StepKind.EXTRAPOLATED_INTERIOR, 0, **extra)
    t_max, blocking = ray_breakpoint(x, d_full, bounds, fc.free)
    zb = boundary_point(x, d_full, t_max, blocking, bounds)
    f_b = fc.f_at(zb)
    if f_b > f0:
        return done(z, f_j, StepKind.EXTRAPOLATED_INTERIOR, 0, **extra)
    z3, f3, ev = extrapolate(oracle, bounds, x, d_full, t_max, m, f_b, start=zb)
    fc.evals += ev
    return done(z3, f3, StepKind.EXTRAPOLATED_BOUNDARY, 2, **extra)
