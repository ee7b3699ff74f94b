"""MINRES for symmetric, possibly indefinite systems with curvature detection.

Solves ``min ||H s + g||`` by the Lanczos process with Givens QR updates.  Before
each solution update the current residual ``r = -(H s + g)`` is tested for
non-positive curvature; the solver then returns either

* ``SOL``: ``<Hs,s> > 0``, ``<Hr,r> > 0`` (or ``r = 0``), ``<g,s> + <Hs,s> <= 0``
  and ``||Hr|| <= eta ||Hs||``; or
* ``NPC``: ``<g,r> = -||r||^2`` and ``<Hr,r> <= 0``.

Both the residual and its image under ``H`` are carried by short recurrences, so
the tests cost no extra operator applications.  A candidate exit is confirmed
with two fresh products before it is returned.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import NumericalFailure

_log = logging.getLogger(__name__)

# relative slack when confirming sign conditions that hold exactly in exact arithmetic
_ROUNDOFF = 1e-10


class DType(str, enum.Enum):
    SOL = "SOL"
    NPC = "NPC"


@dataclass
class MinresOutcome:
    solution: np.ndarray
    residual: np.ndarray
    d_type: DType
    iterations: int
    final_relative_test: float
    hs: np.ndarray = field(repr=False)
    hr: np.ndarray = field(repr=False)
    certified: bool = True
    residual_norms: list = field(default_factory=list, repr=False)


class StationaryError(ValueError):
    """Raised when the right-hand side is zero (nothing to solve)."""


def _relative_test(hr: np.ndarray, hs: np.ndarray) -> float:
    nhs = np.linalg.norm(hs)
    nhr = np.linalg.norm(hr)
    if nhs == 0.0:
        return 0.0 if nhr == 0.0 else math.inf
    return nhr / nhs


def check_sol(g, s, r, hs, hr, eta) -> bool:
    """Solution certificate, with round-off slack on the exact-arithmetic identities."""
    shs = float(s @ hs)
    rhr = float(r @ hr)
    gs = float(g @ s)
    nr = np.linalg.norm(r)
    if not shs > 0.0:
        return False
    if nr > 0.0 and not rhr > 0.0:
        return False
    if gs + shs > _ROUNDOFF * (abs(gs) + abs(shs)):
        return False
    return np.linalg.norm(hr) <= eta * np.linalg.norm(hs)


def check_npc(g, r, hr) -> bool:
    rr = float(r @ r)
    if rr == 0.0:
        return False
    if abs(float(g @ r) + rr) > _ROUNDOFF * max(rr, np.linalg.norm(g) * math.sqrt(rr)):
        return False
    return float(r @ hr) <= 0.0


def minres_solve(hvp: Callable[[np.ndarray], np.ndarray], g, eta: float,
                 max_iters: int | None = None, debug: bool = False) -> MinresOutcome:
    """Approximately solve ``H s = -g`` and classify the outcome as SOL or NPC.

    Parameters
    ----------
    hvp : callable
        Symmetric linear operator ``v -> H v``.
    g : ndarray
        Right-hand side (the gradient); must be nonzero and finite.
    eta : float
        Relative tolerance in ``(0, 1]`` for ``||Hr|| <= eta ||Hs||``.
    max_iters : int, optional
        Iteration cap, default ``max(10 n, 100)``.  On exhaustion the last
        (smallest-residual) iterate is returned tagged SOL with
        ``certified=False``.
    """
    g = np.asarray(g, dtype=float)
    n = g.size
    if not np.all(np.isfinite(g)):
        raise NumericalFailure("non-finite right-hand side")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    beta1 = np.linalg.norm(g)
    if beta1 == 0.0:
        raise StationaryError("g = 0: already stationary")
    if max_iters is None:
        max_iters = max(10 * n, 100)

    def confirm(s, tag):
        hs = hvp(s)
        r = -(hs + g)
        hr = hvp(r)
        ok = check_sol(g, s, r, hs, hr, eta) if tag is DType.SOL else check_npc(g, r, hr)
        return ok, hs, r, hr

    x = np.zeros(n)
    r = -g
    hr_prev = np.zeros(n)  # H r_{k-2}
    v_prev = np.zeros(n)
    v = r / beta1
    w_prev = np.zeros(n)
    w_prev2 = np.zeros(n)
    beta = 0.0
    phi = beta1
    c, sn = -1.0, 0.0
    delta1, eps = 0.0, 0.0
    norms = [beta1]

    k = 0
    while True:
        k += 1
        p = hvp(v)
        if not np.all(np.isfinite(p)):
            raise NumericalFailure("non-finite Hessian-vector product in MINRES")
        # H r_{k-1} from r_{k-1} = sn^2 r_{k-2} - phi c v_k
        hr = sn * sn * hr_prev - phi * c * p
        curv = float(r @ hr)
        if debug:
            _log.debug("minres it=%d |r|=%.3e <Hr,r>=%.3e", k - 1, norms[-1], curv)

        if curv <= 0.0:
            ok, hs_f, r_f, hr_f = confirm(x, DType.NPC)
            if ok:
                return MinresOutcome(x, r_f, DType.NPC, k - 1, _relative_test(hr_f, hs_f),
                                     hs_f, hr_f, True, norms)
        # a recurrence curvature of ~0 may be positive when recomputed (residual in
        # the null space of an inconsistent singular system), so SOL is still tried
        if k > 1 and np.linalg.norm(hr) <= eta * np.linalg.norm(g + r):
            ok, hs_f, r_f, hr_f = confirm(x, DType.SOL)
            if ok:
                return MinresOutcome(x, r_f, DType.SOL, k - 1, _relative_test(hr_f, hs_f),
                                     hs_f, hr_f, True, norms)

        if k > max_iters:
            break

        alpha = float(v @ p)
        q = p - alpha * v - beta * v_prev
        beta_next = np.linalg.norm(q)

        delta2 = c * delta1 + sn * alpha
        eps_next = sn * beta_next
        gamma1 = sn * delta1 - c * alpha
        delta1_next = -c * beta_next

        gamma2 = math.hypot(gamma1, beta_next)
        if gamma2 == 0.0:
            break
        c = gamma1 / gamma2
        sn = beta_next / gamma2
        tau = c * phi
        phi = sn * phi

        w = (v - delta2 * w_prev - eps * w_prev2) / gamma2
        x = x + tau * w
        w_prev2, w_prev = w_prev, w
        eps, delta1 = eps_next, delta1_next

        breakdown = beta_next <= 1e-14 * (abs(alpha) + beta + beta_next)
        if breakdown:
            break
        v_next = q / beta_next
        hr_prev = hr
        r = sn * sn * r - phi * c * v_next
        norms.append(abs(phi))
        v_prev, v = v, v_next
        beta = beta_next

    # Krylov breakdown or iteration cap: classify the last iterate directly.
    hs = hvp(x)
    r = -(hs + g)
    hr = hvp(r)
    if np.linalg.norm(r) <= 1e-14 * beta1 or check_sol(g, x, r, hs, hr, eta):
        return MinresOutcome(x, r, DType.SOL, k, _relative_test(hr, hs), hs, hr,
                             check_sol(g, x, r, hs, hr, eta), norms)
    if check_npc(g, r, hr):
        return MinresOutcome(x, r, DType.NPC, k, _relative_test(hr, hs), hs, hr, True, norms)
    _log.debug("MINRES returned an uncertified iterate after %d iterations", k)
    return MinresOutcome(x, r, DType.SOL, k, _relative_test(hr, hs), hs, hr, False, norms)
