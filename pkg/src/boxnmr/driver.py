"""Outer loops of the two active-set methods.

``solve_p`` alternates MINRES face steps with spectral projected gradient
steps; ``solve_t`` alternates Newton-MR face steps with cubic-regularization
steps under the ``sigma`` switching rule.  Both return a :class:`RunRecord`.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (BoxBounds, Iterate, LineSearchFailure, NumericalFailure, ObjectiveOracle,
                   project)
from .cubicreg import cubic_step
from .facestep import NpcMode, StepKind, face_step_p, face_step_t, minres_tolerance
from .spg import SpgMemory, spg_step

_log = logging.getLogger(__name__)

UNBOUNDED_THRESHOLD = -1e12
STALL_WINDOW = 50


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    UNBOUNDED = "UnboundedSuspected"
    LACK_OF_PROGRESS = "LackOfProgress"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SolverConfig:
    """Parameters of both methods; defaults are the tuned values."""

    algorithm: str = "p"
    epsilon: float = 1e-8
    theta: float = 0.1
    rho: float = 1e-4
    m: int = 20
    a1: float = 1e8
    a2: float = 1e-16
    lambda_min_spg: float = 1e-16
    lambda_max_spg: float = 1e16
    eps_mr_ini: float = 0.1
    npc_mode: str = "solution"
    eta0: float = 1e-8
    eta: float = 1e-8
    tau: float = 0.9
    M: float = 1e-6
    alpha: float = 1e-8
    gamma: float = 1.0
    omega_min: float = 1e-6
    zeta: float = 10.0
    max_iterations: int = 100000
    time_limit_seconds: float = 600.0
    max_trials: int = 50
    label: str | None = None

    def __post_init__(self):
        self.algorithm = str(self.algorithm).lower()
        self.validate()

    def validate(self):
        errors = []
        if self.algorithm not in ("p", "t"):
            errors.append("algorithm must be 'p' or 't'")
        if not self.epsilon > 0:
            errors.append("epsilon must be positive")
        if not 0 < self.theta <= 1:
            errors.append("theta must lie in (0, 1]")
        rho_hi = 0.5 if self.algorithm == "t" else 1.0
        if not 0 < self.rho < rho_hi:
            errors.append(f"rho must lie in (0, {rho_hi})")
        if self.m < 0:
            errors.append("m must be nonnegative")
        if not self.a1 >= 1:
            errors.append("a1 must be >= 1")
        if not 0 < self.a2 < 1:
            errors.append("a2 must lie in (0, 1)")
        if not self.lambda_max_spg >= self.lambda_min_spg > 0:
            errors.append("need lambda_max_spg >= lambda_min_spg > 0")
        if not self.eps_mr_ini > 0:
            errors.append("eps_mr_ini must be positive")
        if self.npc_mode not in ("solution", "residual"):
            errors.append("npc_mode must be 'solution' or 'residual'")
        if not 0 < self.eta <= 1:
            errors.append("eta must lie in (0, 1]")
        if not self.eta <= self.eta0 <= 1:
            errors.append("eta0 must lie in [eta, 1]")
        if not 0 < self.tau <= 1:
            errors.append("tau must lie in (0, 1]")
        if not (self.M > 0 and self.alpha > 0 and self.gamma > 0):
            errors.append("M, alpha and gamma must be positive")
        if not (self.omega_min > 0 and self.zeta > 1):
            errors.append("need omega_min > 0 and zeta > 1")
        if self.max_iterations < 0 or not self.time_limit_seconds > 0:
            errors.append("max_iterations must be >= 0 and time_limit_seconds > 0")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def name(self) -> str:
        return self.label or f"Algorithm {self.algorithm.upper()}"

    @classmethod
    def from_mapping(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SolverConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
            raise ValueError("config file must be a flat JSON object")
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TraceEntry:
    k: int
    f: float
    grad_norm: float
    n_free: int
    step_kind: str | None
    sigma: int | None
    tol: float | None
    n_f: int
    n_g: int
    n_hv: int
    wall: float
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunRecord:
    status: Status
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    n_f: int
    n_g: int
    n_hv: int
    wall_seconds: float
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    message: str = ""
    problem: str | None = None
    config_label: str | None = None

    def summary(self) -> dict:
        return {
            "problem": self.problem,
            "config_label": self.config_label,
            "status": self.status.value,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "n_f": self.n_f,
            "n_g": self.n_g,
            "n_hv": self.n_hv,
            "wall_seconds": self.wall_seconds,
        }


class _Run:
    """Bookkeeping shared by both outer loops."""

    def __init__(self, oracle, bounds, x0, config: SolverConfig, keep_iterates: bool):
        self.oracle = oracle
        self.bounds = bounds
        self.config = config
        self.keep = keep_iterates
        self.t0 = time.perf_counter_ns()
        self.trace: list[TraceEntry] = []
        self.iterates: list[np.ndarray] = []
        self.best_f_window: list[float] = []
        x = project(np.asarray(x0, dtype=float), bounds)
        self.it = Iterate.at(x, oracle, bounds)

    def elapsed(self) -> float:
        return (time.perf_counter_ns() - self.t0) * 1e-9

    def grad_inf(self) -> float:
        rg = self.it.reduced_grad
        return float(np.max(np.abs(rg))) if rg.size else 0.0

    def log(self, k, kind, sigma, tol, info):
        c = self.oracle
        self.trace.append(TraceEntry(k, self.it.f_val, self.grad_inf(), self.it.face.n_free,
                                     kind, sigma, tol, c.n_f, c.n_g, c.n_hv, self.elapsed(), info))
        if self.keep:
            self.iterates.append(self.it.x.copy())

    def stalled(self) -> bool:
        self.best_f_window.append(self.it.f_val)
        if len(self.best_f_window) <= STALL_WINDOW:
            return False
        old = self.best_f_window.pop(0)
        return old - self.it.f_val < 1e-16 * max(1.0, abs(self.it.f_val))

    def check_stop(self, k):
        cfg = self.config
        if self.grad_inf() <= cfg.epsilon:
            return Status.CONVERGED
        if self.it.f_val <= UNBOUNDED_THRESHOLD:
            return Status.UNBOUNDED
        if k >= cfg.max_iterations:
            return Status.ITERATION_LIMIT
        if self.elapsed() >= cfg.time_limit_seconds:
            return Status.TIME_LIMIT
        return None

    def advance(self, x_next, f_next):
        if f_next <= UNBOUNDED_THRESHOLD:
            # do not ask for derivatives where the function has (nearly) diverged
            try:
                self.it = Iterate.at(x_next, self.oracle, self.bounds, f_next)
            except NumericalFailure:
                self.it = dataclasses.replace(self.it, x=x_next, f_val=f_next)
            return
        self.it = Iterate.at(x_next, self.oracle, self.bounds, f_next)

    def finish(self, status, k, message=""):
        c = self.oracle
        return RunRecord(status, self.it.x.copy(), self.it.f_val, self.grad_inf(), k,
                         c.n_f, c.n_g, c.n_hv, self.elapsed(), self.trace, self.iterates, message)


def _face_test(it: Iterate, theta: float) -> bool:
    return np.linalg.norm(it.reduced_grad_free) >= theta * np.linalg.norm(it.reduced_grad)


def solve_p(oracle: ObjectiveOracle, bounds: BoxBounds, x0, config: SolverConfig | None = None,
            keep_iterates: bool = False) -> RunRecord:
    """Active-set Newton-MR with spectral projected gradient for leaving faces."""
    cfg = config or SolverConfig(algorithm="p")
    run = _Run(oracle, bounds, x0, cfg, keep_iterates)
    g0 = run.grad_inf()
    memory = SpgMemory()
    npc = NpcMode(cfg.npc_mode)
    k = 0
    run.log(k, None, None, None, {})
    try:
        while True:
            status = run.check_stop(k)
            if status is not None:
                return run.finish(status, k)
            it = run.it
            gI = float(np.linalg.norm(it.reduced_grad_free))
            if _face_test(it, cfg.theta):
                tol = minres_tolerance(run.grad_inf(), g0, cfg.eps_mr_ini, cfg.epsilon)
                out = face_step_p(it, oracle, bounds, rho=cfg.rho, m=cfg.m, a1=cfg.a1, a2=cfg.a2,
                                  eps_mr=tol, npc_mode=npc, max_trials=cfg.max_trials)
                x_next, f_next, kind, info = out.x_next, out.f_next, out.kind, out.info
            else:
                tol = None
                x_next, f_next, memory, info = spg_step(
                    it, oracle, bounds, memory, rho=cfg.rho, lambda_min=cfg.lambda_min_spg,
                    lambda_max=cfg.lambda_max_spg, max_trials=cfg.max_trials)
                kind = StepKind.SPG
            info = {**info, "f_prev": it.f_val, "gI_norm_prev": gI, "n_free_prev": it.face.n_free}
            run.advance(x_next, f_next)
            k += 1
            run.log(k, kind.value, None, tol, info)
            if run.stalled():
                return run.finish(Status.LACK_OF_PROGRESS, k, "objective stalled")
    except LineSearchFailure as exc:
        return run.finish(Status.LACK_OF_PROGRESS, k, str(exc))
    except (NumericalFailure, FloatingPointError) as exc:
        if run.it.f_val <= UNBOUNDED_THRESHOLD:
            return run.finish(Status.UNBOUNDED, k, str(exc))
        return run.finish(Status.NUMERICAL_FAILURE, k, str(exc))


def solve_t(oracle: ObjectiveOracle, bounds: BoxBounds, x0, config: SolverConfig | None = None,
            keep_iterates: bool = False) -> RunRecord:
    """Active-set Newton-MR with cubic regularization for leaving faces."""
    cfg = config or SolverConfig(algorithm="t")
    run = _Run(oracle, bounds, x0, cfg, keep_iterates)
    sigma, eta_k, M_k = 0, cfg.eta0, cfg.M
    k = 0
    run.log(k, None, sigma, eta_k, {})
    try:
        while True:
            status = run.check_stop(k)
            if status is not None:
                return run.finish(status, k)
            it = run.it
            gI = float(np.linalg.norm(it.reduced_grad_free))
            if sigma in (0, 2) and _face_test(it, cfg.theta):
                out = face_step_t(it, oracle, bounds, rho=cfg.rho, m=cfg.m, a1=cfg.a1, a2=cfg.a2,
                                  eta_k=eta_k, eta=cfg.eta, tau=cfg.tau, max_trials=cfg.max_trials)
                x_next, f_next, kind, info = out.x_next, out.f_next, out.kind, out.info
                tol = eta_k
                sigma, eta_k = out.sigma_next, out.eta_next
            else:
                out = cubic_step(it, oracle, bounds, M_k=M_k, M=cfg.M, alpha=cfg.alpha,
                                 gamma=cfg.gamma, omega_min=cfg.omega_min, zeta=cfg.zeta)
                x_next, f_next, kind, info = out.x_next, out.f_next, StepKind.CUBIC, out.info
                tol = None
                M_k = out.M_next
                sigma = 0
            info = {**info, "f_prev": it.f_val, "gI_norm_prev": gI, "n_free_prev": it.face.n_free}
            run.advance(x_next, f_next)
            k += 1
            run.log(k, kind.value, sigma, tol, info)
            if run.stalled():
                return run.finish(Status.LACK_OF_PROGRESS, k, "objective stalled")
    except LineSearchFailure as exc:
        return run.finish(Status.LACK_OF_PROGRESS, k, str(exc))
    except (NumericalFailure, FloatingPointError) as exc:
        if run.it.f_val <= UNBOUNDED_THRESHOLD:
            return run.finish(Status.UNBOUNDED, k, str(exc))
        return run.finish(Status.NUMERICAL_FAILURE, k, str(exc))


def solve(oracle: ObjectiveOracle, bounds: BoxBounds, x0, config: SolverConfig | None = None,
          keep_iterates: bool = False) -> RunRecord:
    cfg = config or SolverConfig()
    fn = solve_p if cfg.algorithm == "p" else solve_t
    return fn(oracle, bounds, x0, cfg, keep_iterates)
