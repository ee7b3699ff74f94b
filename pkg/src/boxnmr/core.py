"""Feasible box, face machinery, reduced gradients and the objective oracle.

All solvers in this package work on problems of the form

    minimize f(x)  subject to  lower <= x <= upper,

where bounds may be infinite.  Iterates are always produced by :func:`project`,
so activity of a bound is decided by exact equality.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class SolverError(Exception):
    """Base class for solver failures."""


class NumericalFailure(SolverError):
    """Non-finite values or numerical breakdown inside a solver component."""


class LineSearchFailure(SolverError):
    """A line search exhausted its trial budget."""


@dataclass(frozen=True)
class BoxBounds:
    """Componentwise bounds ``lower <= x <= upper``; entries may be +-inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("bounds must not contain NaN")
        if not np.all(lower < upper):
            raise ValueError("bounds require lower < upper in every coordinate")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unbounded(cls, n: int) -> "BoxBounds":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def n(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lower <= x) and np.all(x <= self.upper))


@dataclass(frozen=True)
class FaceIndexSets:
    """Partition of the coordinates at a feasible point.

    ``free`` is sorted ascending; gather/scatter with it realize the selection
    matrix whose columns are the canonical vectors of the free coordinates.
    """

    at_lower: np.ndarray
    at_upper: np.ndarray
    free: np.ndarray
    n: int

    @property
    def n_free(self) -> int:
        return self.free.size

    def gather(self, v: np.ndarray) -> np.ndarray:
        return v[self.free]

    def scatter(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.free] = y
        return out


def _check_dim(x: np.ndarray, bounds: BoxBounds):
    if x.shape != (bounds.n,):
        raise ValueError(f"dimension mismatch: got {x.shape}, bounds have n={bounds.n}")


def project(x, bounds: BoxBounds) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, bounds)
    return np.minimum(bounds.upper, np.maximum(bounds.lower, x))


def face_sets(x, bounds: BoxBounds) -> FaceIndexSets:
    x = np.asarray(x, dtype=float)
    _check_dim(x, bounds)
    if not bounds.contains(x):
        raise ValueError("face_sets requires a feasible point")
    lo = x == bounds.lower
    up = x == bounds.upper
    return FaceIndexSets(
        at_lower=np.flatnonzero(lo),
        at_upper=np.flatnonzero(up),
        free=np.flatnonzero(~(lo | up)),
        n=bounds.n,
    )


def reduced_gradient(x, grad, bounds: BoxBounds) -> np.ndarray:
    """Return ``x - P(x - grad)``, zero exactly at first-order stationary points."""
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    _check_dim(x, bounds)
    _check_dim(grad, bounds)
    return x - project(x - grad, bounds)


def free_reduced_gradient(reduced_grad, face: FaceIndexSets) -> np.ndarray:
    """Copy of ``reduced_grad`` with the active coordinates zeroed."""
    out = np.zeros_like(np.asarray(reduced_grad, dtype=float))
    out[face.free] = reduced_grad[face.free]
    return out


class ObjectiveOracle:
    """Counting wrapper around value, gradient and Hessian-vector callbacks.

    Parameters
    ----------
    n : int
        Problem dimension.
    fun : callable
        ``fun(x) -> float``.
    grad : callable
        ``grad(x) -> ndarray`` of shape ``(n,)``.
    hessp : callable
        ``hessp(x, v) -> ndarray``, the product of the Hessian at ``x`` with ``v``.
    """

    def __init__(self, n: int, fun: Callable, grad: Callable, hessp: Callable):
        self.n = int(n)
        self._fun = fun
        self._grad = grad
        self._hessp = hessp
        self.n_f = 0
        self.n_g = 0
        self.n_hv = 0
        self._lock = threading.Lock()

    def _bump(self, name: str):
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)

    def f(self, x: np.ndarray) -> float:
        self._bump("n_f")
        return float(self._fun(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        self._bump("n_g")
        g = np.asarray(self._grad(x), dtype=float)
        if g.shape != (self.n,):
            raise ValueError(f"gradient has shape {g.shape}, expected ({self.n},)")
        return g

    def hessp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        self._bump("n_hv")
        return np.asarray(self._hessp(x, v), dtype=float)

    def counters(self) -> dict:
        return {"n_f": self.n_f, "n_g": self.n_g, "n_hv": self.n_hv}


class ReducedOracle:
    """View of ``f`` restricted to the free coordinates of a face.

    ``f_x(y) = f(x + scatter(y))`` with derivatives obtained by gathering.
    """

    def __init__(self, oracle: ObjectiveOracle, x: np.ndarray, face: FaceIndexSets):
        if face.n_free == 0:
            raise ValueError("no free variables: the reduced space is empty")
        self.oracle = oracle
        self.x = x
        self.face = face
        self.dim = face.n_free

    def point(self, y: np.ndarray) -> np.ndarray:
        z = self.x.copy()
        z[self.face.free] += y
        return z

    def f(self, y: np.ndarray) -> float:
        return self.oracle.f(self.point(y))

    def grad(self, y: np.ndarray) -> np.ndarray:
        return self.face.gather(self.oracle.grad(self.point(y)))

    def hessp(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        return self.face.gather(self.oracle.hessp(self.point(y), self.face.scatter(w)))

    def hessp_at_zero(self) -> Callable[[np.ndarray], np.ndarray]:
        """Linear operator ``w -> reduced Hessian at y = 0 times w``."""
        x, face, oracle = self.x, self.face, self.oracle
        return lambda w: face.gather(oracle.hessp(x, face.scatter(w)))


def reduced_oracle(oracle: ObjectiveOracle, x, face: FaceIndexSets) -> ReducedOracle:
    return ReducedOracle(oracle, np.asarray(x, dtype=float), face)


@dataclass
class Iterate:
    """A feasible point together with its derivative information and face."""

    x: np.ndarray
    f_val: float
    grad: np.ndarray
    reduced_grad: np.ndarray
    reduced_grad_free: np.ndarray
    face: FaceIndexSets = field(repr=False)

    @classmethod
    def at(cls, x: np.ndarray, oracle: ObjectiveOracle, bounds: BoxBounds,
           f_val: float | None = None) -> "Iterate":
        if f_val is None:
            f_val = oracle.f(x)
        g = oracle.grad(x)
        if not (np.isfinite(f_val) or f_val == -np.inf) or not np.all(np.isfinite(g)):
            raise NumericalFailure("oracle returned non-finite values")
        face = face_sets(x, bounds)
        rg = reduced_gradient(x, g, bounds)
        return cls(x, f_val, g, rg, free_reduced_gradient(rg, face), face)
