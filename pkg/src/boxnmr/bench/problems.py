"""Built-in desk-scale test problems.

Each objective is a small picklable class with ``f``, ``grad`` and ``hessp``
methods so that problems can be shipped to worker processes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..core import BoxBounds, ObjectiveOracle


class SeparableQuadratic:
    """``1/2 sum w_i (x_i - c_i)^2`` (``w`` may have negative entries)."""

    def __init__(self, w, c):
        self.w = np.asarray(w, dtype=float)
        self.c = np.asarray(c, dtype=float)

    def f(self, x):
        r = x - self.c
        return 0.5 * float(np.sum(self.w * r * r))

    def grad(self, x):
        return self.w * (x - self.c)

    def hessp(self, x, v):
        return self.w * v


class DenseQuadratic:
    """``1/2 x'Ax + b'x + const``."""

    def __init__(self, A, b, const=0.0):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.const = float(const)

    def f(self, x):
        return 0.5 * float(x @ self.A @ x) + float(self.b @ x) + self.const

    def grad(self, x):
        return self.A @ x + self.b

    def hessp(self, x, v):
        return self.A @ v


class ShiftedQuadratic:
    """``1/2 (x - c)'A(x - c)``, evaluated in shifted form to avoid cancellation."""

    def __init__(self, A, c):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)

    def f(self, x):
        r = x - self.c
        return 0.5 * float(r @ self.A @ r)

    def grad(self, x):
        return self.A @ (x - self.c)

    def hessp(self, x, v):
        return self.A @ v


class ExtendedRosenbrock:
    """Sum over consecutive pairs of ``100 (x_2i - x_2i-1^2)^2 + (1 - x_2i-1)^2``."""

    def f(self, x):
        a, b = x[0::2], x[1::2]
        return float(np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2))

    def grad(self, x):
        a, b = x[0::2], x[1::2]
        g = np.empty_like(x)
        g[0::2] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a)
        g[1::2] = 200.0 * (b - a * a)
        return g

    def hessp(self, x, v):
        a, b = x[0::2], x[1::2]
        va, vb = v[0::2], v[1::2]
        haa = 1200.0 * a * a - 400.0 * b + 2.0
        hab = -400.0 * a
        out = np.empty_like(v)
        out[0::2] = haa * va + hab * vb
        out[1::2] = hab * va + 200.0 * vb
        return out


class DoubleWell:
    """``(x_1^2 - 1)^2 + x_2^2``: saddle at the origin, minima at ``(+-1, 0)``."""

    def f(self, x):
        return float((x[0] ** 2 - 1.0) ** 2 + x[1] ** 2)

    def grad(self, x):
        return np.array([4.0 * x[0] * (x[0] ** 2 - 1.0), 2.0 * x[1]])

    def hessp(self, x, v):
        return np.array([(12.0 * x[0] ** 2 - 4.0) * v[0], 2.0 * v[1]])


class NegativeCube:
    """``-sum x_i^3``; unbounded below on the nonnegative orthant."""

    def f(self, x):
        return -float(np.sum(x ** 3))

    def grad(self, x):
        return -3.0 * x * x

    def hessp(self, x, v):
        return -6.0 * x * v


class Trid:
    """``sum (x_i - 1)^2 - sum x_i x_{i-1}``; convex with known minimizer."""

    def f(self, x):
        return float(np.sum((x - 1.0) ** 2) - np.sum(x[1:] * x[:-1]))

    def grad(self, x):
        g = 2.0 * (x - 1.0)
        g[1:] -= x[:-1]
        g[:-1] -= x[1:]
        return g

    def hessp(self, x, v):
        out = 2.0 * v
        out[1:] -= v[:-1]
        out[:-1] -= v[1:]
        return out


class StyblinskiTang:
    """``1/2 sum (x^4 - 16 x^2 + 5 x)``; separable, nonconvex."""

    def f(self, x):
        return 0.5 * float(np.sum(x ** 4 - 16.0 * x ** 2 + 5.0 * x))

    def grad(self, x):
        return 0.5 * (4.0 * x ** 3 - 32.0 * x + 5.0)

    def hessp(self, x, v):
        return 0.5 * (12.0 * x ** 2 - 32.0) * v


class Beale:
    def f(self, x):
        a, b = x
        return float((1.5 - a + a * b) ** 2 + (2.25 - a + a * b * b) ** 2 + (2.625 - a + a * b ** 3) ** 2)

    def grad(self, x):
        a, b = x
        t1 = 1.5 - a + a * b
        t2 = 2.25 - a + a * b * b
        t3 = 2.625 - a + a * b ** 3
        ga = 2 * t1 * (b - 1) + 2 * t2 * (b * b - 1) + 2 * t3 * (b ** 3 - 1)
        gb = 2 * t1 * a + 2 * t2 * 2 * a * b + 2 * t3 * 3 * a * b * b
        return np.array([ga, gb])

    def hessp(self, x, v):
        a, b = x
        t1 = 1.5 - a + a * b
        t2 = 2.25 - a + a * b * b
        t3 = 2.625 - a + a * b ** 3
        d1 = np.array([b - 1, a])
        d2 = np.array([b * b - 1, 2 * a * b])
        d3 = np.array([b ** 3 - 1, 3 * a * b * b])
        H = 2 * (np.outer(d1, d1) + np.outer(d2, d2) + np.outer(d3, d3))
        H += 2 * t1 * np.array([[0, 1], [1, 0]])
        H += 2 * t2 * np.array([[0, 2 * b], [2 * b, 2 * a]])
        H += 2 * t3 * np.array([[0, 3 * b * b], [3 * b * b, 6 * a * b]])
        return H @ v


@dataclass
class BenchmarkProblem:
    """A named test problem.

    ``f_opt`` is the optimal value when it is known and is the value reached
    from ``x0``; ``kkt_x`` is the analytic KKT point for separable convex
    quadratics.  ``L_g`` / ``L_H`` are Lipschitz constants of the gradient and
    Hessian when known.
    """

    name: str
    objective: object
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    f_opt: float | None = None
    kkt_x: np.ndarray | None = None
    L_g: float | None = None
    L_H: float | None = None
    tags: tuple = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def bounds(self) -> BoxBounds:
        return BoxBounds(self.lower, self.upper)

    def oracle(self) -> ObjectiveOracle:
        obj = self.objective
        return ObjectiveOracle(self.n, obj.f, obj.grad, obj.hessp)


def _sep_quad(name, w, c, lower, upper, x0, tags=()):
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    xs = np.minimum(upper, np.maximum(lower, c))
    obj = SeparableQuadratic(w, c)
    return BenchmarkProblem(name, obj, lower, upper, np.asarray(x0, dtype=float),
                            f_opt=obj.f(xs), kkt_x=xs, L_g=float(np.max(w)), L_H=0.0,
                            tags=("convex", "separable") + tuple(tags))


def box_qp_global_min(A, b, lower, upper):
    """Global minimum of ``1/2 x'Ax + b'x`` on a finite box by enumerating faces.

    Every face gives a candidate by solving the free-variable stationarity
    system; the smallest feasible candidate value is returned with its point.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.size
    best = (np.inf, None)
    for pattern in itertools.product((0, 1, 2), repeat=n):
        x = np.zeros(n)
        free = [i for i, p in enumerate(pattern) if p == 2]
        fixed = [i for i, p in enumerate(pattern) if p != 2]
        for i in fixed:
            x[i] = lower[i] if pattern[i] == 0 else upper[i]
        if free:
            Aff = A[np.ix_(free, free)]
            rhs = -(b[free] + A[np.ix_(free, fixed)] @ x[fixed]) if fixed else -b[free]
            try:
                x[free] = np.linalg.solve(Aff, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(x[free] < lower[free]) or np.any(x[free] > upper[free]):
                continue
        val = 0.5 * x @ A @ x + b @ x
        if val < best[0]:
            best = (float(val), x)
    return best


def _rotated_quadratic(n, cond, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.logspace(0, np.log10(cond), n)
    A = (Q * eig) @ Q.T
    A = 0.5 * (A + A.T)
    return A, eig, rng


def builtin_suite() -> list[BenchmarkProblem]:
    """The fixed desk-scale benchmark suite (deterministic)."""
    probs: list[BenchmarkProblem] = []
    inf = np.inf

    n = 10
    probs.append(_sep_quad("quad-interior-10", np.ones(n), np.full(n, 0.5),
                           np.zeros(n), np.ones(n), np.full(n, 0.1), ("interior",)))
    probs.append(_sep_quad("quad-vertex-4", np.ones(4), [2.0, -1.0, 3.0, -0.5],
                           np.zeros(4), np.ones(4), np.full(4, 0.5), ("vertex",)))
    probs.append(_sep_quad("quad-vertex-upper-8", np.arange(1, 9), np.full(8, 5.0),
                           -np.ones(8), np.ones(8), np.zeros(8), ("vertex",)))
    probs.append(_sep_quad("quad-face-6", np.ones(6), [0.3, 1.5, -0.2, 0.7, 2.0, 0.5],
                           np.zeros(6), np.ones(6), np.full(6, 0.5), ("face",)))
    rng = np.random.default_rng(20)
    w = rng.uniform(1.0, 100.0, 20)
    c = rng.uniform(-0.5, 1.5, 20)
    probs.append(_sep_quad("quad-weighted-face-20", w, c, np.zeros(20), np.ones(20),
                           rng.uniform(0.0, 1.0, 20), ("face",)))
    # large weights sit on interior coordinates so the optimal value stays O(1)
    w = np.logspace(0, 6, 50)
    c = np.where(np.arange(50) < 8, np.where(np.arange(50) % 2 == 0, 1.5, -0.5), 0.25)
    probs.append(_sep_quad("quad-illcond-sep-50", w, c, np.zeros(50), np.ones(50),
                           np.full(50, 0.9), ("face", "illcond")))

    A, eig, rng = _rotated_quadratic(30, 1e6, 30)
    c = rng.uniform(-1.0, 1.0, 30)
    probs.append(BenchmarkProblem("quad-illcond-rot-30", ShiftedQuadratic(A, c),
                                  np.full(30, -inf), np.full(30, inf), np.zeros(30), f_opt=0.0,
                                  L_g=float(eig[-1]), L_H=0.0,
                                  tags=("convex", "unconstrained", "illcond")))
    # built from a prescribed KKT point: gradient mu vanishes on free coordinates
    # and has the sign that pins the active ones to their bound
    A, eig, rng = _rotated_quadratic(30, 1e6, 31)
    x_star = rng.uniform(-0.9, 0.9, 30)
    mu = np.zeros(30)
    x_star[:6] = -1.0
    mu[:6] = rng.uniform(0.5, 1.5, 6)
    x_star[6:12] = 1.0
    mu[6:12] = -rng.uniform(0.5, 1.5, 6)
    c = x_star - np.linalg.solve(A, mu)
    probs.append(BenchmarkProblem("quad-illcond-rot-box-30", ShiftedQuadratic(A, c),
                                  -np.ones(30), np.ones(30), np.zeros(30),
                                  f_opt=0.5 * float(mu @ (x_star - c)), kkt_x=x_star,
                                  L_g=float(eig[-1]), L_H=0.0, tags=("convex", "illcond")))

    for n in (2, 10, 100):
        x0 = np.tile([-1.2, 1.0], n // 2)
        probs.append(BenchmarkProblem(f"rosenbrock-{n}", ExtendedRosenbrock(), np.full(n, -inf),
                                      np.full(n, inf), x0, f_opt=0.0,
                                      tags=("nonconvex", "unconstrained")))
        probs.append(BenchmarkProblem(f"rosenbrock-box-{n}", ExtendedRosenbrock(), np.full(n, -2.0),
                                      np.tile([0.5, 2.0], n // 2), x0,
                                      tags=("nonconvex", "bounded")))

    probs.append(BenchmarkProblem("concave-sym-3", SeparableQuadratic(-2.0 * np.ones(3), np.zeros(3)),
                                  -np.ones(3), np.ones(3), np.full(3, 0.3), f_opt=-3.0, L_g=2.0,
                                  L_H=0.0, tags=("nonconvex", "vertex")))
    probs.append(BenchmarkProblem("indefinite-sep-4",
                                  SeparableQuadratic([2.0, -1.0, 3.0, -2.0], [0.2, 0.3, -0.4, -0.1]),
                                  -np.ones(4), np.ones(4), np.zeros(4), L_g=3.0, L_H=0.0,
                                  tags=("nonconvex", "face")))
    rng = np.random.default_rng(4)
    B = rng.standard_normal((4, 4))
    A = -(B @ B.T) - 0.5 * np.eye(4)
    b = rng.standard_normal(4)
    probs.append(BenchmarkProblem("concave-dense-4", DenseQuadratic(A, b), -np.ones(4), np.ones(4),
                                  np.zeros(4), L_g=float(np.max(np.abs(np.linalg.eigvalsh(A)))),
                                  L_H=0.0, tags=("nonconvex", "vertex")))
    probs.append(BenchmarkProblem("quartic-saddle-2", DoubleWell(), np.full(2, -2.0), np.full(2, 2.0),
                                  np.array([0.1, 0.01]), f_opt=0.0, tags=("nonconvex", "saddle")))
    probs.append(BenchmarkProblem("unbounded-1", NegativeCube(), np.zeros(1), np.full(1, inf),
                                  np.ones(1), tags=("nonconvex", "unbounded")))
    n = 10
    probs.append(BenchmarkProblem("trid-10", Trid(), np.full(n, -100.0), np.full(n, 100.0), np.zeros(n),
                                  f_opt=-n * (n + 4) * (n - 1) / 6.0, L_g=4.0, L_H=0.0,
                                  tags=("convex", "interior")))
    probs.append(BenchmarkProblem("trid-box-10", Trid(), np.full(n, -5.0), np.full(n, 5.0), np.zeros(n),
                                  L_g=4.0, L_H=0.0, tags=("convex", "face")))
    probs.append(BenchmarkProblem("styblinski-tang-5", StyblinskiTang(), np.full(5, -5.0),
                                  np.full(5, 5.0), np.zeros(5), tags=("nonconvex", "bounded")))
    probs.append(BenchmarkProblem("beale-2", Beale(), np.full(2, -4.5), np.full(2, 4.5),
                                  np.array([1.0, 1.0]), f_opt=0.0, tags=("nonconvex", "bounded")))
    return probs


def get_problem(name: str) -> BenchmarkProblem:
    for p in builtin_suite():
        if p.name == name:
            return p
    raise KeyError(f"unknown problem {name!r}")
