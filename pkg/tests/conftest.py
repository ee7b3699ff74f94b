import numpy as np
import pytest

from boxnmr.core import BoxBounds, ObjectiveOracle

# filled by test_acceptance.py, reported once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def make_oracle(f, g, hv, n):
    return ObjectiveOracle(n, f, g, hv)


def quad_oracle(A, b):
    """f = 1/2 x'Ax + b'x."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return ObjectiveOracle(len(b), lambda x: 0.5 * x @ A @ x + b @ x, lambda x: A @ x + b,
                           lambda x, v: A @ v)


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (f(x + e) - f(x - e)) / (2 * e[i])
    return g


def fd_hessp(grad, x, v, h=1e-6):
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.zeros_like(x)
    eps = h * max(1.0, np.linalg.norm(x)) / nv
    return (grad(x + eps * v) - grad(x - eps * v)) / (2 * eps)


@pytest.fixture
def unit_box():
    return lambda n: BoxBounds(np.zeros(n), np.ones(n))


def replay_backtrack(phi, phi0, slope0, rho, t0):
    """Scalar replay of Armijo backtracking with the quadratic-interpolation
    trial clamped to [0.1, 0.5] of the previous trial."""
    t = t0
    for _ in range(100):
        v = phi(t)
        if v <= phi0 + rho * t * slope0:
            return t, v
        q = v - phi0 - slope0 * t
        cand = -slope0 * t * t / (2 * q) if q > 0 else 0.5 * t
        t = min(max(cand, 0.1 * t), 0.5 * t)
    raise AssertionError("replay did not terminate")
