import itertools
import json

import numpy as np
import pytest

from boxnmr.core import BoxBounds, ObjectiveOracle, reduced_gradient
from boxnmr.driver import RunRecord, SolverConfig, Status, solve, solve_p, solve_t
from boxnmr.bench.problems import DoubleWell


def shifted_sq(c):
    c = np.asarray(c, dtype=float)
    return ObjectiveOracle(c.size, lambda x: 0.5 * float((x - c) @ (x - c)), lambda x: x - c,
                           lambda x, v: v.copy())


def fresh_grad_inf(oracle, bounds, x):
    return float(np.max(np.abs(reduced_gradient(x, oracle.grad(x), bounds))))


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.epsilon, cfg.theta, cfg.rho, cfg.m) == (1e-8, 0.1, 1e-4, 20)
        assert (cfg.a1, cfg.a2, cfg.eps_mr_ini, cfg.npc_mode) == (1e8, 1e-16, 0.1, "solution")
        assert (cfg.lambda_min_spg, cfg.lambda_max_spg) == (1e-16, 1e16)
        assert (cfg.eta, cfg.tau, cfg.alpha, cfg.gamma, cfg.omega_min, cfg.zeta) == \
            (1e-8, 0.9, 1e-8, 1.0, 1e-6, 10.0)
        assert cfg.time_limit_seconds == 600 and cfg.max_iterations == 100000

    @pytest.mark.parametrize("kw", [dict(theta=0.0), dict(rho=1.0), dict(algorithm="t", rho=0.5),
                                    dict(a1=0.5), dict(a2=1.0), dict(eta=2.0), dict(tau=0.0),
                                    dict(lambda_min_spg=2.0, lambda_max_spg=1.0),
                                    dict(algorithm="x"), dict(npc_mode="other"),
                                    dict(zeta=1.0)])
    def test_invalid_parameters(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_rho_half_allowed_for_p_only(self):
        SolverConfig(algorithm="p", rho=0.6)

    def test_unknown_keys_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown"):
            SolverConfig.from_mapping({"epsilon": 1e-6, "bogus": 1})
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"algorithm": "t", "eta": 1e-6, "eta0": 1e-4}))
        cfg = SolverConfig.from_file(p)
        assert cfg.algorithm == "t" and cfg.eta == 1e-6
        p.write_text(json.dumps({"nested": {"a": 1}}))
        with pytest.raises(ValueError):
            SolverConfig.from_file(p)

    def test_round_trip(self):
        cfg = SolverConfig(algorithm="t", epsilon=1e-6, label="mine")
        assert SolverConfig.from_mapping(cfg.to_dict()) == cfg
        assert cfg.name == "mine" and SolverConfig().name == "Algorithm P"


@pytest.mark.parametrize("alg", ["p", "t"])
class TestExamples:
    def test_interior_minimizer(self, alg):
        c = np.array([0.2, 0.7, 0.5, 0.9])
        b = BoxBounds(np.zeros(4), np.ones(4))
        orc = shifted_sq(c)
        rec = solve(orc, b, np.full(4, 0.4), SolverConfig(algorithm=alg))
        assert rec.status is Status.CONVERGED and rec.iterations <= 3
        np.testing.assert_allclose(rec.x, c, atol=1e-6)

    def test_projected_minimizer(self, alg):
        c = np.array([1.7, -0.3, 0.5, 2.0])
        b = BoxBounds(np.zeros(4), np.ones(4))
        orc = shifted_sq(c)
        rec = solve(orc, b, np.full(4, 0.5), SolverConfig(algorithm=alg))
        assert rec.status is Status.CONVERGED
        np.testing.assert_array_equal(rec.x, np.clip(c, 0, 1))
        assert fresh_grad_inf(orc, b, rec.x) <= 1e-8

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_concave_reaches_vertex(self, alg, n):
        orc = ObjectiveOracle(n, lambda x: -float(x @ x), lambda x: -2 * x, lambda x, v: -2 * v)
        b = BoxBounds(-np.ones(n), np.ones(n))
        rec = solve(orc, b, np.full(n, 0.3), SolverConfig(algorithm=alg))
        vertices = [np.array(v) for v in itertools.product([-1.0, 1.0], repeat=n)]
        best = min(-float(v @ v) for v in vertices)
        assert rec.status is Status.CONVERGED
        assert rec.f == best == -n
        assert np.all(np.abs(rec.x) == 1.0)

    def test_active_set_matches_kkt(self, alg):
        w = np.array([1.0, 3.0, 0.5, 2.0, 10.0])
        c = np.array([1.4, 0.5, -0.7, 0.99, 1.0000001])
        f = lambda x: 0.5 * float(w @ (x - c) ** 2)  # noqa: E731
        orc = ObjectiveOracle(5, f, lambda x: w * (x - c), lambda x, v: w * v)
        b = BoxBounds(np.zeros(5), np.ones(5))
        rec = solve(orc, b, np.full(5, 0.3), SolverConfig(algorithm=alg))
        x_star = np.clip(c, 0, 1)
        assert rec.status is Status.CONVERGED
        assert fresh_grad_inf(orc, b, rec.x) <= 1e-8
        np.testing.assert_array_equal(rec.x == 0, x_star == 0)
        np.testing.assert_array_equal(rec.x == 1, x_star == 1)

    def test_projects_infeasible_start(self, alg):
        orc = shifted_sq([0.5, 0.5])
        b = BoxBounds(np.zeros(2), np.ones(2))
        rec = solve(orc, b, np.array([5.0, -5.0]), SolverConfig(algorithm=alg), keep_iterates=True)
        assert b.contains(rec.iterates[0]) and rec.status is Status.CONVERGED

    def test_deterministic_traces(self, alg):
        from boxnmr.bench.problems import get_problem
        p = get_problem("rosenbrock-box-10")
        runs = [solve(p.oracle(), p.bounds, p.x0, SolverConfig(algorithm=alg)) for _ in range(2)]
        strip = lambda r: [(e.k, e.f, e.grad_norm, e.step_kind, e.sigma, e.tol)  # noqa: E731
                           for e in r.trace]
        assert strip(runs[0]) == strip(runs[1])
        np.testing.assert_array_equal(runs[0].x, runs[1].x)


def test_saddle_start_uses_negative_curvature():
    obj = DoubleWell()
    orc = ObjectiveOracle(2, obj.f, obj.grad, obj.hessp)
    b = BoxBounds(np.full(2, -2.0), np.full(2, 2.0))
    rec = solve_t(orc, b, np.array([1e-3, 0.0]), SolverConfig(algorithm="t"))
    assert rec.trace[1].info["d_type"] == "NPC"
    assert rec.status is Status.CONVERGED
    assert rec.f < obj.f(np.zeros(2))
    np.testing.assert_allclose(np.abs(rec.x), [1.0, 0.0], atol=1e-6)


def test_sigma_one_followed_by_cubic():
    from boxnmr.bench.problems import get_problem
    seen_sigma_one = 0
    # a loose eta makes the inexact-solution exit common
    cfg = SolverConfig(algorithm="t", eta0=0.5, eta=0.5)
    for name in ("rosenbrock-2", "rosenbrock-box-10", "beale-2"):
        p = get_problem(name)
        rec = solve_t(p.oracle(), p.bounds, p.x0, cfg)
        assert rec.status is Status.CONVERGED
        for a, b in zip(rec.trace, rec.trace[1:]):
            if a.sigma == 1:
                seen_sigma_one += 1
                assert b.step_kind == "Cubic"
    assert seen_sigma_one >= 1


class TestStatuses:
    def test_iteration_limit(self):
        from boxnmr.bench.problems import get_problem
        p = get_problem("rosenbrock-10")
        rec = solve_p(p.oracle(), p.bounds, p.x0, SolverConfig(max_iterations=2))
        assert rec.status is Status.ITERATION_LIMIT and rec.iterations == 2

    def test_time_limit(self):
        from boxnmr.bench.problems import get_problem
        p = get_problem("rosenbrock-100")
        rec = solve(p.oracle(), p.bounds, p.x0, SolverConfig(time_limit_seconds=1e-9))
        assert rec.status is Status.TIME_LIMIT

    @pytest.mark.parametrize("alg", ["p", "t"])
    def test_unbounded(self, alg):
        orc = ObjectiveOracle(1, lambda x: -float(x[0] ** 3), lambda x: -3 * x ** 2,
                              lambda x, v: -6 * x * v)
        b = BoxBounds(np.array([0.0]), np.array([np.inf]))
        rec = solve(orc, b, np.array([1.0]), SolverConfig(algorithm=alg))
        assert rec.status is Status.UNBOUNDED and rec.f <= -1e12

    def test_nan_trials_exhaust_line_search(self):
        calls = {"n": 0}

        def f(x):
            calls["n"] += 1
            return float(x @ x) if calls["n"] == 1 else np.nan

        orc = ObjectiveOracle(2, f, lambda x: 2 * x, lambda x, v: 2 * v)
        rec = solve(orc, BoxBounds.unbounded(2), np.ones(2))
        assert rec.status is Status.LACK_OF_PROGRESS

    def test_nan_gradient_at_accepted_point(self):
        def grad(x):
            return 2 * x if np.all(x == 1.0) else np.full_like(x, np.nan)

        orc = ObjectiveOracle(2, lambda x: float(x @ x), grad, lambda x, v: 2 * v)
        rec = solve(orc, BoxBounds.unbounded(2), np.ones(2))
        assert rec.status is Status.NUMERICAL_FAILURE

    def test_lack_of_progress_on_inconsistent_gradient(self):
        # gradient claims descent along +x, but f increases in every direction
        orc = ObjectiveOracle(1, lambda x: float(abs(x[0])), lambda x: np.array([-1.0]),
                              lambda x, v: v)
        rec = solve(orc, BoxBounds.unbounded(1), np.zeros(1), SolverConfig(max_trials=5))
        assert rec.status is Status.LACK_OF_PROGRESS

    def test_summary_fields(self):
        rec = solve(shifted_sq([0.5]), BoxBounds(np.zeros(1), np.ones(1)), np.zeros(1))
        assert isinstance(rec, RunRecord)
        assert set(rec.summary()) >= {"status", "f", "grad_norm", "iterations", "n_f", "n_g",
                                      "n_hv", "wall_seconds"}
