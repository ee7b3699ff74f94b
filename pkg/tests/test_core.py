import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from boxnmr.core import (BoxBounds, FaceIndexSets, Iterate, NumericalFailure, ObjectiveOracle,
                         face_sets, free_reduced_gradient, project, reduced_gradient,
                         reduced_oracle)

from conftest import fd_grad, fd_hessp

inf = np.inf


def box(lo, up):
    return BoxBounds(np.array(lo, dtype=float), np.array(up, dtype=float))


class TestBoxBounds:
    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            box([0.0, 1.0], [1.0, 1.0])

    def test_rejects_nan_and_shape_mismatch(self):
        with pytest.raises(ValueError):
            box([np.nan], [1.0])
        with pytest.raises(ValueError):
            box([0.0, 0.0], [1.0])

    def test_bounds_are_read_only(self):
        b = box([0.0], [1.0])
        with pytest.raises(ValueError):
            b.lower[0] = -1.0

    def test_unbounded(self):
        b = BoxBounds.unbounded(3)
        assert b.n == 3 and b.contains(np.array([1e300, -1e300, 0.0]))


class TestProject:
    def test_clamps_each_coordinate(self):
        np.testing.assert_array_equal(project([2.0, -1.0], box([0, 0], [1, 1])), [1.0, 0.0])

    def test_interior_point_is_fixed(self):
        np.testing.assert_array_equal(project([0.5, 0.5], box([0, 0], [1, 1])), [0.5, 0.5])

    def test_one_sided_bound(self):
        np.testing.assert_array_equal(project([-3.0], box([-1], [inf])), [-1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            project([1.0, 2.0, 3.0], box([0, 0], [1, 1]))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, 6, elements=st.floats(-1e6, 1e6)),
           arrays(np.float64, 6, elements=st.floats(-10, 10)),
           arrays(np.float64, 6, elements=st.floats(0.01, 10)))
    def test_idempotent_and_feasible(self, x, lo, width):
        b = BoxBounds(lo, lo + width)
        p = project(x, b)
        assert b.contains(p)
        np.testing.assert_array_equal(project(p, b), p)
        # the clamp is the nearest feasible point coordinate by coordinate
        np.testing.assert_array_equal(p, np.clip(x, lo, lo + width))


class TestFaceSets:
    def test_mixed_point(self):
        fs = face_sets([0.0, 0.5, 1.0], box([0, 0, 0], [1, 1, 1]))
        assert fs.at_lower.tolist() == [0]
        assert fs.at_upper.tolist() == [2]
        assert fs.free.tolist() == [1]

    def test_interior_point(self):
        fs = face_sets([0.2, 0.4, 0.9], box([0, 0, 0], [1, 1, 1]))
        assert fs.free.tolist() == [0, 1, 2]
        assert fs.at_lower.size == 0 and fs.at_upper.size == 0

    def test_single_active(self):
        fs = face_sets([0.0], box([0], [1]))
        assert fs.at_lower.tolist() == [0] and fs.n_free == 0

    def test_infinite_bounds_never_active(self):
        fs = face_sets([1e300, -1e300], BoxBounds.unbounded(2))
        assert fs.free.tolist() == [0, 1]

    def test_infeasible_point_rejected(self):
        with pytest.raises(ValueError):
            face_sets([1.5], box([0], [1]))

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 7, elements=st.floats(-1, 1)),
           arrays(np.float64, 7, elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, 4, elements=st.floats(-1e3, 1e3)))
    def test_gather_scatter_adjoint(self, x, v, y_full):
        b = box(-0.5 * np.ones(7), 0.5 * np.ones(7))
        fs = face_sets(project(x, b), b)
        y = y_full[: fs.n_free] if fs.n_free <= 4 else np.resize(y_full, fs.n_free)
        lhs = float(fs.scatter(y) @ v)
        rhs = float(y @ fs.gather(v))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


class TestReducedGradient:
    def test_interior(self):
        np.testing.assert_allclose(reduced_gradient([0.5], [0.1], box([0], [1])), [0.1])

    def test_push_into_lower_bound_clipped(self):
        np.testing.assert_array_equal(reduced_gradient([0.0], [1.0], box([0], [1])), [0.0])

    def test_descent_away_from_bound_survives(self):
        np.testing.assert_array_equal(reduced_gradient([0.0], [-1.0], box([0], [1])), [-1.0])

    def test_free_reduced_gradient(self):
        fs = FaceIndexSets(np.array([0]), np.array([2]), np.array([1]), 3)
        np.testing.assert_array_equal(free_reduced_gradient(np.array([1.0, 2.0, 3.0]), fs),
                                      [0, 2, 0])
        all_free = FaceIndexSets(np.array([], int), np.array([], int), np.arange(3), 3)
        np.testing.assert_array_equal(free_reduced_gradient(np.array([1.0, 2.0, 3.0]), all_free),
                                      [1, 2, 3])
        none_free = FaceIndexSets(np.arange(3), np.array([], int), np.array([], int), 3)
        np.testing.assert_array_equal(free_reduced_gradient(np.array([1.0, 2.0, 3.0]), none_free),
                                      [0, 0, 0])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 5, elements=st.floats(-2, 2)),
           arrays(np.float64, 5, elements=st.one_of(st.just(0.0), st.floats(-5, -1e-6),
                                                    st.floats(1e-6, 5))))
    def test_zero_iff_kkt(self, x, g):
        # independent KKT check: free => g = 0, lower => g >= 0, upper => g <= 0.
        # gradients below the spacing of x are absorbed by x - g, hence the gap
        b = box(-np.ones(5), np.ones(5))
        x = project(x, b)
        rg = reduced_gradient(x, g, b)
        kkt = all((x[i] > -1 and x[i] < 1 and g[i] == 0) or (x[i] == -1 and g[i] >= 0)
                  or (x[i] == 1 and g[i] <= 0) for i in range(5))
        assert kkt == bool(np.all(rg == 0))
        fs = face_sets(x, b)
        assert np.linalg.norm(free_reduced_gradient(rg, fs)) <= np.linalg.norm(rg)


def _norm2_oracle(n):
    return ObjectiveOracle(n, lambda x: float(x @ x), lambda x: 2 * x, lambda x, v: 2 * v)


class TestReducedOracle:
    def test_norm_squared_one_free(self):
        x = np.array([1.0, 1.0])
        fs = FaceIndexSets(np.array([], int), np.array([1]), np.array([0]), 2)
        red = reduced_oracle(_norm2_oracle(2), x, fs)
        for y in (-0.5, 0.0, 0.3):
            assert red.f(np.array([y])) == pytest.approx((1 + y) ** 2 + 1)
        np.testing.assert_allclose(red.grad(np.zeros(1)), [2.0])

    def test_all_free_matches_full_hessian(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        orc = ObjectiveOracle(2, lambda x: 0.5 * x @ A @ x, lambda x: A @ x, lambda x, v: A @ v)
        x = np.array([0.3, -0.2])
        fs = face_sets(x, BoxBounds.unbounded(2))
        red = reduced_oracle(orc, x, fs)
        w = np.array([1.0, -2.0])
        np.testing.assert_allclose(red.hessp_at_zero()(w), A @ w)
        assert red.f(np.zeros(2)) == pytest.approx(orc.f(x))

    def test_bilinear_reduced_hessian_is_zero(self):
        orc = ObjectiveOracle(2, lambda x: x[0] * x[1], lambda x: np.array([x[1], x[0]]),
                              lambda x, v: np.array([v[1], v[0]]))
        x = np.array([2.0, 3.0])
        fs = FaceIndexSets(np.array([0]), np.array([], int), np.array([1]), 2)
        red = reduced_oracle(orc, x, fs)
        np.testing.assert_allclose(red.grad(np.zeros(1)), [2.0])
        np.testing.assert_allclose(fd_grad(red.f, np.zeros(1)), [2.0], rtol=1e-8)
        np.testing.assert_allclose(red.hessp_at_zero()(np.array([1.7])), [0.0])
        np.testing.assert_allclose(fd_hessp(red.grad, np.zeros(1), np.array([1.7])), [0.0],
                                   atol=1e-8)

    def test_empty_face_rejected(self):
        fs = FaceIndexSets(np.array([0]), np.array([], int), np.array([], int), 1)
        with pytest.raises(ValueError):
            reduced_oracle(_norm2_oracle(1), np.zeros(1), fs)

    def test_finite_differences_on_rosenbrock_face(self):
        from boxnmr.bench.problems import ExtendedRosenbrock
        obj = ExtendedRosenbrock()
        orc = ObjectiveOracle(6, obj.f, obj.grad, obj.hessp)
        b = box(-np.ones(6), 0.5 * np.ones(6))
        x = np.array([0.5, 0.2, -1.0, 0.3, 0.1, 0.4])
        red = reduced_oracle(orc, x, face_sets(x, b))
        y0 = np.zeros(red.dim)
        g = red.grad(y0)
        np.testing.assert_allclose(fd_grad(red.f, y0), g, rtol=1e-6, atol=1e-6)
        w = np.linspace(-1, 1, red.dim)
        np.testing.assert_allclose(fd_hessp(red.grad, y0, w), red.hessp_at_zero()(w),
                                   rtol=1e-6, atol=1e-5)


class TestOracle:
    def test_counters(self):
        orc = _norm2_oracle(2)
        orc.f(np.ones(2))
        orc.grad(np.ones(2))
        orc.grad(np.ones(2))
        orc.hessp(np.ones(2), np.ones(2))
        assert orc.counters() == {"n_f": 1, "n_g": 2, "n_hv": 1}

    def test_gradient_shape_checked(self):
        orc = ObjectiveOracle(2, lambda x: 0.0, lambda x: np.zeros(3), lambda x, v: v)
        with pytest.raises(ValueError):
            orc.grad(np.zeros(2))

    def test_iterate_rejects_nan(self):
        orc = ObjectiveOracle(1, lambda x: np.nan, lambda x: x, lambda x, v: v)
        with pytest.raises(NumericalFailure):
            Iterate.at(np.zeros(1), orc, BoxBounds.unbounded(1))
