import numpy as np
import pytest

from cefbounds import (
    ReferenceCurve,
    ValidationError,
    default_knots,
    fit_spline,
    max_curvature,
    suggested_cap,
)


def cubic_points(a3=0.02, a2=-0.1, a1=1.5, a0=3.0, n=60, hi=10.0):
    xs = np.linspace(0.0, hi, n)
    ys = a3 * xs ** 3 + a2 * xs ** 2 + a1 * xs + a0
    return tuple(zip(map(float, xs), map(float, ys)))


class TestFit:
    def test_recovers_global_cubic_exactly(self):
        pts = cubic_points()
        curve = ReferenceCurve(points=pts, knots=(3.0, 6.0))
        fit = fit_spline(curve, boundary="free")
        np.testing.assert_allclose(fit.fitted, curve.y, atol=1e-8)
        np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-8)
        # f'' of the cubic is 6*a3*x + 2*a2, largest at the far endpoint
        expected = max(abs(2 * -0.1), abs(6 * 0.02 * 10 + 2 * -0.1))
        assert max_curvature(fit) == pytest.approx(expected, rel=1e-8)

    def test_straight_line_has_zero_curvature(self):
        xs = np.linspace(0.0, 10.0, 30)
        pts = tuple(zip(map(float, xs), map(float, 0.7 * xs - 2.0)))
        for boundary in ("natural", "free"):
            fit = fit_spline(ReferenceCurve(points=pts, knots=(5.0,)), boundary)
            assert max_curvature(fit) < 1e-8
            np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-8)

    def test_half_square_curvature_is_one(self):
        xs = np.linspace(0.0, 10.0, 50)
        pts = tuple(zip(map(float, xs), map(float, xs ** 2 / 2)))
        fit = fit_spline(ReferenceCurve(points=pts, knots=(4.0, 7.0)), "free")
        assert max_curvature(fit) == pytest.approx(1.0, rel=1e-8)

    def test_linear_trend_leaves_curvature_invariant(self):
        rng = np.random.default_rng(3)
        xs = np.sort(rng.uniform(0.0, 10.0, 80))
        ys = np.sin(xs / 2.0) + 0.05 * rng.normal(size=xs.size)
        base = ReferenceCurve(points=tuple(zip(map(float, xs), map(float, ys))),
                              knots=(2.5, 5.0, 7.5))
        shifted = ReferenceCurve(
            points=tuple(zip(map(float, xs), map(float, ys + 4.0 + 0.9 * xs))),
            knots=(2.5, 5.0, 7.5),
        )
        for boundary in ("natural", "free"):
            f0 = fit_spline(base, boundary)
            f1 = fit_spline(shifted, boundary)
            np.testing.assert_allclose(f1.fitted, f0.fitted + 4.0 + 0.9 * xs,
                                       atol=1e-7)
            assert max_curvature(f1) == pytest.approx(max_curvature(f0), abs=1e-9)

    def test_free_residuals_orthogonal_to_fitted_values(self):
        rng = np.random.default_rng(11)
        xs = np.sort(rng.uniform(0.0, 10.0, 120))
        ys = np.cos(xs) + 0.2 * rng.normal(size=xs.size)
        curve = ReferenceCurve(points=tuple(zip(map(float, xs), map(float, ys))),
                               knots=(3.0, 6.0, 8.0))
        fit = fit_spline(curve, "free")
        assert abs(fit.residuals @ fit.fitted) < 1e-7
        assert abs(fit.residuals.sum()) < 1e-7

    def test_natural_boundary_zeroes_endpoint_curvature(self):
        rng = np.random.default_rng(5)
        xs = np.sort(rng.uniform(0.0, 10.0, 100))
        ys = np.sin(xs) + 0.1 * rng.normal(size=xs.size)
        curve = ReferenceCurve(points=tuple(zip(map(float, xs), map(float, ys))),
                               knots=(2.0, 5.0, 8.0))
        fit = fit_spline(curve, "natural")
        lo, hi = curve.support
        assert abs(float(fit.second_derivative(lo))) < 1e-7
        assert abs(float(fit.second_derivative(hi))) < 1e-7

    def test_natural_never_beats_free_on_sse(self):
        rng = np.random.default_rng(9)
        xs = np.sort(rng.uniform(0.0, 10.0, 100))
        ys = np.exp(xs / 5.0) + 0.1 * rng.normal(size=xs.size)
        curve = ReferenceCurve(points=tuple(zip(map(float, xs), map(float, ys))),
                               knots=(3.0, 7.0))
        sse_free = float(fit_spline(curve, "free").residuals @ fit_spline(curve, "free").residuals)
        sse_nat = float(fit_spline(curve, "natural").residuals @ fit_spline(curve, "natural").residuals)
        assert sse_free <= sse_nat + 1e-10


class TestKnots:
    def test_requested_knots_are_honored(self):
        pts = cubic_points(n=100)
        fit = fit_spline(ReferenceCurve(points=pts, knots=(2.0, 4.0, 6.0, 8.0)))
        np.testing.assert_allclose(fit.interior_knots, (2.0, 4.0, 6.0, 8.0))

    def test_default_knots_are_quantiles(self):
        xs = np.arange(0.0, 101.0)
        knots = default_knots(xs, count=4)
        np.testing.assert_allclose(knots, (20.0, 40.0, 60.0, 80.0), atol=1e-12)
        assert default_knots(xs, count=0) == ()

    def test_curvature_max_is_checked_at_every_knot(self):
        # a bump centered mid-support: the interior knot must pick it up
        xs = np.linspace(0.0, 10.0, 200)
        ys = np.exp(-((xs - 5.0) ** 2))
        curve = ReferenceCurve(points=tuple(zip(map(float, xs), map(float, ys))),
                               knots=(4.0, 5.0, 6.0))
        fit = fit_spline(curve, "natural")
        grid = np.linspace(0.0, 10.0, 2001)
        dense_max = float(np.max(np.abs(fit.second_derivative(grid))))
        assert max_curvature(fit) == pytest.approx(dense_max, rel=1e-6)


class TestSuggestedCap:
    def test_doubles_by_default(self):
        assert suggested_cap(0.35) == pytest.approx(0.7)
        assert suggested_cap(0.35, factor=3.0) == pytest.approx(1.05)

    def test_rejects_nonpositive_factor(self):
        with pytest.raises(ValidationError):
            suggested_cap(1.0, factor=0.0)


class TestValidation:
    def test_knots_outside_support_rejected(self):
        pts = cubic_points(n=20)
        with pytest.raises(ValidationError, match="inside the support"):
            ReferenceCurve(points=pts, knots=(11.0,))
        with pytest.raises(ValidationError, match="inside the support"):
            ReferenceCurve(points=pts, knots=(0.0,))

    def test_unordered_knots_rejected(self):
        pts = cubic_points(n=20)
        with pytest.raises(ValidationError, match="strictly increasing"):
            ReferenceCurve(points=pts, knots=(6.0, 3.0))

    def test_sparse_segment_rejected(self):
        pts = tuple(zip((0.0, 1.0, 9.0, 10.0), (0.0, 1.0, 2.0, 3.0)))
        with pytest.raises(ValidationError, match="fewer than 2 points"):
            ReferenceCurve(points=pts, knots=(4.0, 6.0))

    def test_too_few_points_rejected(self):
        with pytest.raises(ValidationError):
            ReferenceCurve(points=((0.0, 1.0),), knots=())

    def test_unknown_boundary_rejected(self):
        curve = ReferenceCurve(points=cubic_points(n=30), knots=(5.0,))
        with pytest.raises(ValidationError, match="boundary"):
            fit_spline(curve, boundary="clamped")

    def test_points_sort_on_construction(self):
        curve = ReferenceCurve(points=((5.0, 2.0), (0.0, 1.0), (10.0, 3.0)),
                               knots=())
        assert curve.x[0] == 0.0 and curve.x[-1] == 10.0
        assert curve.support == (0.0, 10.0)
