"""Estimate a defensible curvature cap from a fully supported reference
curve by fitting a fixed-knot least-squares cubic spline and taking the
maximum absolute second derivative.

The second derivative of a cubic spline is piecewise linear, so its max is
attained at a knot or a support endpoint and is evaluated exactly there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .core import ValidationError

_DEGREE = 3


@dataclass(frozen=True)
class ReferenceCurve:
    """(x, y) samples of a fully supported curve plus interior knots."""

    points: tuple[tuple[float, float], ...]
    knots: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(
            sorted((float(x), float(y)) for x, y in self.points)
        )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        if len(pts) < 2:
            raise ValidationError("reference curve needs at least two points")
        xs = [p[0] for p in pts]
        lo, hi = xs[0], xs[-1]
        if not lo < hi:
            raise ValidationError("reference curve support has zero width")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValidationError("knots must be strictly increasing")
        if self.knots and not (lo < self.knots[0] and self.knots[-1] < hi):
            raise ValidationError(
                f"knots must lie strictly inside the support ({lo}, {hi})"
            )
        segments = [lo, *self.knots, hi]
        xs_arr = np.asarray(xs)
        for s_lo, s_hi in zip(segments, segments[1:]):
            if np.count_nonzero((xs_arr >= s_lo) & (xs_arr <= s_hi)) < 2:
                raise ValidationError(
                    f"spline segment [{s_lo}, {s_hi}] contains fewer than 2 points"
                )

    @property
    def x(self) -> np.ndarray:
        return np.asarray([p[0] for p in self.points])

    @property
    def y(self) -> np.ndarray:
        return np.asarray([p[1] for p in self.points])

    @property
    def support(self) -> tuple[float, float]:
        return self.points[0][0], self.points[-1][0]


def default_knots(xs, count: int = 4) -> tuple[float, ...]:
    """Interior knots at evenly spaced quantiles of the x data."""
    if count < 0:
        raise ValidationError("knot count must be nonnegative")
    qs = np.arange(1, count + 1) / (count + 1)
    return tuple(float(v) for v in np.quantile(np.asarray(xs, dtype=float), qs))


@dataclass(frozen=True, eq=False)
class SplineFit:
    """A fitted piecewise cubic (C2 at knots) with its residuals."""

    spline: BSpline
    boundary: str
    fitted: np.ndarray
    residuals: np.ndarray

    def __call__(self, x):
        return self.spline(x)

    def second_derivative(self, x):
        return self.spline.derivative(2)(x)

    @property
    def interior_knots(self) -> np.ndarray:
        t = self.spline.t
        return t[_DEGREE + 1 : -(_DEGREE + 1)]


def _basis_matrix(xs: np.ndarray, t: np.ndarray) -> np.ndarray:
    return BSpline.design_matrix(xs, t, _DEGREE).toarray()


def _second_deriv_rows(t: np.ndarray, at: np.ndarray) -> np.ndarray:
    n_basis = t.size - _DEGREE - 1
    rows = np.empty((at.size, n_basis))
    for j in range(n_basis):
        coef = np.zeros(n_basis)
        coef[j] = 1.0
        rows[:, j] = BSpline(t, coef, _DEGREE).derivative(2)(at)
    return rows


def fit_spline(curve: ReferenceCurve, boundary: str = "natural") -> SplineFit:
    """Least-squares cubic spline through the curve with fixed knots.

    boundary="natural" constrains f''=0 at the support endpoints, which
    keeps endpoint curvature from inflating the estimated cap; "free" drops
    that constraint (use it when the data really are one global cubic).
    """
    if boundary not in ("natural", "free"):
        raise ValidationError(f"boundary must be 'natural' or 'free', got {boundary!r}")
    lo, hi = curve.support
    t = np.concatenate(
        [[lo] * (_DEGREE + 1), curve.knots, [hi] * (_DEGREE + 1)]
    )
    xs, ys = curve.x, curve.y
    B = _basis_matrix(xs, t)
    n_basis = B.shape[1]

    if boundary == "free":
        if np.linalg.matrix_rank(B) < n_basis:
            raise ValidationError(
                "rank-deficient spline design: too few distinct points for "
                "the requested knots"
            )
        coef, *_ = np.linalg.lstsq(B, ys, rcond=None)
    else:
        A = _second_deriv_rows(t, np.asarray([lo, hi]))
        if np.linalg.matrix_rank(np.vstack([B, A])) < n_basis:
            raise ValidationError(
                "rank-deficient spline design: too few distinct points for "
                "the requested knots"
            )
        m = A.shape[0]
        kkt = np.block(
            [[2.0 * B.T @ B, A.T], [A, np.zeros((m, m))]]
        )
        target = np.concatenate([2.0 * B.T @ ys, np.zeros(m)])
        sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)
        coef = sol[:n_basis]

    spline = BSpline(t, coef, _DEGREE)
    fitted = spline(xs)
    return SplineFit(
        spline=spline,
        boundary=boundary,
        fitted=fitted,
        residuals=ys - fitted,
    )


def max_curvature(fit: SplineFit) -> float:
    """Max |f''| over the support, evaluated at knots and endpoints where
    the piecewise-linear second derivative attains it."""
    t = fit.spline.t
    pts = np.unique(t[_DEGREE : len(t) - _DEGREE])
    return float(np.max(np.abs(fit.second_derivative(pts))))


def suggested_cap(curvature_estimate: float, factor: float = 2.0) -> float:
    """Working curvature cap: a small multiple of the fitted maximum, so the
    constraint is unlikely to bind on the truth. Emitted as a suggestion."""
    if factor <= 0:
        raise ValidationError("cap factor must be positive")
    return factor * curvature_estimate
