"""Domain types shared by every other module: binned samples, known
conditioning distributions, envelopes, and statistic specifications.

All types are immutable after construction. Bound math elsewhere assumes a
weakly increasing relationship; decreasing samples are normalized on ingest
(outcomes negated, range flipped) and results are flipped back on output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

DIRECTIONS = ("increasing", "decreasing", "none")

#: Relative tolerance used when deciding that a point coincides with a bin
#: boundary (scaled by support width).
BOUNDARY_RTOL = 1e-9


class CefBoundsError(Exception):
    """Base class for all errors raised by this package."""


class CefBoundsWarning(UserWarning):
    """Base class for warnings emitted by this package."""


class ClampWarning(CefBoundsWarning):
    """A computed bound fell outside the outcome range and was clamped."""


class SnapWarning(CefBoundsWarning):
    """A bin boundary was snapped to the nearest partition edge."""


class TrivialConstraintWarning(CefBoundsWarning):
    """No shape constraint is active; bounds degenerate to the outcome range."""


class ValidationError(CefBoundsError):
    """Invalid input data (malformed sample, distribution, or spec)."""


class InfeasibleError(CefBoundsError):
    """The constraint set admits no candidate function."""


@dataclass(frozen=True)
class OutcomeRange:
    """Absolute lower/upper limits on the outcome variable."""

    y_min: float
    y_max: float

    def __post_init__(self):
        if not (math.isfinite(self.y_min) and math.isfinite(self.y_max)):
            raise ValidationError("outcome range must be finite")
        if not self.y_min < self.y_max:
            raise ValidationError(
                f"outcome range requires y_min < y_max, got [{self.y_min}, {self.y_max}]"
            )

    @property
    def span(self) -> float:
        return self.y_max - self.y_min

    def contains(self, y: float, rtol: float = 1e-12) -> bool:
        slack = rtol * self.span
        return self.y_min - slack <= y <= self.y_max + slack

    def flipped(self) -> "OutcomeRange":
        return OutcomeRange(-self.y_max, -self.y_min)


@dataclass(frozen=True)
class BinnedSample:
    """Interval-censored data: K bins of the conditioning variable with the
    mean outcome observed in each bin.

    boundaries has K+1 strictly increasing entries; means has K entries, one
    per bin. direction declares the assumed monotonicity of the latent
    relationship ("none" disables the monotone assumption and permits
    unordered means).
    """

    boundaries: tuple[float, ...]
    means: tuple[float, ...]
    direction: str
    range: OutcomeRange

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if self.direction not in DIRECTIONS:
            raise ValidationError(
                f"direction must be one of {DIRECTIONS}, got {self.direction!r}"
            )
        if len(self.boundaries) < 2:
            raise ValidationError("need at least one bin (two boundaries)")
        if len(self.means) != len(self.boundaries) - 1:
            raise ValidationError(
                f"{len(self.boundaries)} boundaries imply "
                f"{len(self.boundaries) - 1} bins but {len(self.means)} means given"
            )
        for lo, hi in zip(self.boundaries, self.boundaries[1:]):
            if not lo < hi:
                raise ValidationError(f"zero-width or inverted bin [{lo}, {hi}]")
        if any(not math.isfinite(b) for b in self.boundaries):
            raise ValidationError("bin boundaries must be finite")

    @property
    def n_bins(self) -> int:
        return len(self.means)

    @property
    def support(self) -> tuple[float, float]:
        return self.boundaries[0], self.boundaries[-1]

    def bin_of(self, x: float) -> int:
        """0-based index of the bin containing x.

        Boundaries belong to the bin they open (lower-edge inclusive); the
        top boundary belongs to the last bin.
        """
        lo, hi = self.support
        if not lo <= x <= hi:
            raise ValidationError(f"x={x} outside support [{lo}, {hi}]")
        k = int(np.searchsorted(self.boundaries, x, side="right")) - 1
        return min(k, self.n_bins - 1)

    def padded_means(self) -> np.ndarray:
        """Means extended with the range limits: r_0 = y_min, r_{K+1} = y_max."""
        return np.concatenate(([self.range.y_min], self.means, [self.range.y_max]))

    def is_boundary(self, x: float) -> bool:
        lo, hi = self.support
        tol = BOUNDARY_RTOL * (hi - lo)
        return any(abs(x - b) <= tol for b in self.boundaries)


def flip_sample(sample: BinnedSample) -> BinnedSample:
    """Negate outcomes so a decreasing sample becomes increasing (and back).

    An involution: flip(flip(s)) == s bit for bit.
    """
    swap = {"increasing": "decreasing", "decreasing": "increasing", "none": "none"}
    return BinnedSample(
        boundaries=sample.boundaries,
        means=tuple(-m for m in sample.means),
        direction=swap[sample.direction],
        range=sample.range.flipped(),
    )


@dataclass(frozen=True)
class DistributionSpec:
    """Known distribution of the latent conditioning variable.

    kind "uniform" needs only the support. kind "gridded" carries an ordered
    CDF table interpolated piecewise-linearly (piecewise-constant density)
    with F(support[0]) = 0 and F(support[1]) = 1.
    """

    kind: str
    support: tuple[float, float]
    cdf_grid: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "gridded"):
            raise ValidationError(f"unknown distribution kind {self.kind!r}")
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"bad support [{lo}, {hi}]")
        object.__setattr__(self, "support", (float(lo), float(hi)))
        if self.kind == "uniform":
            if self.cdf_grid is not None:
                raise ValidationError("uniform distribution takes no cdf_grid")
            return
        if not self.cdf_grid or len(self.cdf_grid) < 2:
            raise ValidationError("gridded distribution needs >= 2 cdf points")
        grid = tuple((float(x), float(f)) for x, f in self.cdf_grid)
        object.__setattr__(self, "cdf_grid", grid)
        xs = [x for x, _ in grid]
        fs = [f for _, f in grid]
        if any(b > a for a, b in zip(xs[1:], xs)) or any(
            b > a for a, b in zip(fs[1:], fs)
        ):
            raise ValidationError("cdf_grid must be weakly increasing in x and F")
        if len(set(xs)) != len(xs):
            raise ValidationError("cdf_grid has duplicate x values")
        tol = 1e-9
        if abs(xs[0] - lo) > tol * (hi - lo) or abs(xs[-1] - hi) > tol * (hi - lo):
            raise ValidationError("cdf_grid must span exactly the support")
        if abs(fs[0]) > tol or abs(fs[-1] - 1.0) > tol:
            raise ValidationError("cdf_grid must run from F=0 to F=1")

    def cdf(self, x) -> np.ndarray | float:
        lo, hi = self.support
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < lo - 1e-12 * (hi - lo)) or np.any(
            x_arr > hi + 1e-12 * (hi - lo)
        ):
            raise ValidationError(f"query outside support [{lo}, {hi}]")
        x_arr = np.clip(x_arr, lo, hi)
        if self.kind == "uniform":
            out = (x_arr - lo) / (hi - lo)
        else:
            xs = np.array([p[0] for p in self.cdf_grid])
            fs = np.array([p[1] for p in self.cdf_grid])
            out = np.interp(x_arr, xs, fs)
        return out if out.ndim else float(out)

    def mass(self, lo: float, hi: float) -> float:
        """Probability mass on [lo, hi]; F(hi) - F(lo)."""
        if hi < lo:
            raise ValidationError(f"empty interval with hi < lo: [{lo}, {hi}]")
        return float(self.cdf(hi)) - float(self.cdf(lo))

    def mean_on(self, lo: float, hi: float) -> float:
        """Conditional mean of x on [lo, hi] (mass centroid)."""
        m = self.mass(lo, hi)
        if m <= 0:
            raise ValidationError(f"interval [{lo}, {hi}] carries no mass")
        if self.kind == "uniform":
            return 0.5 * (lo + hi)
        # piecewise-constant density: integrate x f(x) segment by segment
        xs = np.array([p[0] for p in self.cdf_grid])
        knots = np.unique(np.concatenate(([lo, hi], xs[(xs > lo) & (xs < hi)])))
        total = 0.0
        for a, b in zip(knots, knots[1:]):
            total += self.mass(a, b) * 0.5 * (a + b)
        return total / m


def uniform_dist(lo: float, hi: float) -> DistributionSpec:
    return DistributionSpec(kind="uniform", support=(lo, hi))


def bin_mass(dist: DistributionSpec, lo: float, hi: float) -> float:
    """Mass the known distribution places on [lo, hi]."""
    s_lo, s_hi = dist.support
    if lo < s_lo - 1e-12 * (s_hi - s_lo) or hi > s_hi + 1e-12 * (s_hi - s_lo):
        raise ValidationError(
            f"interval [{lo}, {hi}] outside support [{s_lo}, {s_hi}]"
        )
    return dist.mass(lo, hi)


@dataclass(frozen=True)
class CEFEnvelope:
    """Pointwise lower/upper bounds on E(y|x) over a grid."""

    grid: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    provenance: str
    constraint_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if not (len(self.grid) == len(self.lower) == len(self.upper)):
            raise ValidationError("grid/lower/upper length mismatch")
        if self.provenance not in ("analytic", "numeric", "csv"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        for lo, hi in zip(self.lower, self.upper):
            if lo > hi + 1e-9 * max(1.0, abs(hi)):
                raise ValidationError(f"envelope crossing: lower {lo} > upper {hi}")

    def width(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)


@dataclass(frozen=True)
class GridCEF:
    """Candidate CEF discretized to N equal-width partitions."""

    values: tuple[float, ...]
    grid_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) < 1:
            raise ValidationError("empty grid CEF")
        if not self.grid_spacing > 0:
            raise ValidationError("grid spacing must be positive")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class StatisticSpec:
    """A statistic that is a linear functional of the discretized CEF."""

    kind: str
    x: float | None = None
    a: float | None = None
    b: float | None = None

    KINDS = ("point", "interval_mean", "best_linear_slope", "best_linear_value")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown statistic kind {self.kind!r}")
        if self.kind in ("point", "best_linear_value"):
            if self.x is None:
                raise ValidationError(f"{self.kind} statistic needs x")
        if self.kind == "interval_mean":
            if self.a is None or self.b is None:
                raise ValidationError("interval_mean needs a and b")
            if not self.a < self.b:
                raise ValidationError(f"interval_mean needs a < b, got [{self.a}, {self.b}]")

    @classmethod
    def point(cls, x: float) -> "StatisticSpec":
        return cls(kind="point", x=float(x))

    @classmethod
    def interval_mean(cls, a: float, b: float) -> "StatisticSpec":
        return cls(kind="interval_mean", a=float(a), b=float(b))

    @classmethod
    def slope(cls) -> "StatisticSpec":
        return cls(kind="best_linear_slope")

    @classmethod
    def line_value(cls, x: float) -> "StatisticSpec":
        return cls(kind="best_linear_value", x=float(x))

    def check_support(self, support: tuple[float, float]) -> None:
        lo, hi = support
        tol = 1e-9 * (hi - lo)
        for name, v in (("x", self.x), ("a", self.a), ("b", self.b)):
            if v is not None and not (lo - tol <= v <= hi + tol):
                raise ValidationError(
                    f"statistic {name}={v} outside support [{lo}, {hi}]"
                )

    def describe(self) -> str:
        if self.kind == "point":
            return f"point:{self.x:g}"
        if self.kind == "interval_mean":
            return f"mu:{self.a:g},{self.b:g}"
        if self.kind == "best_linear_value":
            return f"line:{self.x:g}"
        return "slope"

    def flipped_bounds(self, lower: float, upper: float) -> tuple[float, float]:
        """Map bounds computed on negated outcomes back to the original scale."""
        return -upper, -lower


def normalize_direction(
    sample: BinnedSample, require_direction: bool = False
) -> tuple[BinnedSample, bool]:
    """Check declared ordering and flip decreasing samples to increasing.

    Returns (sample, flipped). With require_direction, direction='none' is
    rejected (for code paths that rely on monotonicity).
    """
    if sample.direction == "none":
        if require_direction:
            raise ValidationError(
                "this operation requires a declared monotone direction; "
                "use the numeric engine for curvature-only analyses"
            )
        return sample, False
    ordered = sample.means
    if sample.direction == "decreasing":
        ordered = tuple(-m for m in sample.means)
    if any(a > b for a, b in zip(ordered, ordered[1:])):
        raise ValidationError(
            f"bin means {sample.means} violate declared direction "
            f"{sample.direction!r}; declare direction='none' for a "
            "curvature-only analysis"
        )
    if sample.direction == "decreasing":
        return flip_sample(sample), True
    return sample, False


class ValidatedInputs(NamedTuple):
    """Result of validate(): sample normalized to weakly increasing means."""

    sample: BinnedSample
    dist: DistributionSpec
    flipped: bool


def validate(sample: BinnedSample, dist: DistributionSpec) -> ValidatedInputs:
    """Cross-validate a sample against its distribution and normalize direction.

    Decreasing samples are flipped (outcomes negated) so downstream bound
    math can assume a weakly increasing CEF; callers flip results back using
    the returned flag.

    Raises ValidationError for support mismatches, zero-mass bins, means
    outside the outcome range, or means that violate the declared direction.
    Declared-direction violations are a hard error; pass direction="none" to
    run curvature-only analyses on unordered means.
    """
    lo, hi = sample.support
    d_lo, d_hi = dist.support
    span = hi - lo
    if abs(d_lo - lo) > 1e-9 * span or abs(d_hi - hi) > 1e-9 * span:
        raise ValidationError(
            f"distribution support [{d_lo}, {d_hi}] does not match "
            f"sample support [{lo}, {hi}]"
        )
    for i, (b_lo, b_hi) in enumerate(zip(sample.boundaries, sample.boundaries[1:])):
        if dist.mass(b_lo, b_hi) <= 0:
            raise ValidationError(f"bin {i + 1} [{b_lo}, {b_hi}] carries zero mass")
    for i, m in enumerate(sample.means):
        if not sample.range.contains(m):
            raise ValidationError(
                f"bin {i + 1} mean {m} outside outcome range "
                f"[{sample.range.y_min}, {sample.range.y_max}]"
            )
    if sample.direction == "increasing":
        ordered = all(a <= b for a, b in zip(sample.means, sample.means[1:]))
    elif sample.direction == "decreasing":
        ordered = all(a >= b for a, b in zip(sample.means, sample.means[1:]))
    else:
        ordered = True
    if not ordered:
        raise ValidationError(
            f"bin means {sample.means} violate declared direction "
            f"{sample.direction!r}; declare direction='none' for a "
            "curvature-only analysis"
        )
    if sample.direction == "decreasing":
        return ValidatedInputs(flip_sample(sample), dist, True)
    return ValidatedInputs(sample, dist, False)
