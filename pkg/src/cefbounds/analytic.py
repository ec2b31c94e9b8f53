"""Closed-form sharp bounds on the CEF and on interval means.

Everything here assumes a weakly increasing CEF; decreasing samples are
normalized on entry and results are flipped back before returning. Bins are
numbered 1..K in all public signatures, matching the bin-mean labels
r_1..r_K; r_0 and r_{K+1} denote the outcome-range limits.

Within bin k the bounds follow a two-regime structure split at the
crossover point x_k*: below it the lower bound sits at r_{k-1} while the
upper bound rises; at and above it the upper bound sits at r_{k+1} while
the lower bound rises. Both regimes agree at x_k*, so the envelope is
continuous.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    BinnedSample,
    CEFEnvelope,
    ClampWarning,
    DistributionSpec,
    OutcomeRange,
    ValidationError,
    normalize_direction,
    validate,
)

#: Relative tolerance on r_{k+1} - r_{k-1} below which bin-k bounds collapse
#: to the bin mean (monotonicity then forces a constant CEF on the bin).
TIE_RTOL = 1e-10

_BISECT_MAX_ITER = 80
_BISECT_WIDTH_RTOL = 1e-12


@dataclass(frozen=True)
class CrossoverTable:
    """Per-bin regime-switch points x_1*..x_K*; NaN marks a degenerate bin."""

    values: tuple[float, ...]

    def for_bin(self, k: int) -> float:
        """Crossover for 1-based bin index k."""
        if not 1 <= k <= len(self.values):
            raise ValidationError(f"bin index {k} out of range 1..{len(self.values)}")
        return self.values[k - 1]


@dataclass(frozen=True)
class MuBounds:
    """Sharp bounds on the interval mean of the CEF over [a, b]."""

    a: float
    b: float
    lower: float
    upper: float
    point_identified: bool

    def __post_init__(self):
        if self.lower > self.upper + 1e-9 * max(1.0, abs(self.upper)):
            raise ValidationError(
                f"interval-mean bounds crossed: {self.lower} > {self.upper}"
            )


@dataclass(frozen=True)
class StepCEF:
    """Piecewise-constant CEF: values[i] on [breaks[i], breaks[i+1]).

    point_x/point_value optionally override the value at one x; the bound
    witnesses use this to attain an endpoint at a single (measure-zero)
    point without disturbing any bin mean.
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]
    point_x: float | None = None
    point_value: float | None = None

    def __post_init__(self):
        if len(self.values) != len(self.breaks) - 1:
            raise ValidationError("step function needs one value per piece")
        if any(b > a for a, b in zip(self.breaks[1:], self.breaks)):
            raise ValidationError("step breaks must be nondecreasing")

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        idx = np.clip(
            np.searchsorted(self.breaks, xs, side="right") - 1,
            0,
            len(self.values) - 1,
        )
        out = np.asarray(self.values, dtype=float)[idx]
        if self.point_x is not None:
            out = np.where(xs == self.point_x, self.point_value, out)
        return out if out.ndim else float(out)

    def bin_means(self, dist: DistributionSpec, boundaries) -> np.ndarray:
        """Exact mass-weighted mean of the step function over each bin."""
        means = []
        for lo, hi in zip(boundaries, boundaries[1:]):
            total = 0.0
            mass = 0.0
            for i, v in enumerate(self.values):
                seg_lo = max(self.breaks[i], lo)
                seg_hi = min(self.breaks[i + 1], hi)
                if seg_hi <= seg_lo:
                    continue
                m = dist.mass(seg_lo, seg_hi)
                total += v * m
                mass += m
            if mass <= 0:
                raise ValidationError(f"bin [{lo}, {hi}] carries no mass")
            means.append(total / mass)
        return np.asarray(means)

    def negated(self) -> "StepCEF":
        return StepCEF(
            breaks=self.breaks,
            values=tuple(-v for v in self.values),
            point_x=self.point_x,
            point_value=None if self.point_value is None else -self.point_value,
        )


def _validated_monotone(sample: BinnedSample, dist: DistributionSpec):
    """validate(), additionally rejecting direction='none' (these bounds
    lean on monotonicity; curvature-only analyses belong to the numeric
    engine)."""
    if sample.direction == "none":
        raise ValidationError(
            "analytic bounds require a declared monotone direction; "
            "use the numeric engine for curvature-only analyses"
        )
    return validate(sample, dist)


def manski_tamer(sample: BinnedSample, x: float) -> tuple[float, float]:
    """Distribution-free bounds: (r_{k-1}, r_{k+1}) for x in bin k."""
    norm, flipped = normalize_direction(sample, require_direction=True)
    k0 = norm.bin_of(x)
    pad = norm.padded_means()
    lo, hi = pad[k0], pad[k0 + 2]
    if flipped:
        lo, hi = -hi, -lo
    return float(lo), float(hi)


def _bin_cdf(dist: DistributionSpec, b_lo: float, b_hi: float, x: float) -> tuple[float, float]:
    """(mass below x, mass above x) within bin [b_lo, b_hi], clipped at 0."""
    below = max(dist.mass(b_lo, min(max(x, b_lo), b_hi)), 0.0)
    above = max(dist.mass(min(max(x, b_lo), b_hi), b_hi), 0.0)
    return below, above


def _crossover_in_bin(norm: BinnedSample, dist: DistributionSpec, k0: int) -> float:
    """Regime-switch point for 0-based bin k0 of a normalized sample.

    Solves F_k(x*) = (r_{k+1} - r_k) / (r_{k+1} - r_{k-1}) where F_k is the
    within-bin conditional CDF; closed form under a uniform distribution,
    bisection otherwise. Returns NaN when r_{k+1} and r_{k-1} tie.
    """
    pad = norm.padded_means()
    r_lo, r_mid, r_hi = pad[k0], pad[k0 + 1], pad[k0 + 2]
    if abs(r_hi - r_lo) < TIE_RTOL * norm.range.span:
        return math.nan
    b_lo, b_hi = norm.boundaries[k0], norm.boundaries[k0 + 1]
    if dist.kind == "uniform":
        xstar = ((b_hi * r_hi) - (b_hi - b_lo) * r_mid - b_lo * r_lo) / (r_hi - r_lo)
        return float(min(max(xstar, b_lo), b_hi))

    target = (r_hi - r_mid) / (r_hi - r_lo)
    bin_mass = dist.mass(b_lo, b_hi)
    lo, hi = b_lo, b_hi
    support_width = dist.support[1] - dist.support[0]
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo < _BISECT_WIDTH_RTOL * support_width:
            break
        mid = 0.5 * (lo + hi)
        if dist.mass(b_lo, mid) / bin_mass < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossover(sample: BinnedSample, dist: DistributionSpec, k: int) -> float:
    """Crossover point x_k* for 1-based bin k; NaN for a degenerate bin."""
    norm, dist, _ = _validated_monotone(sample, dist)
    if not 1 <= k <= norm.n_bins:
        raise ValidationError(f"bin index {k} out of range 1..{norm.n_bins}")
    return _crossover_in_bin(norm, dist, k - 1)


def crossover_table(sample: BinnedSample, dist: DistributionSpec) -> CrossoverTable:
    norm, dist, _ = _validated_monotone(sample, dist)
    return CrossoverTable(
        values=tuple(_crossover_in_bin(norm, dist, k0) for k0 in range(norm.n_bins))
    )


def _bounds_in_bin(
    norm: BinnedSample, dist: DistributionSpec, k0: int, x: float
) -> tuple[float, float]:
    """Sharp (lower, upper) at x for a normalized sample; 0-based bin k0."""
    pad = norm.padded_means()
    r_lo, r_mid, r_hi = pad[k0], pad[k0 + 1], pad[k0 + 2]
    if abs(r_hi - r_lo) < TIE_RTOL * norm.range.span:
        return r_mid, r_mid
    b_lo, b_hi = norm.boundaries[k0], norm.boundaries[k0 + 1]
    below, above = _bin_cdf(dist, b_lo, b_hi, x)
    total = below + above
    if below <= 0.0:
        # no bin mass at or below x: the CEF may sit at r_{k-1} on the
        # zero-mass stretch, and can reach at most the bin mean.
        return r_lo, r_mid
    if above <= 0.0:
        return r_mid, r_hi
    frac = below / total
    xstar = _crossover_in_bin(norm, dist, k0)
    if x < xstar:
        return r_lo, (r_mid - r_lo * frac) / (1.0 - frac)
    return (r_mid - r_hi * (1.0 - frac)) / frac, r_hi


def _clamped(lower: float, upper: float, rng: OutcomeRange) -> tuple[float, float]:
    if lower < rng.y_min - 1e-12 * rng.span or upper > rng.y_max + 1e-12 * rng.span:
        warnings.warn(
            f"bound ({lower}, {upper}) clamped to outcome range "
            f"[{rng.y_min}, {rng.y_max}]",
            ClampWarning,
            stacklevel=3,
        )
    return max(lower, rng.y_min), min(upper, rng.y_max)


def cef_bounds_analytic(
    sample: BinnedSample, dist: DistributionSpec, x: float
) -> tuple[float, float]:
    """Sharp bounds on E(y|x) at a single point under a known distribution."""
    norm, dist, flipped = _validated_monotone(sample, dist)
    k0 = norm.bin_of(x)
    lower, upper = _bounds_in_bin(norm, dist, k0, x)
    lower, upper = _clamped(lower, upper, norm.range)
    if flipped:
        lower, upper = -upper, -lower
    return float(lower), float(upper)


def cef_envelope_analytic(sample: BinnedSample, dist: DistributionSpec, grid) -> CEFEnvelope:
    """Pointwise sharp bounds over a grid of conditioning values."""
    norm, dist, flipped = _validated_monotone(sample, dist)
    grid = [float(g) for g in grid]
    lowers = []
    uppers = []
    for x in grid:
        k0 = norm.bin_of(x)
        lo, hi = _clamped(*_bounds_in_bin(norm, dist, k0, x), norm.range)
        lowers.append(lo)
        uppers.append(hi)
    if flipped:
        lowers, uppers = [-u for u in uppers], [-l for l in lowers]
    tag = "monotone-" + sample.direction
    return CEFEnvelope(
        grid=tuple(grid),
        lower=tuple(lowers),
        upper=tuple(uppers),
        provenance="analytic",
        constraint_tag=tag,
    )


def sharpness_witness(
    sample: BinnedSample, dist: DistributionSpec, x: float, side: str
) -> StepCEF:
    """Step CEF attaining the analytic bound at x while matching every bin
    mean: constant r_j on every other bin, and on x's bin the lower-bound
    value before x and the upper-bound value after it."""
    if side not in ("lower", "upper"):
        raise ValidationError(f"side must be 'lower' or 'upper', got {side!r}")
    norm, dist, flipped = _validated_monotone(sample, dist)
    norm_side = side
    if flipped:
        norm_side = "upper" if side == "lower" else "lower"
    k0 = norm.bin_of(x)
    lo_val, hi_val = _bounds_in_bin(norm, dist, k0, x)

    breaks: list[float] = [norm.boundaries[0]]
    values: list[float] = []
    for j, mean in enumerate(norm.means):
        if j == k0:
            # the bin mean is preserved by construction: lo_val carries the
            # mass below x, hi_val the mass above; a bin-edge x leaves a
            # single piece at the bin mean with the bound attained only at
            # the point override.
            if norm.boundaries[k0] < x:
                breaks.append(min(x, norm.boundaries[k0 + 1]))
                values.append(lo_val)
            if x < norm.boundaries[k0 + 1]:
                breaks.append(norm.boundaries[k0 + 1])
                values.append(hi_val)
        else:
            breaks.append(norm.boundaries[j + 1])
            values.append(mean)
    point_value = lo_val if norm_side == "lower" else hi_val
    witness = StepCEF(
        breaks=tuple(breaks),
        values=tuple(values),
        point_x=float(x),
        point_value=float(point_value),
    )
    return witness.negated() if flipped else witness


def mu_bounds(sample: BinnedSample, dist: DistributionSpec, a: float, b: float) -> MuBounds:
    """Sharp bounds on the mass-weighted mean of the CEF over [a, b].

    a and b within 1e-9 of the support width of a bin boundary are snapped
    onto it, so boundary-aligned queries point-identify exactly: full bins
    contribute their observed means and nothing else is left free.
    """
    norm, dist, flipped = _validated_monotone(sample, dist)
    lo_s, hi_s = norm.support
    span = hi_s - lo_s
    if not (lo_s - 1e-9 * span <= a < b <= hi_s + 1e-9 * span):
        raise ValidationError(
            f"need support-contained a < b, got [{a}, {b}] in [{lo_s}, {hi_s}]"
        )

    def snap(v: float) -> tuple[float, bool]:
        nearest = min(norm.boundaries, key=lambda c: abs(c - v))
        if abs(nearest - v) <= 1e-9 * span:
            return nearest, True
        return v, False

    a, a_on = snap(float(a))
    b, b_on = snap(float(b))
    point_identified = a_on and b_on

    h0 = norm.bin_of(a)
    k0 = norm.bin_of(b)
    pad = norm.padded_means()

    if h0 == k0:
        lower = _bounds_in_bin(norm, dist, k0, b)[0]
        upper = _bounds_in_bin(norm, dist, h0, a)[1]
    else:
        mass_head = dist.mass(a, norm.boundaries[h0 + 1])
        mass_tail = dist.mass(norm.boundaries[k0], b)
        mid_num = 0.0
        total = mass_head + mass_tail
        for lam in range(h0 + 1, k0):
            m = dist.mass(norm.boundaries[lam], norm.boundaries[lam + 1])
            mid_num += norm.means[lam] * m
            total += m
        y_max_a = _bounds_in_bin(norm, dist, h0, a)[1]
        y_min_b = _bounds_in_bin(norm, dist, k0, b)[0]
        lower = (norm.means[h0] * mass_head + mid_num + y_min_b * mass_tail) / total
        upper = (y_max_a * mass_head + mid_num + pad[k0 + 1] * mass_tail) / total

    if flipped:
        lower, upper = -upper, -lower
    return MuBounds(
        a=float(a),
        b=float(b),
        lower=float(lower),
        upper=float(upper),
        point_identified=point_identified,
    )
