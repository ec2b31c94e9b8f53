"""Bootstrap confidence sets for bound endpoints.

Replicates resample the data (per-bin normal approximation for count
summaries, pooled iid resampling for microdata rows), rerun the two-stage
numeric pipeline, and the confidence set takes outward quantiles of the
replicate endpoint distributions. RNG is numpy's PCG64 seeded through
``SeedSequence(seed).spawn(B)`` — one substream per replicate, so results
are bit-identical across runs and machines for a fixed seed, and replicate
order cannot leak between streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BinnedSample,
    DistributionSpec,
    InfeasibleError,
    OutcomeRange,
    StatisticSpec,
    ValidationError,
    uniform_dist,
    validate,
)
from .numeric import ConstraintSet, StatBounds, discretize, stage1_min_mse, stage2_bound_stat

_MAX_REDRAWS = 10
_ABORT_RATE = 0.01


def _check_boundaries(boundaries):
    b = np.asarray(boundaries, dtype=float)
    if len(b) < 2 or np.any(np.diff(b) <= 0):
        raise ValidationError("bin boundaries must be strictly increasing, length >= 2")
    return tuple(float(v) for v in b)


@dataclass(frozen=True)
class CountsSample:
    """Per-bin summary data: mean, sd of the outcome, and cell count."""

    boundaries: tuple[float, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", _check_boundaries(self.boundaries))
        k = len(self.boundaries) - 1
        for name in ("means", "sds", "counts"):
            if len(getattr(self, name)) != k:
                raise ValidationError(f"{name} must have {k} entries")
        if any(n < 1 for n in self.counts):
            raise ValidationError("every bin needs count >= 1")
        if any(s < 0 for s in self.sds):
            raise ValidationError("bin sds must be nonnegative")

    @property
    def n_bins(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class MicroSample:
    """Row-level data: each outcome tagged with its x-bin index."""

    boundaries: tuple[float, ...]
    bin_index: tuple[int, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", _check_boundaries(self.boundaries))
        if len(self.bin_index) != len(self.y) or not self.y:
            raise ValidationError("bin_index and y must be equal-length, nonempty")
        k = len(self.boundaries) - 1
        present = set(self.bin_index)
        if any(i < 0 or i >= k for i in present):
            raise ValidationError("bin_index out of range")
        missing = sorted(set(range(k)) - present)
        if missing:
            raise ValidationError(f"bins {missing} have no rows")

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) - 1

    def bin_means(self) -> tuple[float, ...]:
        idx = np.asarray(self.bin_index)
        ys = np.asarray(self.y, dtype=float)
        return tuple(
            float(ys[idx == k].mean()) for k in range(self.n_bins)
        )


@dataclass(frozen=True)
class ConfidenceSet:
    """Outward-quantile bootstrap confidence set for a bound interval.

    ``q_lower``/``q_upper`` are the raw replicate quantiles; ``lower`` and
    ``upper`` additionally take the union with the full-sample interval, so
    the set always contains the point bounds. Replicate endpoint arrays are
    archived (NaN marks replicates that stayed infeasible after redraws) so
    the quantiles can be recomputed offline.
    """

    alpha: float
    lower: float
    upper: float
    q_lower: float
    q_upper: float
    point: StatBounds
    replicate_lowers: tuple[float, ...] = field(repr=False)
    replicate_uppers: tuple[float, ...] = field(repr=False)
    n_failed: int
    n_redraws: int
    B: int
    seed: int


def _resample_means(data, rng):
    if isinstance(data, CountsSample):
        z = rng.standard_normal(data.n_bins)
        se = np.asarray(data.sds) / np.sqrt(np.asarray(data.counts, dtype=float))
        return tuple(float(v) for v in np.asarray(data.means) + se * z)
    ys = np.asarray(data.y, dtype=float)
    idx = np.asarray(data.bin_index)
    pick = rng.integers(0, len(ys), size=len(ys))
    ys_b, idx_b = ys[pick], idx[pick]
    means = []
    for k in range(data.n_bins):
        sel = idx_b == k
        if not np.any(sel):
            raise ValidationError(f"resample left bin {k} empty")
        means.append(float(ys_b[sel].mean()))
    return tuple(means)


def _point_means(data):
    if isinstance(data, CountsSample):
        return data.means
    return data.bin_means()


def bootstrap_bounds(
    data: CountsSample | MicroSample,
    spec: StatisticSpec,
    constraints: ConstraintSet,
    outcome_range: OutcomeRange,
    dist: DistributionSpec | None = None,
    direction: str = "increasing",
    B: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
    n_grid: int = 100,
) -> ConfidenceSet:
    """Bootstrap confidence set for the identified interval of a statistic.

    Each replicate redraws bin means, rebuilds the binned sample, and reruns
    the two-stage numeric solve. Replicates whose resampled means violate
    validation (out of range, wrong ordering under a strict direction) or
    leave a bin empty are redrawn up to 10 times from the same substream;
    replicates still failing count toward an abort threshold of 1% of B.
    """
    if B < 100:
        raise ValidationError(f"B must be >= 100, got {B}")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    if dist is None:
        dist = uniform_dist(data.boundaries[0], data.boundaries[-1])

    def solve(means):
        sample = BinnedSample(
            boundaries=data.boundaries,
            means=means,
            direction=direction,
            range=outcome_range,
        )
        validate(sample, dist)  # out-of-range or misordered means -> redraw
        grid = discretize(sample, dist, n_grid)
        stage1 = stage1_min_mse(grid, sample, constraints)
        return stage2_bound_stat(grid, sample, constraints, spec, stage1)

    point = solve(_point_means(data))

    lowers = np.full(B, math.nan)
    uppers = np.full(B, math.nan)
    n_failed = 0
    n_redraws = 0
    failures: list[str] = []
    for b, seq in enumerate(np.random.SeedSequence(seed).spawn(B)):
        rng = np.random.Generator(np.random.PCG64(seq))
        last_err = None
        for attempt in range(1 + _MAX_REDRAWS):
            if attempt:
                n_redraws += 1
            try:
                result = solve(_resample_means(data, rng))
            except (ValidationError, InfeasibleError) as err:
                last_err = err
                continue
            lowers[b], uppers[b] = result.lower, result.upper
            break
        else:
            n_failed += 1
            if len(failures) < 5:
                failures.append(f"replicate {b}: {last_err}")

    if n_failed > _ABORT_RATE * B:
        raise InfeasibleError(
            f"{n_failed}/{B} bootstrap replicates infeasible after "
            f"{_MAX_REDRAWS} redraws each (threshold {_ABORT_RATE:.0%}); "
            "first failures: " + "; ".join(failures)
        )

    ok_l = lowers[~np.isnan(lowers)]
    ok_u = uppers[~np.isnan(uppers)]
    q_lower = float(np.quantile(ok_l, alpha / 2, method="lower"))
    q_upper = float(np.quantile(ok_u, 1 - alpha / 2, method="higher"))
    return ConfidenceSet(
        alpha=alpha,
        lower=min(q_lower, point.lower),
        upper=max(q_upper, point.upper),
        q_lower=q_lower,
        q_upper=q_upper,
        point=point,
        replicate_lowers=tuple(float(v) for v in lowers),
        replicate_uppers=tuple(float(v) for v in uppers),
        n_failed=n_failed,
        n_redraws=n_redraws,
        B=B,
        seed=seed,
    )
