"""Bounds when the outcome is interval-censored too.

A transition matrix gives joint mass over parent bins × child bins. Within
each child bin the exact child ranks are unknown, so we bracket the
conditional mean of child rank given parent bin between two scenarios:

* high mobility — child ranks uniform within their bin, independent of the
  parent bin, so every parent group sees the bin's mass midpoint;
* low mobility — within each child bin the parent groups are perfectly
  sorted, children of lower parent bins stacked into the lower contiguous
  rank sub-interval.

Each scenario yields a vector of conditional means; running the numeric
engine on both and taking the union of the statistic bounds brackets the
statistic under any within-bin arrangement between the extremes.

The joint optimization over all child-rank placements at once is not
attempted here; only the two-scenario sweep is implemented.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    BinnedSample,
    CefBoundsWarning,
    DistributionSpec,
    OutcomeRange,
    StatisticSpec,
    ValidationError,
    uniform_dist,
)
from .numeric import ConstraintSet, StatBounds, discretize, stage1_min_mse, stage2_bound_stat

_TOL = 1e-9

LOW_MOBILITY = "low_mobility"
HIGH_MOBILITY = "high_mobility"


@dataclass(frozen=True)
class TransitionMatrix:
    """Joint parent-bin × child-bin probability mass.

    Row sums must equal the parent bin masses implied by the parent
    boundaries (uniform ranks), column sums the child bin masses, and the
    total must be 1 — otherwise the matrix cannot describe one population.
    """

    parent_boundaries: tuple[float, ...]
    child_boundaries: tuple[float, ...]
    mass: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        pb = np.asarray(self.parent_boundaries, dtype=float)
        cb = np.asarray(self.child_boundaries, dtype=float)
        if len(pb) < 2 or np.any(np.diff(pb) <= 0):
            raise ValidationError("parent boundaries must be increasing, length >= 2")
        if len(cb) < 2 or np.any(np.diff(cb) <= 0):
            raise ValidationError("child boundaries must be increasing, length >= 2")
        try:
            m = np.asarray(self.mass, dtype=float)
        except ValueError as exc:
            raise ValidationError(f"mass rows have unequal lengths: {exc}") from exc
        if m.ndim != 2 or m.shape != (len(pb) - 1, len(cb) - 1):
            raise ValidationError(
                f"mass must be {len(pb) - 1}x{len(cb) - 1}, got {m.shape}"
            )
        if np.any(m < 0):
            raise ValidationError("mass entries must be nonnegative")
        total = float(m.sum())
        if abs(total - 1.0) > _TOL:
            raise ValidationError(f"total mass {total!r} != 1")
        row_target = np.diff(pb) / (pb[-1] - pb[0])
        col_target = np.diff(cb) / (cb[-1] - cb[0])
        rows = m.sum(axis=1)
        cols = m.sum(axis=0)
        if np.any(np.abs(rows - row_target) > _TOL):
            raise ValidationError(
                "row sums do not match parent bin masses: "
                f"got {rows.tolist()}, expected {row_target.tolist()}"
            )
        if np.any(np.abs(cols - col_target) > _TOL):
            raise ValidationError(
                "column sums do not match child bin masses: "
                f"got {cols.tolist()}, expected {col_target.tolist()}"
            )

    @property
    def n_parent(self) -> int:
        return len(self.parent_boundaries) - 1

    @property
    def n_child(self) -> int:
        return len(self.child_boundaries) - 1

    def mass_array(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=float)

    @property
    def parent_masses(self) -> np.ndarray:
        return self.mass_array().sum(axis=1)

    @property
    def child_masses(self) -> np.ndarray:
        return self.mass_array().sum(axis=0)

    @property
    def child_midpoints(self) -> np.ndarray:
        cb = np.asarray(self.child_boundaries)
        return 0.5 * (cb[:-1] + cb[1:])

    @property
    def population_mean(self) -> float:
        """Mean child rank: mass-weighted child-bin midpoints."""
        return float(self.child_masses @ self.child_midpoints)

    def dominance_violations(self, tol: float = _TOL) -> tuple[tuple[int, int, float], ...]:
        """Report parent rows whose child-bin CDF fails to dominate the
        previous row's: tuples (parent_bin, child_boundary_index, gap) where
        gap > 0 means bin k+1's CDF exceeds bin k's at that boundary.
        Violations are reported, never repaired.
        """
        m = self.mass_array()
        cond = m / m.sum(axis=1, keepdims=True)
        cdf = np.cumsum(cond, axis=1)
        out = []
        for k in range(self.n_parent - 1):
            gaps = cdf[k + 1] - cdf[k]
            for j in np.flatnonzero(gaps > tol):
                out.append((k, int(j) + 1, float(gaps[j])))
        return tuple(out)


@dataclass(frozen=True)
class ScenarioMeans:
    scenario: str
    means: tuple[float, ...]


def stacking_subintervals(tm: TransitionMatrix) -> tuple[tuple[tuple[float, float], ...], ...]:
    """Low-mobility rank sub-intervals: for each child bin, the contiguous
    slice each parent group occupies when sorted ascending by parent bin.
    Indexed [child bin][parent bin] -> (lo, hi)."""
    m = tm.mass_array()
    cb = tm.child_boundaries
    out = []
    for h in range(tm.n_child):
        lo, hi = cb[h], cb[h + 1]
        width = hi - lo
        col = m[:, h]
        col_mass = col.sum()
        if col_mass <= 0:
            out.append(tuple((lo, lo) for _ in range(tm.n_parent)))
            continue
        cum = np.concatenate([[0.0], np.cumsum(col / col_mass)])
        out.append(
            tuple(
                (float(lo + width * cum[k]), float(lo + width * cum[k + 1]))
                for k in range(tm.n_parent)
            )
        )
    return tuple(out)


def scenario_means(tm: TransitionMatrix, scenario: str) -> ScenarioMeans:
    """Expected child rank per parent bin under one placement scenario.

    High mobility places every child at its bin's midpoint; low mobility
    stacks parent groups within each child bin in ascending parent order and
    uses the midpoint of each group's sub-interval.
    """
    m = tm.mass_array()
    row_mass = m.sum(axis=1)
    if scenario == HIGH_MOBILITY:
        contrib = np.broadcast_to(tm.child_midpoints, m.shape)
    elif scenario == LOW_MOBILITY:
        subs = stacking_subintervals(tm)
        contrib = np.array(
            [[0.5 * (subs[h][k][0] + subs[h][k][1]) for h in range(tm.n_child)]
             for k in range(tm.n_parent)]
        )
    else:
        raise ValidationError(
            f"scenario must be {LOW_MOBILITY!r} or {HIGH_MOBILITY!r}, got {scenario!r}"
        )
    means = (m * contrib).sum(axis=1) / row_mass
    return ScenarioMeans(scenario=scenario, means=tuple(float(v) for v in means))


@dataclass(frozen=True)
class DoubleCensorBounds:
    """Union of the two scenarios' statistic bounds, with attribution."""

    spec: StatisticSpec
    lower: float
    upper: float
    lower_scenario: str
    upper_scenario: str
    per_scenario: dict[str, StatBounds]
    means: dict[str, ScenarioMeans]


def double_censored_stat_bounds(
    tm: TransitionMatrix,
    spec: StatisticSpec,
    constraints: ConstraintSet | None = None,
    dist: DistributionSpec | None = None,
    n_grid: int = 100,
) -> DoubleCensorBounds:
    """Bracket a statistic of the parent-to-child CEF when both variables
    are binned: solve the numeric two-stage problem under each mobility
    scenario and take the union of the resulting bounds."""
    violations = tm.dominance_violations()
    if violations:
        rows = sorted({k for k, _, _ in violations})
        warnings.warn(
            f"child-bin distributions for parent bins {rows} are not "
            "stochastically ordered; scenario bounds may not bracket a "
            "monotone arrangement",
            CefBoundsWarning,
            stacklevel=2,
        )
    rng = OutcomeRange(float(tm.child_boundaries[0]), float(tm.child_boundaries[-1]))
    if constraints is None:
        constraints = ConstraintSet(monotone=True, curvature_limit=math.inf, range=rng)
    if dist is None:
        dist = uniform_dist(tm.parent_boundaries[0], tm.parent_boundaries[-1])

    # dominance violations can produce non-monotone scenario means; keep the
    # monotone shape constraint but drop the declared-direction check so the
    # misfit lands in stage-1 MSE instead of a hard rejection
    direction = "none" if violations else "increasing"

    per_scenario: dict[str, StatBounds] = {}
    means: dict[str, ScenarioMeans] = {}
    for scenario in (LOW_MOBILITY, HIGH_MOBILITY):
        sm = scenario_means(tm, scenario)
        means[scenario] = sm
        sample = BinnedSample(
            boundaries=tuple(float(b) for b in tm.parent_boundaries),
            means=sm.means,
            direction=direction,
            range=rng,
        )
        grid = discretize(sample, dist, n_grid)
        stage1 = stage1_min_mse(grid, sample, constraints)
        per_scenario[scenario] = stage2_bound_stat(grid, sample, constraints, spec, stage1)

    lower_scenario = min(per_scenario, key=lambda s: per_scenario[s].lower)
    upper_scenario = max(per_scenario, key=lambda s: per_scenario[s].upper)
    return DoubleCensorBounds(
        spec=spec,
        lower=per_scenario[lower_scenario].lower,
        upper=per_scenario[upper_scenario].upper,
        lower_scenario=lower_scenario,
        upper_scenario=upper_scenario,
        per_scenario=per_scenario,
        means=means,
    )
