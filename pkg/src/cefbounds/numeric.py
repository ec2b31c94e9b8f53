"""Two-stage optimization bounds over a discretized CEF.

The CEF is represented by gamma, the vector of its mean values on N
equal-width partitions of the support. Stage 1 minimizes the bin-weighted
MSE against the observed bin means subject to the shape constraints; stage
2 extremizes a linear statistic functional over the same constraint set
intersected with the stage-1 MSE level set.

When the minimal MSE is numerically zero the MSE level set is replaced by
per-bin equality bands, turning stage 2 into a pair of LPs. Otherwise the
MSE is kept as a quadratic inequality (with a hair of relative slack) and
each side is located by bisection on the statistic level, one feasibility
QP per probe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    BinnedSample,
    CEFEnvelope,
    DistributionSpec,
    GridCEF,
    OutcomeRange,
    SnapWarning,
    StatisticSpec,
    TrivialConstraintWarning,
    ValidationError,
    normalize_direction,
    validate,
)
from .solvers import solve_lp, solve_weighted_lsq_qp

#: Stage-1 MSE at or below this is treated as exactly zero.
EPS_MSE = 1e-12
#: Half-width of the per-bin equality bands in the LP reformulation.
EPS_BIN = 1e-9
#: Relative slack on the MSE cap in the nonzero-MSE stage 2.
MSE_REL_SLACK = 1e-9
#: Feasibility-probe budget per bound in the bisection stage 2.
BISECT_PROBES = 60


@dataclass(frozen=True)
class ConstraintSet:
    """Shape constraints on the candidate CEF.

    curvature_limit is expressed per (conditioning unit)^2; the discrete
    form is |gamma_{i+1} - 2 gamma_i + gamma_{i-1}| <= curvature_limit *
    delta^2. math.inf disables it.
    """

    monotone: bool
    curvature_limit: float
    range: OutcomeRange

    def __post_init__(self):
        cl = float(self.curvature_limit)
        object.__setattr__(self, "curvature_limit", cl)
        if math.isnan(cl) or cl < 0:
            raise ValidationError(f"curvature limit must be >= 0, got {cl}")
        if not self.monotone and math.isinf(cl):
            warnings.warn(
                "no active shape constraint: bounds degenerate to the "
                "outcome range",
                TrivialConstraintWarning,
                stacklevel=2,
            )

    def tag(self) -> str:
        parts = []
        if self.monotone:
            parts.append("monotone")
        if math.isfinite(self.curvature_limit):
            parts.append(f"curvature<={self.curvature_limit:g}")
        return "+".join(parts) if parts else "unconstrained"

    def flipped(self) -> "ConstraintSet":
        return ConstraintSet(
            monotone=self.monotone,
            curvature_limit=self.curvature_limit,
            range=self.range.flipped(),
        )


@dataclass(frozen=True, eq=False)
class Discretization:
    """Equal-width partition of the support with masses and bin membership."""

    edges: np.ndarray
    masses: np.ndarray
    cell_bin: np.ndarray
    bin_edges: np.ndarray
    bin_masses: np.ndarray
    snap_distances: tuple[float, ...]

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def delta(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_bins(self) -> int:
        return self.bin_masses.size

    def cell_of(self, x: float) -> int:
        lo, hi = self.edges[0], self.edges[-1]
        if not lo <= x <= hi:
            raise ValidationError(f"x={x} outside support [{lo}, {hi}]")
        return min(int(np.searchsorted(self.edges, x, side="right")) - 1, self.n - 1)

    def bin_mean_matrix(self) -> np.ndarray:
        """K x N operator mapping gamma to its per-bin mass-weighted means."""
        m = np.zeros((self.n_bins, self.n))
        for k in range(self.n_bins):
            sel = self.cell_bin == k
            m[k, sel] = self.masses[sel] / self.bin_masses[k]
        return m


def discretize(sample: BinnedSample, dist: DistributionSpec, n: int) -> Discretization:
    """Partition the support into n equal cells; snap bin boundaries to the
    nearest cell edge (warning records each nonzero snap distance)."""
    if n < sample.n_bins:
        raise ValidationError(
            f"need at least one partition per bin: n={n} < K={sample.n_bins}"
        )
    lo, hi = sample.support
    edges = np.linspace(lo, hi, n + 1)
    span = hi - lo

    snapped_idx = [0]
    snaps = [0.0]
    for b in sample.boundaries[1:-1]:
        idx = int(round((b - lo) / span * n))
        idx = min(max(idx, 0), n)
        snapped_idx.append(idx)
        snaps.append(abs(edges[idx] - b))
    snapped_idx.append(n)
    snaps.append(0.0)

    for j, (i0, i1) in enumerate(zip(snapped_idx, snapped_idx[1:])):
        if i1 <= i0:
            raise ValidationError(
                f"bin {j + 1} is narrower than one partition at n={n}; "
                "increase the partition count"
            )
    max_snap = max(snaps)
    if max_snap > 1e-12 * span:
        warnings.warn(
            f"bin boundaries snapped to partition edges (max distance "
            f"{max_snap:.6g})",
            SnapWarning,
            stacklevel=2,
        )

    cell_bin = np.zeros(n, dtype=int)
    for k, (i0, i1) in enumerate(zip(snapped_idx, snapped_idx[1:])):
        cell_bin[i0:i1] = k
    masses = np.array([dist.mass(edges[i], edges[i + 1]) for i in range(n)])
    masses = np.maximum(masses, 0.0)
    bin_masses = np.array(
        [masses[cell_bin == k].sum() for k in range(sample.n_bins)]
    )
    if np.any(bin_masses <= 0):
        bad = int(np.flatnonzero(bin_masses <= 0)[0]) + 1
        raise ValidationError(f"bin {bad} carries no mass after discretization")
    return Discretization(
        edges=edges,
        masses=masses,
        cell_bin=cell_bin,
        bin_edges=edges[snapped_idx],
        bin_masses=bin_masses,
        snap_distances=tuple(snaps),
    )


@dataclass(frozen=True)
class StageOneResult:
    """Minimal bin-weighted MSE and one witness attaining it."""

    min_mse: float
    witness: GridCEF


@dataclass(frozen=True)
class StatBounds:
    """Sharp bounds on a statistic with the witnesses attaining them."""

    spec: StatisticSpec
    lower: float
    upper: float
    witnesses: tuple[GridCEF, GridCEF]

    def __post_init__(self):
        if self.lower > self.upper + 1e-9 * max(1.0, abs(self.upper)):
            raise ValidationError(
                f"statistic bounds crossed: {self.lower} > {self.upper}"
            )


def _shape_constraints(n: int, delta: float, cs: ConstraintSet):
    """Rows G, h with G @ gamma <= h for monotonicity and curvature."""
    rows = []
    rhs = []
    if cs.monotone and n >= 2:
        g = np.zeros((n - 1, n))
        idx = np.arange(n - 1)
        g[idx, idx] = 1.0
        g[idx, idx + 1] = -1.0
        rows.append(g)
        rhs.append(np.zeros(n - 1))
    if math.isfinite(cs.curvature_limit) and n >= 3:
        d2 = np.zeros((n - 2, n))
        idx = np.arange(n - 2)
        d2[idx, idx] = 1.0
        d2[idx, idx + 1] = -2.0
        d2[idx, idx + 2] = 1.0
        cap = cs.curvature_limit * delta * delta
        rows.extend([d2, -d2])
        rhs.extend([np.full(n - 2, cap), np.full(n - 2, cap)])
    if not rows:
        return None, None
    return np.vstack(rows), np.concatenate(rhs)


def _normalized_problem(grid, sample, constraints):
    norm, flipped = normalize_direction(sample)
    cs = constraints.flipped() if flipped else constraints
    return norm, cs, flipped


def stage1_min_mse(
    grid: Discretization, sample: BinnedSample, constraints: ConstraintSet
) -> StageOneResult:
    """Minimize the bin-weighted MSE over the shape-constrained polytope.

    With no curvature cap and means consistent with the monotone
    constraint, the per-bin step function matches the data exactly and is
    returned without a solver call (min_mse = 0.0 exactly).
    """
    norm, cs, flipped = _normalized_problem(grid, sample, constraints)
    means = np.asarray(norm.means)
    n = grid.n

    increasing_ok = bool(np.all(np.diff(means) >= 0))
    if math.isinf(cs.curvature_limit) and (not cs.monotone or increasing_ok):
        gamma = means[grid.cell_bin]
        mse = 0.0
    else:
        M = grid.bin_mean_matrix()
        G, h = _shape_constraints(n, grid.delta, cs)
        lb = np.full(n, cs.range.y_min)
        ub = np.full(n, cs.range.y_max)
        gamma, mse = solve_weighted_lsq_qp(M, grid.bin_masses, means, G, h, lb, ub)
        mse = max(float(mse), 0.0)
    if flipped:
        gamma = -gamma
    return StageOneResult(
        min_mse=mse, witness=GridCEF(values=tuple(gamma), grid_spacing=grid.delta)
    )


def _snap_to_edge(grid: Discretization, v: float, what: str) -> float:
    idx = int(round((v - grid.edges[0]) / grid.delta))
    idx = min(max(idx, 0), grid.n)
    snapped = float(grid.edges[idx])
    span = float(grid.edges[-1] - grid.edges[0])
    if abs(snapped - v) > 1e-12 * span:
        warnings.warn(
            f"{what}={v:g} snapped to partition edge {snapped:g}",
            SnapWarning,
            stacklevel=3,
        )
    return snapped


def stat_coeffs(grid: Discretization, spec: StatisticSpec) -> np.ndarray:
    """Coefficient vector c with m(gamma) = c @ gamma.

    point: indicator of the partition containing x. interval_mean: partition
    masses over [a, b] (endpoints snapped to partition edges), normalized.
    best_linear_slope / best_linear_value: the mass-weighted least-squares
    line through (partition midpoint, gamma_i), which is linear in gamma.
    """
    spec.check_support((float(grid.edges[0]), float(grid.edges[-1])))
    n = grid.n
    if spec.kind == "point":
        c = np.zeros(n)
        c[grid.cell_of(spec.x)] = 1.0
        return c
    if spec.kind == "interval_mean":
        a = _snap_to_edge(grid, spec.a, "a")
        b = _snap_to_edge(grid, spec.b, "b")
        if not a < b:
            raise ValidationError(f"interval [{spec.a}, {spec.b}] collapsed on grid")
        i0 = int(round((a - grid.edges[0]) / grid.delta))
        i1 = int(round((b - grid.edges[0]) / grid.delta))
        w = np.zeros(n)
        w[i0:i1] = grid.masses[i0:i1]
        total = w.sum()
        if total <= 0:
            raise ValidationError(f"interval [{a}, {b}] carries no mass")
        return w / total
    # mass-weighted least-squares line through the partition values
    p = grid.masses / grid.masses.sum()
    mids = grid.midpoints
    mbar = float(p @ mids)
    dev = mids - mbar
    denom = float(p @ (dev * dev))
    if denom <= 0:
        raise ValidationError("best-linear statistics need >= 2 partitions with mass")
    c_slope = p * dev / denom
    if spec.kind == "best_linear_slope":
        return c_slope
    return p + (spec.x - mbar) * c_slope


def eval_stat(grid: Discretization, gamma, spec: StatisticSpec) -> float:
    """Value of the statistic functional on a candidate gamma."""
    values = gamma.as_array() if isinstance(gamma, GridCEF) else np.asarray(gamma)
    if values.size != grid.n:
        raise ValidationError(
            f"gamma has {values.size} entries for a {grid.n}-partition grid"
        )
    return float(stat_coeffs(grid, spec) @ values)


def _band_lp_data(grid, norm, cs, stage1_gamma):
    """Assemble the LP constraint block for the zero-MSE band reformulation.

    Band half-widths default to EPS_BIN but are widened to the stage-1
    witness deviation where that is larger, so the witness itself is always
    feasible.
    """
    n = grid.n
    M = grid.bin_mean_matrix()
    means = np.asarray(norm.means)
    dev = np.abs(M @ stage1_gamma - means)
    bands = np.maximum(EPS_BIN, dev + 1e-15)
    G, h = _shape_constraints(n, grid.delta, cs)
    blocks = [M, -M]
    rhs = [means + bands, bands - means]
    if G is not None:
        blocks.insert(0, G)
        rhs.insert(0, h)
    A_ub = np.vstack(blocks)
    b_ub = np.concatenate(rhs)
    lb = np.full(n, cs.range.y_min)
    ub = np.full(n, cs.range.y_max)
    return A_ub, b_ub, lb, ub


def _boundary_aligned_value(grid, norm, spec):
    """Exact point-identified interval mean, or None when [a, b] is not a
    union of bins.

    Any gamma matching every bin mean exactly gives the interval mean as the
    mass-weighted average of the covered bin means, independent of the other
    constraints, so the value is computed directly rather than through the
    band LP (whose bands would blur the identity).
    """
    if spec.kind != "interval_mean":
        return None
    a = _snap_to_edge(grid, spec.a, "a")
    b = _snap_to_edge(grid, spec.b, "b")
    edges = [float(e) for e in grid.bin_edges]
    if a not in edges or b not in edges:
        return None
    k0 = edges.index(a)
    k1 = edges.index(b)
    if not k0 < k1:
        return None
    w = grid.bin_masses[k0:k1]
    r = np.asarray(norm.means[k0:k1])
    return float((w @ r) / w.sum())


def _bisect_bound(grid, norm, cs, c, cap, t_feasible, t_outer, gamma_feasible, sense):
    """Locate one endpoint of {c @ gamma : MSE(gamma) <= cap} by bisection.

    sense=-1 pushes the statistic down from the stage-1 value toward the
    shape-only LP optimum t_outer; sense=+1 pushes it up. Each probe asks a
    QP whether the MSE can stay under the cap with the statistic clamped at
    the probe level. Returns (bound, witness).
    """
    M = grid.bin_mean_matrix()
    means = np.asarray(norm.means)
    G, h = _shape_constraints(grid.n, grid.delta, cs)
    lb = np.full(grid.n, cs.range.y_min)
    ub = np.full(grid.n, cs.range.y_max)

    def probe(t):
        # sense=-1: c@gamma <= t; sense=+1: c@gamma >= t, i.e. -c@gamma <= -t
        row = -sense * c
        bound = -sense * t
        if G is None:
            G_ext, h_ext = row[None, :], np.array([bound])
        else:
            G_ext = np.vstack([G, row[None, :]])
            h_ext = np.concatenate([h, [bound]])
        gamma, mse = solve_weighted_lsq_qp(
            M, grid.bin_masses, means, G_ext, h_ext, lb, ub
        )
        return (mse <= cap), gamma

    ok, gamma = probe(t_outer)
    if ok:
        return t_outer, gamma
    lo_t, hi_t = (t_outer, t_feasible)
    best_gamma = gamma_feasible
    width_tol = 1e-11 * max(abs(t_feasible - t_outer), 1.0)
    for _ in range(BISECT_PROBES):
        if abs(hi_t - lo_t) <= width_tol:
            break
        mid = 0.5 * (lo_t + hi_t)
        ok, gamma = probe(mid)
        if ok:
            hi_t = mid
            best_gamma = gamma
        else:
            lo_t = mid
    return hi_t, best_gamma


def stage2_bound_stat(
    grid: Discretization,
    sample: BinnedSample,
    constraints: ConstraintSet,
    spec: StatisticSpec,
    stage1: StageOneResult,
) -> StatBounds:
    """Extremize the statistic over the constraint set at the stage-1 MSE."""
    norm, cs, flipped = _normalized_problem(grid, sample, constraints)
    gamma1 = stage1.witness.as_array()
    if flipped:
        gamma1 = -gamma1
    c = stat_coeffs(grid, spec)

    if stage1.min_mse <= EPS_MSE:
        exact = _boundary_aligned_value(grid, norm, spec)
        if exact is not None:
            lower = upper = exact
            g_lo = g_hi = gamma1
        else:
            A_ub, b_ub, lb, ub = _band_lp_data(grid, norm, cs, gamma1)
            g_lo, lower = solve_lp(c, A_ub, b_ub, lb, ub, maximize=False)
            g_hi, upper = solve_lp(c, A_ub, b_ub, lb, ub, maximize=True)
    else:
        cap = stage1.min_mse * (1.0 + MSE_REL_SLACK)
        G, h = _shape_constraints(grid.n, grid.delta, cs)
        lb = np.full(grid.n, cs.range.y_min)
        ub = np.full(grid.n, cs.range.y_max)
        _, t_min0 = solve_lp(c, G, h, lb, ub, maximize=False)
        _, t_max0 = solve_lp(c, G, h, lb, ub, maximize=True)
        t1 = float(c @ gamma1)
        lower, g_lo = _bisect_bound(grid, norm, cs, c, cap, t1, t_min0, gamma1, -1)
        upper, g_hi = _bisect_bound(grid, norm, cs, c, cap, t1, t_max0, gamma1, +1)

    if lower > upper:
        mid = 0.5 * (lower + upper)
        lower = upper = mid
    if flipped:
        lower, upper = -upper, -lower
        g_lo, g_hi = -g_hi, -g_lo
    return StatBounds(
        spec=spec,
        lower=float(lower),
        upper=float(upper),
        witnesses=(
            GridCEF(values=tuple(g_lo), grid_spacing=grid.delta),
            GridCEF(values=tuple(g_hi), grid_spacing=grid.delta),
        ),
    )


def cef_envelope_numeric(
    grid: Discretization,
    sample: BinnedSample,
    constraints: ConstraintSet,
    stage1: StageOneResult | None = None,
) -> CEFEnvelope:
    """Per-partition bounds on the CEF: stage 2 with a point statistic for
    every partition (2N solves)."""
    if stage1 is None:
        stage1 = stage1_min_mse(grid, sample, constraints)
    norm, cs, flipped = _normalized_problem(grid, sample, constraints)
    gamma1 = stage1.witness.as_array()
    if flipped:
        gamma1 = -gamma1

    n = grid.n
    lowers = np.empty(n)
    uppers = np.empty(n)
    if stage1.min_mse <= EPS_MSE:
        A_ub, b_ub, lb, ub = _band_lp_data(grid, norm, cs, gamma1)
        for i in range(n):
            c = np.zeros(n)
            c[i] = 1.0
            _, lowers[i] = solve_lp(c, A_ub, b_ub, lb, ub, maximize=False)
            _, uppers[i] = solve_lp(c, A_ub, b_ub, lb, ub, maximize=True)
    else:
        for i in range(n):
            spec = StatisticSpec.point(float(grid.midpoints[i]))
            res = stage2_bound_stat(grid, sample, constraints, spec, stage1)
            if flipped:
                lowers[i], uppers[i] = -res.upper, -res.lower
            else:
                lowers[i], uppers[i] = res.lower, res.upper

    if flipped:
        lowers, uppers = -uppers, -lowers
    rng = constraints.range
    lowers = np.clip(lowers, rng.y_min, rng.y_max)
    uppers = np.clip(uppers, rng.y_min, rng.y_max)
    uppers = np.maximum(lowers, uppers)
    return CEFEnvelope(
        grid=tuple(float(m) for m in grid.midpoints),
        lower=tuple(lowers),
        upper=tuple(uppers),
        provenance="numeric",
        constraint_tag=f"{constraints.tag()},n={n}",
    )
