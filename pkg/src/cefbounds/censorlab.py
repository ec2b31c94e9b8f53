"""Simulation harness: interval-censor a fully supported CEF into bins
under a known distribution, recover envelopes under a grid of constraint
settings, and report whether the truth stays inside them.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .calibrate import ReferenceCurve
from .core import (
    BinnedSample,
    CEFEnvelope,
    DistributionSpec,
    GridCEF,
    OutcomeRange,
    ValidationError,
    uniform_dist,
)
from .io import read_curve_csv, read_dist_csv, write_envelope_csv
from .numeric import ConstraintSet, cef_envelope_numeric, discretize, stage1_min_mse

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _as_evaluator(truth, support):
    """Normalize a truth (curve, grid, or callable) to (f, breakpoints).

    Breakpoints mark where the truth is non-smooth so segment quadrature
    stays exact (piecewise linear curves, piecewise constant grids).
    """
    if isinstance(truth, ReferenceCurve):
        xs, ys = truth.x, truth.y
        lo, hi = truth.support
        span = support[1] - support[0]
        if lo > support[0] + 1e-9 * span or hi < support[1] - 1e-9 * span:
            raise ValidationError(
                f"truth support [{lo}, {hi}] does not cover [{support[0]}, {support[1]}]"
            )
        return (lambda x: np.interp(x, xs, ys)), tuple(xs)
    if isinstance(truth, GridCEF):
        lo, hi = support
        n = len(truth.values)
        if abs(n * truth.grid_spacing - (hi - lo)) > 1e-9 * (hi - lo):
            raise ValidationError(
                "grid truth does not tile the support: "
                f"{n} cells of width {truth.grid_spacing} vs [{lo}, {hi}]"
            )
        edges = lo + truth.grid_spacing * np.arange(n + 1)
        vals = truth.as_array()

        def f(x):
            idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n - 1)
            return vals[idx]

        return f, tuple(edges)
    if callable(truth):
        return truth, ()
    raise ValidationError(f"unsupported truth type {type(truth).__name__}")


def _segment_breaks(lo, hi, dist, extra):
    pts = {lo, hi}
    if dist.cdf_grid is not None:
        pts.update(x for x, _ in dist.cdf_grid if lo < x < hi)
    pts.update(x for x in extra if lo < x < hi)
    return sorted(pts)


def censor(truth, dist: DistributionSpec, boundaries, rng: OutcomeRange,
           direction: str = "increasing") -> BinnedSample:
    """Bin means of the truth under the distribution: mass-weighted average
    of the truth over each bin, by exact per-segment Gauss quadrature."""
    f, breaks = _as_evaluator(truth, dist.support)
    boundaries = [float(b) for b in boundaries]
    means = []
    for b_lo, b_hi in zip(boundaries, boundaries[1:]):
        num = 0.0
        mass = 0.0
        for s_lo, s_hi in zip(
            _segment_breaks(b_lo, b_hi, dist, breaks),
            _segment_breaks(b_lo, b_hi, dist, breaks)[1:],
        ):
            m = dist.mass(s_lo, s_hi)
            if m <= 0:
                continue
            mid = 0.5 * (s_lo + s_hi)
            half = 0.5 * (s_hi - s_lo)
            avg = float(_GL_WEIGHTS @ np.asarray(f(mid + half * _GL_NODES))) / 2.0
            num += m * avg
            mass += m
        if mass <= 0:
            raise ValidationError(f"bin [{b_lo}, {b_hi}] carries no mass")
        means.append(num / mass)
    return BinnedSample(
        boundaries=tuple(boundaries),
        means=tuple(means),
        direction=direction,
        range=rng,
    )


@dataclass(frozen=True)
class CoverageReport:
    """Per-point containment of a truth inside an envelope."""

    contained: tuple[bool, ...]
    fraction: float
    violations: tuple[tuple[float, float, float, float], ...]

    @property
    def full(self) -> bool:
        return self.fraction == 1.0


def coverage_report(truth, envelope: CEFEnvelope, rtol: float = 1e-9) -> CoverageReport:
    """Check lower <= truth <= upper at every envelope grid point.

    Violations list (x, truth, lower, upper) rows. rtol scales a containment
    slack by the envelope's outcome magnitude.
    """
    grid = np.asarray(envelope.grid)
    support = (float(grid.min()), float(grid.max()))
    f, _ = _as_evaluator(truth, support)
    tv = np.asarray(f(grid), dtype=float)
    lo = np.asarray(envelope.lower)
    hi = np.asarray(envelope.upper)
    slack = rtol * max(1.0, float(np.max(np.abs(hi))), float(np.max(np.abs(lo))))
    ok = (lo - slack <= tv) & (tv <= hi + slack)
    violations = tuple(
        (float(grid[i]), float(tv[i]), float(lo[i]), float(hi[i]))
        for i in np.flatnonzero(~ok)
    )
    return CoverageReport(
        contained=tuple(bool(v) for v in ok),
        fraction=float(np.mean(ok)),
        violations=violations,
    )


def _parse_dist(cfg, base_dir):
    if cfg == "uniform" or cfg is None:
        return None  # resolved against boundaries later
    if isinstance(cfg, dict) and "csv" in cfg:
        return read_dist_csv(os.path.join(base_dir, cfg["csv"]))
    if isinstance(cfg, dict) and "cdf_grid" in cfg:
        grid = tuple((float(x), float(v)) for x, v in cfg["cdf_grid"])
        return DistributionSpec(
            kind="gridded", support=(grid[0][0], grid[-1][0]), cdf_grid=grid
        )
    raise ValidationError(f"unrecognized distribution config: {cfg!r}")


def _parse_curvature(v) -> float:
    if v in ("inf", "Inf", "INF", None):
        return math.inf
    return float(v)


def run_experiment(config, output_dir: str | None = None) -> dict:
    """Censor a truth and recover envelopes for each constraint setting.

    config is a dict or a path to a JSON file with keys: truth ({"csv": ...}
    or {"points": [[x, y], ...]}), dist ("uniform", {"csv": ...}, or
    {"cdf_grid": ...}), boundaries, range [ymin, ymax], direction, grid_n,
    constraints (list of {"monotone": bool, "curvature": number or "inf"}),
    output_dir. Writes one envelope CSV per setting plus summary.csv, and
    returns the results keyed by constraint tag.
    """
    base_dir = "."
    if isinstance(config, (str, os.PathLike)):
        base_dir = os.path.dirname(os.fspath(config)) or "."
        with open(config, encoding="utf-8") as fh:
            config = json.load(fh)
    out_dir = output_dir or config.get("output_dir")

    truth_cfg = config["truth"]
    if "csv" in truth_cfg:
        pts = read_curve_csv(os.path.join(base_dir, truth_cfg["csv"]))
    else:
        pts = tuple((float(x), float(y)) for x, y in truth_cfg["points"])
    truth = ReferenceCurve(points=pts, knots=())

    boundaries = [float(b) for b in config["boundaries"]]
    dist = _parse_dist(config.get("dist", "uniform"), base_dir)
    if dist is None:
        dist = uniform_dist(boundaries[0], boundaries[-1])
    y_min, y_max = config["range"]
    rng = OutcomeRange(float(y_min), float(y_max))
    direction = config.get("direction", "increasing")
    n = int(config.get("grid_n", 100))

    sample = censor(truth, dist, boundaries, rng, direction)
    grid = discretize(sample, dist, n)

    results = {}
    rows = []
    for i, cs_cfg in enumerate(config["constraints"]):
        cs = ConstraintSet(
            monotone=bool(cs_cfg.get("monotone", True)),
            curvature_limit=_parse_curvature(cs_cfg.get("curvature")),
            range=rng,
        )
        stage1 = stage1_min_mse(grid, sample, cs)
        envelope = cef_envelope_numeric(grid, sample, cs, stage1)
        report = coverage_report(truth, envelope)
        tag = cs.tag()
        results[tag] = {
            "constraints": cs,
            "min_mse": stage1.min_mse,
            "envelope": envelope,
            "coverage": report,
        }
        path = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            safe = "".join(ch if ch.isalnum() else "-" for ch in tag)
            path = os.path.join(out_dir, f"envelope_{i:02d}_{safe}.csv")
            write_envelope_csv(path, envelope)
        rows.append(
            (tag, stage1.min_mse, report.fraction, len(report.violations), path)
        )

    if out_dir:
        summary_path = os.path.join(out_dir, "summary.csv")
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write("constraint_tag,min_mse,contained_fraction,violations,envelope_csv\n")
            for tag, mse, frac, nv, path in rows:
                fh.write(
                    f"{tag},{mse:.12g},{frac:.12g},{nv},{os.path.basename(path or '')}\n"
                )
        results["_summary_csv"] = summary_path
    return results
