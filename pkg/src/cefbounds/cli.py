"""Command-line interface.

Subcommands: bounds (CEF envelope), stat (statistic bounds, optional
bootstrap), simulate (censor-and-recover experiments), calibrate (curvature
cap from a reference curve), doublecensor (outcome-censored union bounds).

All numeric output is printed with 12 significant digits. Every summary
embeds a manifest (sha256 of inputs, version, seed, argv) so reruns are
identifiable. Exit codes: 0 success, 2 validation error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings

import numpy as np

from . import analytic, calibrate, censorlab, doublecensor, inference
from . import io as cio
from .core import (
    BinnedSample,
    InfeasibleError,
    OutcomeRange,
    StatisticSpec,
    ValidationError,
    uniform_dist,
)
from .numeric import ConstraintSet, cef_envelope_numeric, discretize, stage1_min_mse, stage2_bound_stat

VERSION = "0.1.0"
# Bump when the meaning of constraint flags changes (curvature units are
# outcome units per x-unit squared; monotone refers to the CEF in x).
CONSTRAINT_SEMANTICS = "v1"

_DIRECTIONS = {"inc": "increasing", "dec": "decreasing", "none": "none"}


def _j(x):
    """12-significant-digit float for JSON output."""
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(format(x, ".12g"))


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(inputs, seed=None) -> dict:
    return {
        "tool": f"cefbounds {VERSION}",
        "constraint_semantics": CONSTRAINT_SEMANTICS,
        "argv": sys.argv[1:],
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs if p},
        "seed": seed,
    }


def _parse_range(text) -> OutcomeRange:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"--range expects 'ymin,ymax', got {text!r}")
    return OutcomeRange(lo, hi)


def _parse_curvature(text) -> float:
    if text.lower() in ("inf", "infinity", "none"):
        return math.inf
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"--curvature expects a number or 'inf', got {text!r}")
    return value


def _parse_stat(text) -> StatisticSpec:
    kind, _, rest = text.partition(":")
    try:
        if kind == "point":
            return StatisticSpec.point(float(rest))
        if kind == "mu":
            a, b = (float(v) for v in rest.split(","))
            return StatisticSpec.interval_mean(a, b)
        if kind == "slope" and not rest:
            return StatisticSpec.slope()
        if kind == "line":
            return StatisticSpec.line_value(float(rest))
    except (ValueError, TypeError):
        pass
    raise ValidationError(
        f"--stat expects point:x, mu:a,b, slope, or line:x, got {text!r}"
    )


def _load_dist(path, boundaries):
    if path:
        return cio.read_dist_csv(path)
    return uniform_dist(boundaries[0], boundaries[-1])


def _constraints(args, rng) -> ConstraintSet:
    return ConstraintSet(
        monotone=args.monotone != "none",
        curvature_limit=_parse_curvature(args.curvature),
        range=rng,
    )


def _emit(args, payload) -> None:
    text = json.dumps(payload, indent=2)
    print(text)
    if getattr(args, "summary", None):
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _add_constraint_flags(p, with_engine=True):
    p.add_argument("--dist", help="distribution CSV (x,cdf); default uniform")
    p.add_argument("--monotone", choices=("inc", "dec", "none"), default="inc",
                   help="CEF direction constraint (default inc)")
    p.add_argument("--curvature", default="inf", metavar="C|inf",
                   help="cap on |f''| in outcome units per x-unit^2 (default inf)")
    p.add_argument("--grid", type=int, default=100, metavar="N",
                   help="partitions / evaluation points (default 100)")
    if with_engine:
        p.add_argument("--engine", choices=("analytic", "numeric"), default=None,
                       help="analytic (closed form, monotone only) or numeric")


def _resolve_engine(args):
    engine = args.engine
    curvature = _parse_curvature(args.curvature)
    if engine is None:
        engine = "analytic" if math.isinf(curvature) and args.monotone != "none" else "numeric"
    if engine == "analytic" and not math.isinf(curvature):
        raise ValidationError(
            "the analytic engine handles monotonicity only; "
            "rerun with --engine numeric for finite --curvature"
        )
    return engine


def cmd_bounds(args) -> int:
    boundaries, means = cio.read_sample_csv(args.sample)
    rng = _parse_range(args.range)
    sample = BinnedSample(
        boundaries=boundaries,
        means=means,
        direction=_DIRECTIONS[args.monotone],
        range=rng,
    )
    dist = _load_dist(args.dist, boundaries)
    engine = _resolve_engine(args)
    min_mse = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if engine == "analytic":
            xs = np.linspace(boundaries[0], boundaries[-1], args.grid)
            envelope = analytic.cef_envelope_analytic(sample, dist, xs)
        else:
            grid = discretize(sample, dist, args.grid)
            stage1 = stage1_min_mse(grid, sample, _constraints(args, rng))
            min_mse = stage1.min_mse
            envelope = cef_envelope_numeric(grid, sample, _constraints(args, rng), stage1)
    cio.write_envelope_csv(args.out, envelope)
    _emit(args, {
        "command": "bounds",
        "engine": engine,
        "constraint_tag": envelope.constraint_tag,
        "rows": len(envelope.grid),
        "envelope_csv": args.out,
        "min_mse": None if min_mse is None else _j(min_mse),
        "warnings": [str(w.message) for w in caught],
        "manifest": _manifest([args.sample, args.dist]),
    })
    return 0


def _stat_json(res, extra=None):
    out = {
        "spec": res.spec.describe(),
        "lower": _j(res.lower),
        "upper": _j(res.upper),
        "point_identified": bool(res.lower == res.upper),
    }
    if extra:
        out.update(extra)
    return out


def cmd_stat(args) -> int:
    spec = _parse_stat(args.stat)
    rng = _parse_range(args.range)
    direction = _DIRECTIONS[args.monotone]

    if args.bootstrap and args.input_kind == "bins":
        raise ValidationError(
            "--bootstrap needs --input-kind micro or counts (bin means alone "
            "carry no sampling noise)"
        )

    if args.input_kind == "counts":
        data = cio.read_counts_csv(args.sample)
        boundaries, means = data.boundaries, data.means
    elif args.input_kind == "micro":
        data = cio.read_micro_csv(args.sample)
        boundaries, means = data.boundaries, data.bin_means()
    else:
        data = None
        boundaries, means = cio.read_sample_csv(args.sample)

    dist = _load_dist(args.dist, boundaries)
    sample = BinnedSample(
        boundaries=boundaries, means=means, direction=direction, range=rng
    )

    engine = args.engine or "numeric"
    payload = {"command": "stat", "engine": engine}
    witness_dump = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if engine == "analytic":
            if not math.isinf(_parse_curvature(args.curvature)):
                raise ValidationError(
                    "the analytic engine handles monotonicity only; "
                    "rerun with --engine numeric for finite --curvature"
                )
            if spec.kind == "point":
                lo, hi = analytic.cef_bounds_analytic(sample, dist, spec.x)
                payload.update({
                    "spec": spec.describe(), "lower": _j(lo), "upper": _j(hi),
                    "point_identified": bool(lo == hi),
                })
            elif spec.kind == "interval_mean":
                mu = analytic.mu_bounds(sample, dist, spec.a, spec.b)
                payload.update({
                    "spec": spec.describe(), "lower": _j(mu.lower),
                    "upper": _j(mu.upper),
                    "point_identified": bool(mu.point_identified),
                })
            else:
                raise ValidationError(
                    f"statistic {spec.describe()!r} needs --engine numeric"
                )
        else:
            cs = _constraints(args, rng)
            grid = discretize(sample, dist, args.grid)
            stage1 = stage1_min_mse(grid, sample, cs)
            res = stage2_bound_stat(grid, sample, cs, spec, stage1)
            payload.update(_stat_json(res, {"min_mse": _j(stage1.min_mse)}))
            witness_dump = (grid, res)
            if args.bootstrap:
                ci = inference.bootstrap_bounds(
                    data, spec, cs, rng, dist=dist, direction=direction,
                    B=args.bootstrap, seed=args.seed, alpha=args.alpha,
                    n_grid=args.grid,
                )
                payload["confidence_set"] = {
                    "alpha": _j(ci.alpha),
                    "lower": _j(ci.lower),
                    "upper": _j(ci.upper),
                    "q_lower": _j(ci.q_lower),
                    "q_upper": _j(ci.q_upper),
                    "B": ci.B,
                    "seed": ci.seed,
                    "n_failed": ci.n_failed,
                    "n_redraws": ci.n_redraws,
                }
    if args.witness and witness_dump:
        grid, res = witness_dump
        cio.write_witness_csv(
            args.witness,
            grid.midpoints,
            {"lower": res.witnesses[0].values, "upper": res.witnesses[1].values},
        )
        payload["witness_csv"] = args.witness
    payload["warnings"] = [str(w.message) for w in caught]
    payload["manifest"] = _manifest(
        [args.sample, args.dist], seed=args.seed if args.bootstrap else None
    )
    _emit(args, payload)
    return 0


def cmd_simulate(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = json.load(fh)
    out_dir = args.out or config.get("output_dir")
    if not out_dir:
        raise ValidationError("simulate needs --out or output_dir in the config")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = censorlab.run_experiment(args.config, output_dir=out_dir)
    payload = {"command": "simulate", "output_dir": out_dir, "runs": {}}
    for tag, res in results.items():
        if tag == "_summary_csv":
            payload["summary_csv"] = res
            continue
        payload["runs"][tag] = {
            "min_mse": _j(res["min_mse"]),
            "contained_fraction": _j(res["coverage"].fraction),
            "violations": len(res["coverage"].violations),
        }
    payload["warnings"] = [str(w.message) for w in caught]
    payload["manifest"] = _manifest([args.config])
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(payload["manifest"], fh, indent=2)
    _emit(args, payload)
    return 0


def cmd_calibrate(args) -> int:
    points = cio.read_curve_csv(args.curve)
    if args.knots:
        knots = tuple(float(v) for v in args.knots.split(","))
    else:
        knots = calibrate.default_knots([p[0] for p in points])
    curve = calibrate.ReferenceCurve(points=points, knots=knots)
    fit = calibrate.fit_spline(curve, boundary=args.boundary)
    estimate = calibrate.max_curvature(fit)
    _emit(args, {
        "command": "calibrate",
        "boundary": args.boundary,
        "interior_knots": [_j(k) for k in fit.interior_knots],
        "max_second_derivative": _j(estimate),
        "suggested_cap": _j(calibrate.suggested_cap(estimate)),
        "n_points": len(points),
        "manifest": _manifest([args.curve]),
    })
    return 0


def cmd_doublecensor(args) -> int:
    tm = cio.read_transition_csv(args.matrix)
    spec = _parse_stat(args.stat)
    rng = OutcomeRange(tm.child_boundaries[0], tm.child_boundaries[-1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = doublecensor.double_censored_stat_bounds(
            tm, spec,
            constraints=_constraints(args, rng),
            n_grid=args.grid,
        )
    _emit(args, {
        "command": "doublecensor",
        "spec": spec.describe(),
        "lower": _j(res.lower),
        "upper": _j(res.upper),
        "lower_scenario": res.lower_scenario,
        "upper_scenario": res.upper_scenario,
        "per_scenario": {
            name: {"lower": _j(b.lower), "upper": _j(b.upper)}
            for name, b in res.per_scenario.items()
        },
        "scenario_means": {
            name: [_j(m) for m in sm.means] for name, sm in res.means.items()
        },
        "dominance_violations": len(tm.dominance_violations()),
        "warnings": [str(w.message) for w in caught],
        "manifest": _manifest([args.matrix]),
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cefbounds",
        description="Bounds on conditional expectation functions from "
                    "interval-censored conditioning variables.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"cefbounds {VERSION} (constraint semantics {CONSTRAINT_SEMANTICS})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="pointwise CEF envelope")
    p.add_argument("sample", help="sample CSV: bin_lo,bin_hi,mean[,count]")
    p.add_argument("--range", required=True, metavar="ymin,ymax")
    _add_constraint_flags(p)
    p.add_argument("--out", default="envelope.csv", help="envelope CSV path")
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("stat", help="bounds on a scalar statistic")
    p.add_argument("sample", help="input CSV (see --input-kind)")
    p.add_argument("--stat", required=True, metavar="point:x|mu:a,b|slope|line:x")
    p.add_argument("--range", required=True, metavar="ymin,ymax")
    _add_constraint_flags(p)
    p.add_argument("--input-kind", choices=("bins", "micro", "counts"),
                   default="bins", dest="input_kind")
    p.add_argument("--bootstrap", type=int, metavar="B", default=0,
                   help="bootstrap replicates (needs micro or counts input)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--witness", help="dump bound witnesses to this CSV")
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_stat)

    p = sub.add_parser("simulate", help="censor-and-recover experiment from JSON config")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="curvature cap from a reference curve")
    p.add_argument("curve", help="curve CSV: x,y")
    p.add_argument("--knots", help="interior knots, comma-separated (default: x quantiles)")
    p.add_argument("--boundary", choices=("natural", "free"), default="natural")
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("doublecensor", help="union bounds when the outcome is binned too")
    p.add_argument("matrix", help="transition matrix CSV")
    p.add_argument("--stat", default="slope", metavar="point:x|mu:a,b|slope|line:x")
    _add_constraint_flags(p, with_engine=False)
    p.add_argument("--summary", help="also write the summary JSON here")
    p.set_defaults(func=cmd_doublecensor)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
