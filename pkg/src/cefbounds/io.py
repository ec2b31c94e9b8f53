"""CSV ingestion and emission.

Schemas (header row optional unless noted, all errors carry file:line):

* binned sample — ``bin_lo,bin_hi,mean`` with an optional trailing count
* distribution — ``x,cdf``
* reference curve — ``x,y``
* per-bin counts — ``bin_lo,bin_hi,mean,sd,n``
* microdata — ``bin_lo,bin_hi,y`` (one row per observation)
* transition matrix — header row is the child boundaries after a blank
  leading cell; each body row starts with a parent boundary followed by
  that parent bin's joint masses; the final row is the last parent
  boundary alone
* envelope — ``x,lower,upper``
"""

from __future__ import annotations

import csv

import numpy as np

from .core import CEFEnvelope, DistributionSpec, ValidationError
from .doublecensor import TransitionMatrix
from .inference import CountsSample, MicroSample


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _raw_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                cells = [c.strip() for c in row]
                if not any(cells):
                    continue
                yield lineno, cells
    except OSError as err:
        raise ValidationError(f"cannot read {path}: {err}") from err


def _numeric_rows(path, n_cols, optional_cols=0):
    """Parse rows of n_cols floats (plus up to optional_cols extras),
    skipping one leading header row if it is not numeric."""
    rows = []
    first = True
    for lineno, cells in _raw_rows(path):
        try:
            values = tuple(float(c) for c in cells if c)
        except ValueError:
            if first:  # header
                first = False
                continue
            raise ValidationError(f"{path}:{lineno}: non-numeric value in {cells!r}")
        first = False
        if not n_cols <= len(values) <= n_cols + optional_cols:
            raise ValidationError(
                f"{path}:{lineno}: expected {n_cols}"
                + (f"-{n_cols + optional_cols}" if optional_cols else "")
                + f" columns, got {len(values)}"
            )
        rows.append((lineno, values))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def _bins_from_rows(path, rows):
    """Check bin contiguity of (lineno, (lo, hi, ...)) rows sorted by lo."""
    rows = sorted(rows, key=lambda r: r[1][0])
    boundaries = [rows[0][1][0]]
    for lineno, values in rows:
        lo, hi = values[0], values[1]
        if hi <= lo:
            raise ValidationError(f"{path}:{lineno}: bin [{lo}, {hi}] is empty")
        if lo != boundaries[-1]:
            raise ValidationError(
                f"{path}:{lineno}: bin starts at {lo} but previous ended at "
                f"{boundaries[-1]} (bins must tile the support)"
            )
        boundaries.append(hi)
    return tuple(boundaries), rows


def read_sample_csv(path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Binned sample rows -> (boundaries, bin means)."""
    boundaries, rows = _bins_from_rows(path, _numeric_rows(path, 3, optional_cols=1))
    return boundaries, tuple(v[2] for _, v in rows)


def read_dist_csv(path) -> DistributionSpec:
    rows = _numeric_rows(path, 2)
    grid = tuple((v[0], v[1]) for _, v in rows)
    try:
        return DistributionSpec(
            kind="gridded", support=(grid[0][0], grid[-1][0]), cdf_grid=grid
        )
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from err


def read_curve_csv(path) -> tuple[tuple[float, float], ...]:
    rows = _numeric_rows(path, 2)
    pts = sorted((v[0], v[1]) for _, v in rows)
    return tuple(pts)


def read_counts_csv(path) -> CountsSample:
    boundaries, rows = _bins_from_rows(path, _numeric_rows(path, 5))
    for lineno, v in rows:
        if v[4] != int(v[4]):
            raise ValidationError(f"{path}:{lineno}: count {v[4]} is not an integer")
    try:
        return CountsSample(
            boundaries=boundaries,
            means=tuple(v[2] for _, v in rows),
            sds=tuple(v[3] for _, v in rows),
            counts=tuple(int(v[4]) for _, v in rows),
        )
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from err


def read_micro_csv(path) -> MicroSample:
    rows = _numeric_rows(path, 3)
    first_seen = {}
    for lineno, v in rows:
        first_seen.setdefault((v[0], v[1]), lineno)
    bins = sorted(first_seen)
    boundaries, _ = _bins_from_rows(path, [(first_seen[b], b) for b in bins])
    index_of = {b: i for i, b in enumerate(bins)}
    try:
        return MicroSample(
            boundaries=boundaries,
            bin_index=tuple(index_of[(v[0], v[1])] for _, v in rows),
            y=tuple(v[2] for _, v in rows),
        )
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from err


def read_transition_csv(path) -> TransitionMatrix:
    raw = list(_raw_rows(path))
    if len(raw) < 3:
        raise ValidationError(f"{path}: transition matrix needs header + 2 rows minimum")
    header_line, header = raw[0]
    if header[0]:
        raise ValidationError(
            f"{path}:{header_line}: first header cell must be blank "
            "(child boundaries start in column 2)"
        )
    try:
        child = tuple(float(c) for c in header[1:] if c)
    except ValueError:
        raise ValidationError(f"{path}:{header_line}: non-numeric child boundary")
    parent = []
    mass = []
    for lineno, cells in raw[1:]:
        try:
            values = [float(c) for c in cells if c]
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric value in {cells!r}")
        parent.append(values[0])
        if len(values) == 1:
            continue  # closing row: last parent boundary alone
        if len(values) != len(child):
            raise ValidationError(
                f"{path}:{lineno}: expected {len(child) - 1} masses "
                f"for {len(child)} child boundaries, got {len(values) - 1}"
            )
        mass.append(tuple(values[1:]))
    if len(parent) != len(mass) + 1:
        raise ValidationError(
            f"{path}: need {len(mass) + 1} parent boundaries for "
            f"{len(mass)} mass rows, got {len(parent)}"
        )
    try:
        return TransitionMatrix(
            parent_boundaries=tuple(parent), child_boundaries=child, mass=tuple(mass)
        )
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from err


def write_transition_csv(path, tm: TransitionMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow([""] + [_fmt(c) for c in tm.child_boundaries])
        for k, row in enumerate(tm.mass):
            out.writerow([_fmt(tm.parent_boundaries[k])] + [_fmt(m) for m in row])
        out.writerow([_fmt(tm.parent_boundaries[-1])])


def write_envelope_csv(path, envelope: CEFEnvelope) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "lower", "upper"])
        for x, lo, hi in zip(envelope.grid, envelope.lower, envelope.upper):
            out.writerow([_fmt(x), _fmt(lo), _fmt(hi)])


def read_envelope_csv(path, tag: str = "") -> CEFEnvelope:
    rows = _numeric_rows(path, 3)
    arr = np.asarray([v for _, v in rows], dtype=float)
    return CEFEnvelope(
        grid=tuple(arr[:, 0]),
        lower=tuple(arr[:, 1]),
        upper=tuple(arr[:, 2]),
        provenance="csv",
        constraint_tag=tag,
    )


def write_witness_csv(path, grid, witnesses: dict) -> None:
    """Dump stage witnesses: x column plus one column per named witness."""
    names = list(witnesses)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["x"] + names)
        for i, x in enumerate(grid):
            out.writerow([_fmt(x)] + [_fmt(witnesses[n][i]) for n in names])
