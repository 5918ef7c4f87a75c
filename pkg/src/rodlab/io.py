"""Plain-text serialization of fields, centerlines, tables and trajectories.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rod import THETA_MIN, Centerline, EulerField, Grid, ValidationError

FLOAT_FMT = "%.17g"
FIELD_HEADER = ("s", "theta", "phi", "psi")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % float(x)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Comma-separated table with one header line; header-only for no rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file, expected a header line")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


def export_centerline(c: Centerline, path) -> Path:
    """One ``s x y z`` line per node, space separated."""
    path = Path(path)
    with path.open("w") as fh:
        for s, p in zip(c.s, c.points):
            fh.write(" ".join(fmt(v) for v in (s, *p)) + "\n")
    return path


def read_centerline(path) -> Centerline:
    data = np.loadtxt(path, ndmin=2)
    return Centerline(data[:, 0], data[:, 1:4])


def export_field(f: EulerField, path) -> Path:
    s = f.grid.nodes
    return write_table(path, FIELD_HEADER, zip(s, f.theta, f.phi, f.psi))


def read_field(path, theta_min: float = THETA_MIN) -> EulerField:
    """Inverse of :func:`export_field`; the grid must be uniform."""
    header, data = read_table(path)
    if tuple(header) != FIELD_HEADER:
        raise ValidationError(f"{path}: expected header {','.join(FIELD_HEADER)}, got {','.join(header)}")
    if data.shape[0] < 3:
        raise ValidationError(f"{path}: need at least 3 nodes, got {data.shape[0]}")
    s = data[:, 0]
    grid = Grid(float(s[0]), float(s[-1]), len(s) - 1)
    if not np.allclose(s, grid.nodes, rtol=0, atol=1e-9 * max(1.0, abs(grid.upper - grid.lower))):
        raise ValidationError(f"{path}: nodes are not uniformly spaced")
    return EulerField(grid, data[:, 1], data[:, 2], data[:, 3], theta_min)


def trajectory_header(axes: Sequence[str]) -> list[str]:
    return ["step", "time", "dt", "energy", *(f"residual_{a}" for a in axes), *(f"lambda_{a}" for a in axes)]


def export_series(records, path, axes: Sequence[str] = ()) -> Path:
    """Trajectory records as CSV: step, time, dt, energy, residuals, multipliers."""
    rows = []
    k = len(axes)
    for r in records:
        res = np.resize(np.asarray(r.constraint_residuals, dtype=float), k) if k else []
        lam = np.resize(np.asarray(r.multipliers, dtype=float), k) if k else []
        rows.append((r.step, r.time, r.dt, r.energy, *res, *lam))
    return write_table(path, trajectory_header(axes), rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
