"""CSV loaders with hard schema validation.

plotkit consumes only files exported by the certificate toolkit; it never
invokes it. Column layouts are therefore contracts: a mismatch is an error,
never a silent reinterpretation.

Expected schemas
----------------
grid (level sets):   x1,x2,h,V,W,omega1,region,status   (first two columns are
                     the state coordinates; their names are free)
trajectory:          t,<states...>[,u1..um],V,h
growth probe:        radius,grad_norm,T
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "GridData", "TrajectoryData", "GrowthData",
           "load_grid", "load_trajectory", "load_growth"]

_GRID_TAIL = ["h", "V", "W", "omega1", "region", "status"]


class SchemaError(ValueError):
    pass


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r]
    if not rows:
        raise SchemaError(f"{path} is empty")
    return rows[0], rows[1:]


def _to_float(rows, columns, header, path):
    idx = [header.index(c) for c in columns]
    try:
        return np.array([[float(r[i]) for i in idx] for r in rows])
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: malformed numeric data: {exc}") from exc


@dataclass
class GridData:
    state_names: list[str]
    x1: np.ndarray  # sorted unique first-coordinate values
    x2: np.ndarray
    W: np.ndarray  # shape (len(x1), len(x2))
    h: np.ndarray
    V: np.ndarray
    status: np.ndarray  # object array of status strings


def load_grid(path) -> GridData:
    """Level-set grid export; requires a full two-dimensional lattice."""
    header, rows = _read_rows(path)
    if len(header) < 8 or header[-6:] != _GRID_TAIL:
        raise SchemaError(
            f"{path}: expected columns <x1>,<x2>,{','.join(_GRID_TAIL)}, got {header}"
        )
    state_names = header[:-6]
    if len(state_names) != 2:
        raise SchemaError(
            f"{path}: level-set plots need a 2-dimensional state grid, "
            f"got {len(state_names)} coordinates"
        )
    if not rows:
        raise SchemaError(f"{path} has a header but no data")
    coords = _to_float(rows, state_names, header, path)
    vals = _to_float(rows, ["h", "V", "W"], header, path)
    status = np.array([r[header.index("status")] for r in rows], dtype=object)

    x1 = np.unique(coords[:, 0])
    x2 = np.unique(coords[:, 1])
    if len(x1) * len(x2) != len(rows):
        raise SchemaError(f"{path}: rows do not form a full {len(x1)}x{len(x2)} lattice")
    # rows are row-major in the first coordinate
    shape = (len(x1), len(x2))
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    return GridData(
        state_names=state_names,
        x1=x1,
        x2=x2,
        h=vals[order, 0].reshape(shape),
        V=vals[order, 1].reshape(shape),
        W=vals[order, 2].reshape(shape),
        status=status[order].reshape(shape),
    )


@dataclass
class TrajectoryData:
    state_names: list[str]
    t: np.ndarray
    states: np.ndarray
    V: np.ndarray
    h: np.ndarray


_INPUT_COL = re.compile(r"u\d+\Z")


def load_trajectory(path) -> TrajectoryData:
    """Simulation export: t,<states...>[,u...],V,h."""
    header, rows = _read_rows(path)
    if len(header) < 4 or header[0] != "t" or header[-2:] != ["V", "h"]:
        raise SchemaError(
            f"{path}: expected columns t,<states...>[,u...],V,h, got {header}"
        )
    middle = header[1:-2]
    states = []
    for name in middle:
        if _INPUT_COL.match(name):
            break
        states.append(name)
    if not states:
        raise SchemaError(f"{path}: no state columns found in {header}")
    if not rows:
        raise SchemaError(f"{path} has a header but no data")
    t = _to_float(rows, ["t"], header, path)[:, 0]
    xs = _to_float(rows, states, header, path)
    vh = _to_float(rows, ["V", "h"], header, path)
    return TrajectoryData(states, t, xs, vh[:, 0], vh[:, 1])


@dataclass
class GrowthData:
    radius: np.ndarray
    grad_norm: np.ndarray
    T: np.ndarray

    def slope(self) -> float:
        """Least-squares slope of log |grad T| against log r (the same
        definition the toolkit uses, so annotations agree to roundoff)."""
        return float(np.polyfit(np.log(self.radius), np.log(self.grad_norm), 1)[0])

    def T_slope(self) -> float:
        return float(np.polyfit(np.log(1.0 / self.radius), np.abs(self.T), 1)[0])


def load_growth(path) -> GrowthData:
    header, rows = _read_rows(path)
    if header != ["radius", "grad_norm", "T"]:
        raise SchemaError(f"{path}: expected columns radius,grad_norm,T, got {header}")
    if len(rows) < 2:
        raise SchemaError(f"{path}: need at least two radii to fit a slope")
    vals = _to_float(rows, header, header, path)
    if np.any(vals[:, 0] <= 0) or np.any(vals[:, 1] <= 0):
        raise SchemaError(f"{path}: radii and gradient norms must be positive")
    if not np.all(np.isfinite(vals)):
        raise SchemaError(f"{path}: non-finite values")
    return GrowthData(vals[:, 0], vals[:, 1], vals[:, 2])
