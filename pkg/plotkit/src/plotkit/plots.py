"""The three renderers: level sets, trajectory with monitors, growth fit.

All functions are read-only on their inputs and refuse to clobber an existing
output unless overwrite is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import GridData, SchemaError, load_grid, load_growth, load_trajectory

__all__ = ["PlotJob", "plot_levelsets", "plot_trajectory", "plot_growth",
           "contour_vertices"]


def _check_output(path, overwrite: bool) -> Path:
    out = Path(path)
    if out.exists() and not overwrite:
        raise FileExistsError(
            f"output {out} already exists; pass overwrite=True (--overwrite) to replace"
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def contour_vertices(x1, x2, field_vals, level) -> np.ndarray:
    """Vertices of the level-set polyline(s), stacked as an (n, 2) array.

    Uses a headless contour pass; callers compare curves quantitatively
    (for instance the W = 1 and h = 0 loci, which must coincide for a valid
    certificate)."""
    fig = plt.figure()
    try:
        cs = plt.contour(x1, x2, np.asarray(field_vals).T, levels=[level])
        segs = [np.asarray(s) for s in cs.allsegs[0] if len(s)]
    finally:
        plt.close(fig)
    if not segs:
        return np.zeros((0, 2))
    return np.vstack(segs)


def plot_levelsets(grid_csv, out_path, levels: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
                   overwrite: bool = False) -> Path:
    """Contours of W with the W = 1 and h = 0 curves overlaid.

    For a verified certificate the two highlighted curves coincide; visual
    separation means the unit level set misses the safe-set boundary."""
    grid = load_grid(grid_csv)
    out = _check_output(out_path, overwrite)

    X1, X2 = np.meshgrid(grid.x1, grid.x2, indexing="ij")
    W = np.where(np.isfinite(grid.W), grid.W, np.nan)

    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    filled = ax.contourf(X1, X2, W, levels=24, cmap="viridis", alpha=0.85)
    fig.colorbar(filled, ax=ax, label="W")
    if len(levels):
        ax.contour(X1, X2, W, levels=sorted(levels), colors="white",
                   linewidths=0.6, alpha=0.8)
    ax.contour(X1, X2, W, levels=[1.0], colors="red", linewidths=2.0)
    ax.contour(X1, X2, grid.h, levels=[0.0], colors="black",
               linewidths=2.0, linestyles="--")
    handles = [
        plt.Line2D([], [], color="red", lw=2, label="W = 1"),
        plt.Line2D([], [], color="black", lw=2, ls="--", label="h = 0"),
    ]
    ax.legend(handles=handles, loc="upper right")
    ax.set_xlabel(grid.state_names[0])
    ax.set_ylabel(grid.state_names[1])
    ax.set_title("certificate level sets")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_trajectory(traj_csv, out_path, boundary_grid_csv=None,
                    overwrite: bool = False) -> Path:
    """State-plane path plus the V and h monitor time series.

    When a level-set grid export is supplied, its h = 0 contour is drawn under
    the path so boundary interactions are visible."""
    data = load_trajectory(traj_csv)
    out = _check_output(out_path, overwrite)

    fig, (ax_path, ax_mon) = plt.subplots(1, 2, figsize=(11, 4.6))

    if data.states.shape[1] >= 2:
        xs, ys = data.states[:, 0], data.states[:, 1]
        labels = data.state_names[:2]
    else:
        xs, ys = data.t, data.states[:, 0]
        labels = ["t", data.state_names[0]]
    if boundary_grid_csv is not None:
        grid = load_grid(boundary_grid_csv)
        X1, X2 = np.meshgrid(grid.x1, grid.x2, indexing="ij")
        ax_path.contour(X1, X2, grid.h, levels=[0.0], colors="black",
                        linewidths=1.6, linestyles="--")
    pts = ax_path.scatter(xs, ys, c=data.h, cmap="coolwarm_r", s=8)
    fig.colorbar(pts, ax=ax_path, label="h along path")
    ax_path.plot(xs, ys, color="gray", lw=0.7, alpha=0.7)
    ax_path.plot(xs[0], ys[0], "g^", ms=9, label="start")
    ax_path.plot(xs[-1], ys[-1], "ks", ms=7, label="end")
    ax_path.set_xlabel(labels[0])
    ax_path.set_ylabel(labels[1])
    ax_path.legend(loc="best")
    ax_path.set_title("closed-loop path")

    ax_mon.plot(data.t, data.V, label="V(x(t))", color="tab:blue")
    ax_mon.plot(data.t, data.h, label="h(x(t))", color="tab:red")
    ax_mon.axhline(0.0, color="black", lw=0.8)
    ax_mon.set_xlabel("t")
    ax_mon.set_title(
        f"monitors: min h = {data.h.min():.3g}, V(end)/V(0) = "
        f"{(data.V[-1] / data.V[0]) if data.V[0] else float('nan'):.3g}"
    )
    ax_mon.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_growth(growth_csv, out_path, overwrite: bool = False) -> Path:
    """Log-log scatter of |grad T| against radius with the fitted slope."""
    data = load_growth(growth_csv)
    out = _check_output(out_path, overwrite)
    slope = data.slope()

    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    ax.loglog(data.radius, data.grad_norm, "o", color="tab:blue", label="|grad T|")
    fit = np.exp(np.polyval(np.polyfit(np.log(data.radius), np.log(data.grad_norm), 1),
                            np.log(data.radius)))
    ax.loglog(data.radius, fit, "-", color="tab:orange",
              label=f"fit slope {slope:.2f}")
    ax.set_xlabel("|x|")
    ax.set_ylabel("|grad T(x)|")
    ax.set_title(f"hitting-time gradient growth (slope {slope:.4f})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


_KIND_DISPATCH = {
    "levelsets": plot_levelsets,
    "trajectory": plot_trajectory,
    "growth": plot_growth,
}


@dataclass
class PlotJob:
    """One rendering request: input file(s), plot kind, options, output path."""

    kind: str
    inputs: list
    output: str
    options: dict = field(default_factory=dict)
    overwrite: bool = False

    def run(self) -> Path:
        if self.kind not in _KIND_DISPATCH:
            raise SchemaError(f"unknown plot kind {self.kind!r}")
        fn = _KIND_DISPATCH[self.kind]
        return fn(self.inputs[0], self.output, overwrite=self.overwrite, **self.options)
