"""plotkit tests render from fixture CSVs written by the tests themselves
(analytic forms of the linear reference system), keeping the package fully
decoupled from the toolkit that normally produces the files."""

import numpy as np
import pytest

from plotkit import (
    PlotJob,
    SchemaError,
    contour_vertices,
    load_grid,
    load_growth,
    load_trajectory,
    plot_growth,
    plot_levelsets,
    plot_trajectory,
)
from plotkit.cli import main as cli_main


# ---------------------------------------------------------------------------
# fixtures: analytic linear-reference exports


def write_linear_grid(path, n=41, lo=-1.5, hi=1.5):
    xs = np.linspace(lo, hi, n)
    with open(path, "w") as fh:
        fh.write("x1,x2,h,V,W,omega1,region,status\n")
        for a in xs:
            for b in xs:
                r2 = float(a * a + b * b)
                h = 1.0 - r2
                region = "inside" if h > 1e-3 else ("outside" if h < -1e-3 else "boundary")
                row = [float(a), float(b), h, r2 / 2, r2, 2 * r2]
                fh.write(",".join(repr(v) for v in row) + f",{region},ok\n")
    return path


def write_linear_trajectory(path, x0=(0.9, 0.0), t_end=6.0, n=200):
    ts = np.linspace(0.0, t_end, n)
    with open(path, "w") as fh:
        fh.write("t,x1,x2,u1,u2,V,h\n")
        for t in ts:
            x = np.exp(-t) * np.asarray(x0)
            r2 = float(x @ x)
            row = [float(t), float(x[0]), float(x[1]), float(-x[0]), float(-x[1]),
                   r2 / 2, 1 - r2]
            fh.write(",".join(repr(v) for v in row) + "\n")
    return path


def write_linear_growth(path, k=10):
    radii = 0.8 * 2.0 ** (-np.arange(k, dtype=float))
    with open(path, "w") as fh:
        fh.write("radius,grad_norm,T\n")
        for r in radii:
            fh.write(f"{float(r)!r},{float(1.0 / r)!r},{float(np.log(r))!r}\n")
    return path


# ---------------------------------------------------------------------------
# loaders and schema enforcement


def test_grid_loader_shapes(tmp_path):
    grid = load_grid(write_linear_grid(tmp_path / "grid.csv", n=11))
    assert grid.W.shape == (11, 11)
    assert grid.state_names == ["x1", "x2"]
    center = grid.W[5, 5]
    assert center == pytest.approx(0.0)


def test_grid_loader_rejects_bad_schema(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,W\n0,0,0\n")
    with pytest.raises(SchemaError, match="expected columns"):
        load_grid(p)


def test_grid_loader_rejects_non_2d(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,x3,h,V,W,omega1,region,status\n0,0,0,1,0,0,0,inside,ok\n")
    with pytest.raises(SchemaError, match="2-dimensional"):
        load_grid(p)


def test_grid_loader_rejects_ragged_lattice(tmp_path):
    p = tmp_path / "bad.csv"
    rows = ["x1,x2,h,V,W,omega1,region,status"]
    rows += ["0.0,0.0,1.0,0.0,0.0,0.0,inside,ok",
             "0.0,1.0,0.0,0.5,1.0,2.0,boundary,ok",
             "1.0,0.0,0.0,0.5,1.0,2.0,boundary,ok"]
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(SchemaError, match="lattice"):
        load_grid(p)


def test_trajectory_loader(tmp_path):
    data = load_trajectory(write_linear_trajectory(tmp_path / "traj.csv"))
    assert data.state_names == ["x1", "x2"]
    assert data.t[0] == 0.0
    assert data.h.min() >= 0.18


def test_trajectory_loader_rejects_missing_monitors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x1,x2\n0,1,0\n")
    with pytest.raises(SchemaError, match="expected columns"):
        load_trajectory(p)


def test_trajectory_loader_rejects_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(SchemaError, match="empty"):
        load_trajectory(p)
    p.write_text("t,x1,x2,V,h\n")
    with pytest.raises(SchemaError, match="no data"):
        load_trajectory(p)


def test_growth_loader_and_slopes(tmp_path):
    data = load_growth(write_linear_growth(tmp_path / "g.csv"))
    assert data.slope() == pytest.approx(-1.0, abs=1e-12)
    assert data.T_slope() == pytest.approx(1.0, abs=1e-12)


def test_growth_loader_rejects_single_point(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("radius,grad_norm,T\n0.5,2.0,-0.69\n")
    with pytest.raises(SchemaError, match="at least two"):
        load_growth(p)


# ---------------------------------------------------------------------------
# renderers


def test_levelset_plot_renders_and_curves_coincide(tmp_path):
    grid_csv = write_linear_grid(tmp_path / "grid.csv", n=41)
    out = plot_levelsets(grid_csv, tmp_path / "levelsets.png")
    assert out.exists() and out.stat().st_size > 0

    # the W = 1 and h = 0 contours must coincide to within one grid cell
    grid = load_grid(grid_csv)
    w_curve = contour_vertices(grid.x1, grid.x2, grid.W, 1.0)
    h_curve = contour_vertices(grid.x1, grid.x2, grid.h, 0.0)
    assert len(w_curve) and len(h_curve)
    cell = float(grid.x1[1] - grid.x1[0])
    worst = 0.0
    for p in w_curve[:: max(1, len(w_curve) // 100)]:
        d = np.min(np.linalg.norm(h_curve - p, axis=1))
        worst = max(worst, float(d))
    assert worst < cell, f"contour separation {worst} exceeds one cell {cell}"


def test_trajectory_plot_renders(tmp_path):
    traj_csv = write_linear_trajectory(tmp_path / "traj.csv")
    grid_csv = write_linear_grid(tmp_path / "grid.csv", n=21)
    out = plot_trajectory(traj_csv, tmp_path / "traj.png", boundary_grid_csv=grid_csv)
    assert out.exists() and out.stat().st_size > 0


def test_growth_plot_renders_with_slope_annotation(tmp_path):
    out = plot_growth(write_linear_growth(tmp_path / "g.csv"), tmp_path / "g.png")
    assert out.exists() and out.stat().st_size > 0


def test_inputs_are_never_modified(tmp_path):
    grid_csv = write_linear_grid(tmp_path / "grid.csv", n=21)
    before = grid_csv.read_bytes() if hasattr(grid_csv, "read_bytes") else open(grid_csv, "rb").read()
    plot_levelsets(grid_csv, tmp_path / "a.png")
    after = open(grid_csv, "rb").read()
    assert before == after


def test_output_collision_requires_overwrite(tmp_path):
    grid_csv = write_linear_grid(tmp_path / "grid.csv", n=21)
    out = tmp_path / "plot.png"
    plot_levelsets(grid_csv, out)
    with pytest.raises(FileExistsError):
        plot_levelsets(grid_csv, out)
    plot_levelsets(grid_csv, out, overwrite=True)  # explicit flag allows it


# ---------------------------------------------------------------------------
# job wrapper and CLI


def test_plotjob_dispatch(tmp_path):
    grid_csv = write_linear_grid(tmp_path / "grid.csv", n=21)
    job = PlotJob(kind="levelsets", inputs=[str(grid_csv)], output=str(tmp_path / "j.png"))
    assert job.run().exists()
    bad = PlotJob(kind="mystery", inputs=[str(grid_csv)], output="x.png")
    with pytest.raises(SchemaError, match="unknown plot kind"):
        bad.run()


def test_cli_three_kinds(tmp_path):
    grid = str(write_linear_grid(tmp_path / "grid.csv", n=21))
    traj = str(write_linear_trajectory(tmp_path / "traj.csv"))
    growth = str(write_linear_growth(tmp_path / "g.csv"))
    assert cli_main(["levelsets", "--in", grid, "--out", str(tmp_path / "1.png")]) == 0
    assert cli_main(["trajectory", "--in", traj, "--out", str(tmp_path / "2.png"),
                     "--boundary-grid", grid]) == 0
    assert cli_main(["growth", "--in", growth, "--out", str(tmp_path / "3.png")]) == 0


def test_cli_error_codes(tmp_path):
    grid = str(write_linear_grid(tmp_path / "grid.csv", n=21))
    assert cli_main(["levelsets"]) == 1  # missing --in
    assert cli_main(["levelsets", "--in", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "x.png")]) == 2
    out = str(tmp_path / "dup.png")
    assert cli_main(["levelsets", "--in", grid, "--out", out]) == 0
    assert cli_main(["levelsets", "--in", grid, "--out", out]) == 2  # collision
    assert cli_main(["levelsets", "--in", grid, "--out", out, "--overwrite"]) == 0
