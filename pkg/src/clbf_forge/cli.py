"""Command-line surface: check-compat, simulate, hitting, build-clbf, example.

Exit codes are a contract scripts can rely on: 0 success/verified pass,
1 usage or config error, 2 verification failure, 3 runtime infeasibility of a
pointwise controller. Every run writes a manifest listing each output file
with a sha256 checksum together with the seed and flag overrides that
produced it, so results can be reproduced byte for byte. Floats are exported
in shortest round-trip decimal form.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .clbf import ClbfEvaluator, ClbfReport, VerifyTolerances, grid_to_csv, smooth_compose
from .compat import CompatError, compat_report
from .control import (
    ControllerInfeasibleError,
    closed_loop_field,
    resolve_params,
    simulate_closed_loop,
)
from .hitting import grad_T_fd, grad_hitting_time, hitting_batch_csv, hitting_time
from .model import ConfigError, EXAMPLE_NAMES, example_config, load_system

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_INFEASIBLE = 3

OUT_DIR_ENV = "CLBF_FORGE_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise _UsageError(message)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


class _Run:
    """Collects outputs and writes the run manifest."""

    def __init__(self, command: str, config: str, out_dir: Path, seed: int, overrides: dict):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.seed = seed
        self.overrides = {k: v for k, v in overrides.items() if v is not None}
        self.outputs: list[Path] = []
        self.t0 = time.time()
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.outputs.append(p)
        return p

    def finish(self):
        manifest = {
            "tool": "clbf-forge",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "overrides": self.overrides,
            "output_dir": str(self.out_dir),
            "duration_s": round(time.time() - self.t0, 6),
            "outputs": [
                {"path": str(p), "sha256": _sha256(p)} for p in self.outputs if p.exists()
            ],
        }
        (self.out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )


def _out_dir(arg_value) -> Path:
    if arg_value:
        return Path(arg_value)
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def _parse_points(text: str, n: int) -> np.ndarray:
    rows = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        vals = [float(v) for v in part.split(",")]
        if len(vals) != n:
            raise _UsageError(f"point {part!r} must have {n} coordinates")
        rows.append(vals)
    if not rows:
        raise _UsageError("no points supplied")
    return np.array(rows)


def _parse_grid(text: str, n: int) -> list[tuple[float, float, int]]:
    axes = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise _UsageError(f"grid axis {part!r} must be lo:hi:count")
        axes.append((float(bits[0]), float(bits[1]), int(bits[2])))
    if len(axes) != n:
        raise _UsageError(f"grid needs {n} axes")
    return axes


def _load(config_path: str):
    p = Path(config_path)
    if not p.exists():
        raise ConfigError(f"config file not found: {config_path}")
    return load_system(p)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_example(args) -> int:
    if args.name not in EXAMPLE_NAMES:
        print(f"unknown example {args.name!r}; choose from {', '.join(EXAMPLE_NAMES)}",
              file=sys.stderr)
        return EXIT_USAGE
    doc = example_config(args.name)
    text = json.dumps(doc, indent=2) + "\n"
    out = Path(args.out) if args.out else Path(f"{args.name}.json")
    out.write_text(text)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_check_compat(args) -> int:
    spec = _load(args.config)
    run = _Run("check-compat", args.config, _out_dir(args.out_dir), args.seed,
               {"n_interior": args.n_interior, "n_boundary": args.n_boundary,
                "bound_U": args.bound_u})
    report = compat_report(
        spec, n_interior=args.n_interior, n_boundary=args.n_boundary,
        U=args.bound_u, seed=args.seed,
    )
    run.path("compat_report.json").write_text(report.to_json() + "\n")
    run.finish()
    print(f"compatibility: {'PASS' if report.overall else 'FAIL'} "
          f"({len(report.interior)} interior, {len(report.boundary)} boundary samples; "
          f"worst boundary margin {report.worst_boundary_margin!r})")
    if not report.overall:
        for x in report.counterexamples[:10]:
            print(f"  counterexample: {[float(v) for v in x]}")
        if len(report.counterexamples) > 10:
            print(f"  ... and {len(report.counterexamples) - 10} more")
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load(args.config)
    x0 = _parse_points(args.x0, spec.n)[0]
    controller = args.controller or spec.controller
    run = _Run("simulate", args.config, _out_dir(args.out_dir), args.seed,
               {"controller": args.controller, "x0": args.x0, "t_end": args.t_end,
                "conv_tol": args.conv_tol})
    sim = simulate_closed_loop(spec, None if spec.external_mode else controller,
                               x0, args.t_end)
    csv_path = run.path(args.dump or "trajectory.csv")
    _write_sim_csv(csv_path, spec, sim)
    run.finish()
    print(f"simulated {controller} from {x0.tolist()} for t={args.t_end}: "
          f"min h={sim.min_h!r}, |x(end)|={sim.final_norm!r}, "
          f"max V increase={sim.max_V_increase!r}, decay slope={sim.decay_slope!r}")
    if sim.infeasible:
        print("controller became infeasible along the trajectory:", file=sys.stderr)
        print(f"  at x={sim.infeasible_record.x.tolist()}, "
              f"raw margin {sim.infeasible_record.raw_margin!r}", file=sys.stderr)
        return EXIT_INFEASIBLE
    safe = sim.min_h >= -args.safety_tol
    converged = sim.final_norm <= args.conv_tol
    if not (safe and converged):
        print(f"verification failed: safe={safe} converged={converged}")
        return EXIT_VERIFICATION
    return EXIT_OK


def _write_sim_csv(path: Path, spec, sim):
    names = list(spec.state_names)
    ucols = [f"u{i+1}" for i in range(spec.m)] if sim.controls is not None else []
    with open(path, "w") as fh:
        fh.write(",".join(["t", *names, *ucols, "V", "h"]) + "\n")
        for k, t in enumerate(sim.times):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in sim.states[k]]
            if sim.controls is not None:
                row += [repr(float(v)) for v in sim.controls[k]]
            row += [repr(float(sim.V_path[k])), repr(float(sim.h_path[k]))]
            fh.write(",".join(row) + "\n")


def cmd_hitting(args) -> int:
    spec = _load(args.config)
    if args.points:
        pts = _parse_points(args.points, spec.n)
    elif args.points_file:
        pts = np.loadtxt(args.points_file, delimiter=",", ndmin=2, skiprows=args.skip_rows)
        if pts.shape[1] != spec.n:
            raise ConfigError(f"points file must have {spec.n} columns")
    elif args.grid:
        axes = _parse_grid(args.grid, spec.n)
        coords = [np.linspace(lo, hi, cnt) for lo, hi, cnt in axes]
        pts = np.array([[c[i] for c, i in zip(coords, idx)]
                        for idx in np.ndindex(*[len(c) for c in coords])])
    else:
        raise _UsageError("supply --points, --points-file, or --grid")

    run = _Run("hitting", args.config, _out_dir(args.out_dir), args.seed,
               {"gradients": args.gradients or None})
    field = closed_loop_field(spec)
    results = []
    all_ok = True
    for x in pts:
        res = hitting_time(
            field, spec._h_fn, x, grad_h=spec.grad_h,
            t_max=spec.tol.t_max, r_min=spec.tol.r_min,
            rtol=spec.tol.rtol, atol=spec.tol.atol, event_tol=spec.tol.event_tol,
        )
        if res.ok and args.gradients:
            try:
                grad_hitting_time(field, spec._h_fn, x, grad_h=spec.grad_h,
                                  result=res, t_max=spec.tol.t_max,
                                  r_min=spec.tol.r_min, rtol=spec.tol.rtol,
                                  atol=spec.tol.atol)
            except Exception as exc:  # noqa: BLE001
                print(f"gradient failed at {x.tolist()}: {exc}", file=sys.stderr)
                all_ok = False
        all_ok = all_ok and res.ok
        results.append(res)
    hitting_batch_csv(run.path("hitting.csv"), results, spec.state_names)
    run.finish()
    for r in results[: args.print_rows]:
        print(f"x={r.x.tolist()} T={r.T!r} status={r.status}")
    print(f"hitting: {sum(r.ok for r in results)}/{len(results)} ok")
    return EXIT_OK if all_ok else EXIT_VERIFICATION


def cmd_build_clbf(args) -> int:
    spec = _load(args.config)
    run = _Run("build-clbf", args.config, _out_dir(args.out_dir), args.seed,
               {"grid": args.grid, "smooth_p": args.smooth_p,
                "n_boundary": args.n_boundary, "raw_v": args.raw_v or None})
    evaluator = ClbfEvaluator(spec, rtol=args.rtol, atol=args.atol)

    axes = (_parse_grid(args.grid, spec.n) if args.grid
            else [(lo, hi, args.grid_count) for lo, hi in spec.domain_box])
    evaluations = evaluator.grid(axes)
    grid_to_csv(run.path("clbf_grid.csv"), spec, evaluations)

    W_fn = None
    label = "W (unified certificate)"
    if args.raw_v:
        W_fn = spec.V
        label = "raw V (negative control)"
    elif args.smooth_p != 1.0:
        W_fn = smooth_compose(evaluator.W, args.smooth_p)
        label = f"W^{args.smooth_p}"

    report = evaluator.verify(
        W_fn,
        n_boundary=args.n_boundary, n_interior=args.n_interior,
        n_exterior=args.n_exterior, seed=args.seed,
        tolerances=VerifyTolerances(boundary=args.tol_boundary),
    )
    run.path("clbf_report.json").write_text(report.to_json() + "\n")
    run.finish()
    _print_report(label, report)
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def _print_report(label: str, report: ClbfReport):
    print(f"certificate check for {label}:")
    print(f"  level set      |W-1| on boundary max {report.boundary_max_dev!r} "
          f"-> {'ok' if report.condition_level else 'FAIL'}")
    print(f"  sublevel set   max W inside {report.interior_max_W!r}, "
          f"min W outside {report.exterior_min_W!r} "
          f"-> {'ok' if report.condition_sublevel else 'FAIL'}")
    print(f"  decrease       {len(report.decrease_failures)} failures "
          f"-> {'ok' if report.condition_decrease else 'FAIL'}")
    print(f"  max |dW/dt + omega1| residual {report.max_pde_residual!r}")
    print(f"  verdict: {'PASS' if report.passed else 'FAIL'}")


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> _Parser:
    p = _Parser(prog="clbf-forge",
                description="Certificate toolkit for safe stabilization: "
                            "compatibility checks, controllers, hitting times, "
                            "and the unified Lyapunov-barrier function.")
    p.add_argument("--version", action="version", version=f"clbf-forge {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="path to a system config (JSON)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", default=None,
                        help=f"output directory (default ${OUT_DIR_ENV} or cwd)")

    sp = sub.add_parser("example", help="write a ready-to-run example config")
    sp.add_argument("name", help=f"one of {', '.join(EXAMPLE_NAMES)}")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_example)

    sp = sub.add_parser("check-compat", help="strict CLF/CBF compatibility report")
    common(sp)
    sp.add_argument("--n-interior", type=int, default=200)
    sp.add_argument("--n-boundary", type=int, default=64)
    sp.add_argument("--bound-U", dest="bound_u", type=float, default=1.0)
    sp.set_defaults(fn=cmd_check_compat)

    sp = sub.add_parser("simulate", help="closed-loop simulation with safety monitors")
    common(sp)
    sp.add_argument("--controller", default=None,
                    help="override the config's controller tag")
    sp.add_argument("--x0", required=True, help="initial state, e.g. '0.9,0'")
    sp.add_argument("--t-end", type=float, default=10.0)
    sp.add_argument("--dump", default=None, help="trajectory CSV filename")
    sp.add_argument("--conv-tol", type=float, default=1e-3,
                    help="required |x(t_end)| for exit 0")
    sp.add_argument("--safety-tol", type=float, default=1e-6,
                    help="allowed dip of h below zero")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("hitting", help="batch boundary hitting times")
    common(sp)
    sp.add_argument("--points", default=None, help="semicolon-separated states")
    sp.add_argument("--points-file", default=None, help="CSV of states")
    sp.add_argument("--skip-rows", type=int, default=0)
    sp.add_argument("--grid", default=None, help="lo:hi:count per axis, comma-separated")
    sp.add_argument("--gradients", action="store_true",
                    help="add quotient-formula gradient columns")
    sp.add_argument("--print-rows", type=int, default=8)
    sp.set_defaults(fn=cmd_hitting)

    sp = sub.add_parser("build-clbf", help="evaluate and verify the unified certificate")
    common(sp)
    sp.add_argument("--grid", default=None,
                    help="lo:hi:count per axis, comma-separated; use the "
                         "--grid=... form when a bound is negative")
    sp.add_argument("--grid-count", type=int, default=41)
    sp.add_argument("--smooth-p", type=float, default=1.0,
                    help="power-law smoothing exponent (>= 1)")
    sp.add_argument("--n-boundary", type=int, default=64)
    sp.add_argument("--n-interior", type=int, default=60)
    sp.add_argument("--n-exterior", type=int, default=60)
    sp.add_argument("--tol-boundary", type=float, default=1e-7)
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)
    sp.add_argument("--raw-v", action="store_true",
                    help="verify the raw Lyapunov candidate instead of W "
                         "(expected to fail the level-set condition)")
    sp.set_defaults(fn=cmd_build_clbf)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ControllerInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CompatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except SystemExit as exc:  # argparse --help/--version
        code = exc.code
        return 0 if code in (None, 0) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
