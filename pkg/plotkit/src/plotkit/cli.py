"""plotkit command line: render toolkit exports to raster images.

    plotkit levelsets  --in grid.csv        [--out levelsets.png] [--levels ...]
    plotkit trajectory --in trajectory.csv  [--out trajectory.png] [--boundary-grid g.csv]
    plotkit growth     --in growth.csv      [--out growth.png]

Exit codes: 0 rendered, 1 usage error, 2 schema/validation error.
"""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .plots import PlotJob


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> _Parser:
    p = _Parser(prog="plotkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="kind", required=True)
    for kind, default_out in (("levelsets", "levelsets.png"),
                              ("trajectory", "trajectory.png"),
                              ("growth", "growth.png")):
        sp = sub.add_parser(kind)
        sp.add_argument("--in", dest="input", required=True, help="input CSV")
        sp.add_argument("--out", default=default_out, help="output image path")
        sp.add_argument("--overwrite", action="store_true",
                        help="replace the output file if it exists")
        if kind == "levelsets":
            sp.add_argument("--levels", default=None,
                            help="comma-separated extra W contour levels")
        if kind == "trajectory":
            sp.add_argument("--boundary-grid", default=None,
                            help="grid CSV whose h = 0 contour is drawn under the path")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        options = {}
        if args.kind == "levelsets" and args.levels:
            options["levels"] = [float(v) for v in args.levels.split(",")]
        if args.kind == "trajectory" and args.boundary_grid:
            options["boundary_grid_csv"] = args.boundary_grid
        job = PlotJob(kind=args.kind, inputs=[args.input], output=args.out,
                      options=options, overwrite=args.overwrite)
        out = job.run()
        print(f"wrote {out}")
        return 0
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileExistsError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
