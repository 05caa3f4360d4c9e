"""emubench-fig: render one figure per invocation from CSV/GED inputs."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureDataError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emubench-fig", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV path(s), or prediction+target GED dirs for maps")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--metric", default="rmse_spatial",
                        help="metric column for iv-sweep figures")
    parser.add_argument("--linear-x", action="store_true",
                        help="linear instead of log realization axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=args.inputs, out=args.out,
                      metric=args.metric, log_x=not args.linear_x)
    try:
        report = render(spec)
    except FigureDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for i, panel in enumerate(report.panels):
        print(f"panel {i}: lines={panel['lines']} bands={panel['bands']} "
              f"images={panel['images']}")
    print(f"wrote {report.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
