"""Command-line chart renderer for benchmark timeline CSVs."""

from __future__ import annotations

import argparse
import sys

from .plotting import PlotSpec, SchemaError, plot_timeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphindex-plot",
        description="Render benchmark timeline CSVs into a line chart "
                    "(one series per policy label).",
    )
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="FILE", help="input CSV file(s)")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="output image path (format from suffix, e.g. .png)")
    parser.add_argument("--logx", action="store_true", help="log-scale the time axis")
    parser.add_argument("--linear-y", action="store_true",
                        help="linear latency axis (default is log)")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        inputs=args.inputs,
        output=args.out,
        log_x=args.logx,
        log_y=not args.linear_y,
        title=args.title,
    )
    try:
        points = plot_timeline(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"plotted {points} points to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
