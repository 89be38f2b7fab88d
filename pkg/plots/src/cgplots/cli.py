"""Command-line entry point: render figures described by plot-spec files."""

from __future__ import annotations

import argparse
import sys

from .errors import PlotError
from .render import render
from .spec import load_plot_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgplots",
        description="Render PNG figures from benchmark run and sweep CSV logs",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    plot = commands.add_parser("plot", help="render one figure from a spec file")
    plot.add_argument(
        "--spec", required=True, help="path to a 'key = value' plot-spec file"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = render(load_plot_spec(args.spec))
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
