"""Command-line entry point for the figure scripts.

Usage::

    qmonitor-plots joint-marginals --trajectories runs/monitor/trajectories.csv \
        [--results runs/monitor/results.json] --output fig1.png
    qmonitor-plots delta-gamma --sweep runs/sweep-gamma/sweep.csv --output fig2.png
    qmonitor-plots haar-decay --haar runs/haar/haar.csv --output fig3.png

Exit codes: 0 success, 1 usage or schema error.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, SchemaError, render

_INPUT_FLAGS = {
    "joint-marginals": [("trajectories", True), ("results", False)],
    "delta-gamma": [("sweep", True)],
    "haar-decay": [("haar", True)],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="qmonitor-plots",
                     description="Render figures from qmonitor CSV/JSON outputs.")
    sub = parser.add_subparsers(dest="panel", parser_class=_Parser)
    for panel, flags in _INPUT_FLAGS.items():
        p = sub.add_parser(panel)
        for name, required in flags:
            p.add_argument(f"--{name}", required=required)
        p.add_argument("--output", required=True)
        p.add_argument("--xlabel", default=None)
        p.add_argument("--ylabel", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.panel is None:
            parser.print_help(sys.stderr)
            return 1
        inputs = {name: getattr(args, name)
                  for name, _ in _INPUT_FLAGS[args.panel]
                  if getattr(args, name) is not None}
        labels = {}
        if args.xlabel is not None:
            labels["x"] = args.xlabel
        if args.ylabel is not None:
            labels["y"] = args.ylabel
        spec = FigureSpec(panel=args.panel, inputs=inputs, output=args.output,
                          labels=labels)
        path = render(spec)
        print(path)
        return 0
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
