"""Command line entry point: render --in CSV --kind KIND --out IMG."""

import argparse
import sys

from .render import KINDS, MissingColumnsError, load_table, render_kind, save_figure


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render an mpaqkd CSV report to an image file.",
    )
    parser.add_argument("--in", dest="source", required=True, metavar="CSV",
                        help="input CSV report")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS),
                        help="figure kind")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (format from the extension)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        table = load_table(args.source)
    except OSError as exc:
        print(f"cannot read {args.source}: {exc}", file=sys.stderr)
        return 2
    try:
        fig = render_kind(args.kind, table)
    except MissingColumnsError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    save_figure(fig, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
