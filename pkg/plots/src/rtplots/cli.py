"""Console entry point.

``plots polar|contour|decay --in DIR --out DIR [--points i,j ...]
[--log]`` renders figures from a solver output directory.  Exit code 0
on success, 1 on any error; argparse usage problems exit 2 as usual.
"""

from __future__ import annotations

import argparse
import os
import sys


def _point(text: str):
    try:
        i, j = text.split(",")
        return int(i), int(j)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a point as i,j (two integers), got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from rtupwind output directories")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--in", dest="indir", required=True,
                       help="solver output directory")
        p.add_argument("--out", dest="outdir", required=True,
                       help="directory to write images into")

    p_polar = sub.add_parser(
        "polar", help="per-node direction distributions, one panel per "
                      "snapshot")
    common(p_polar)
    p_polar.add_argument("--points", nargs="+", action="extend", default=[],
                         type=_point, metavar="i,j",
                         help="spatial nodes to plot (default: grid centre)")

    p_contour = sub.add_parser(
        "contour", help="integrated-intensity contour maps")
    common(p_contour)
    p_contour.add_argument("--log", action="store_true",
                           help="logarithmically spaced contour levels")

    p_decay = sub.add_parser(
        "decay", help="residual decay of a stationary solve")
    common(p_decay)
    return parser


def main(argv=None) -> int:
    # batch rendering only; never require a display
    os.environ.setdefault("MPLBACKEND", "Agg")
    args = _build_parser().parse_args(argv)

    from .figures import PlotSpec, plot_contour, plot_decay, plot_polar
    from .inputs import PlotError

    try:
        if args.command == "polar":
            spec = PlotSpec(indir=args.indir, outdir=args.outdir,
                            kind="polar", points=tuple(args.points))
            written = plot_polar(spec)
        elif args.command == "contour":
            spec = PlotSpec(indir=args.indir, outdir=args.outdir,
                            kind="contour", log_levels=args.log)
            written = plot_contour(spec)
        else:
            spec = PlotSpec(indir=args.indir, outdir=args.outdir,
                            kind="decay")
            written, ratio = plot_decay(spec)
            print(f"fitted per-step ratio: {ratio:.17g}")
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1

    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
