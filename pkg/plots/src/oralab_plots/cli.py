"""Standalone figure scripts: render a result CSV to an image.

Usage:
    oralab-plot fig1 --csv fig1.csv --out fig1.png
    oralab-plot custom --csv rows.csv --series bound --out rows.png
"""

from __future__ import annotations

import argparse
import sys

from .figures import PRESETS, FigureSpec, SchemaError, preset_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oralab-plot", description=__doc__)
    parser.add_argument(
        "figure",
        choices=sorted(PRESETS) + ["custom"],
        help="named preset matching the experiment manifests, or 'custom'",
    )
    parser.add_argument("--csv", required=True, help="input result CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--series",
        nargs="+",
        default=["bound"],
        help="columns to plot (custom figures only)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.figure == "custom":
            spec = FigureSpec(
                csv_path=args.csv,
                x_column="sweep_value",
                series_columns=tuple(args.series),
                output_path=args.out,
            )
        else:
            spec = preset_spec(args.figure, args.csv, args.out)
        out = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
