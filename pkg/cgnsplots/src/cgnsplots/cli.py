"""``render_figs <manifest.json> --fig {1|2|3} --out <path>``"""

import argparse
import sys

from .figures import FigureSpec, MissingInputError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render case-study figures from a cgns run manifest")
    parser.add_argument("manifest", help="path to the run's manifest.json")
    parser.add_argument("--fig", required=True, choices=["1", "2", "3"],
                        help="which figure to render")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(manifest_path=args.manifest, out_path=args.out,
                      fig_id=f"fig{args.fig}", style={"dpi": args.dpi})
    try:
        result = render(spec)
    except MissingInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} ({result.n_panels} panels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
