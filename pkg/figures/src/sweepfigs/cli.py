"""Command line: render one sweep figure per invocation."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .figures import FIGURES, FigureError, FigureSpec, render

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sweepfigs",
        description="Render utility and delay-jitter figures from a scheduler sweep CSV.",
    )
    parser.add_argument("--csv", required=True, metavar="PATH", help="sweep CSV file")
    parser.add_argument(
        "--figure",
        required=True,
        choices=FIGURES,
        help="which figure to render",
    )
    parser.add_argument(
        "--out", required=True, metavar="PATH", help="output image file"
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(FigureSpec(Path(args.csv), args.figure, Path(args.out)))
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
