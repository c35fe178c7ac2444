"""``figures <csv> --param <label> --out <path>``"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FigureSpec, SchemaError, render_sweep


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="figures", description=__doc__)
    parser.add_argument("csv", type=Path, help="sweep CSV produced by softprice")
    parser.add_argument("--param", required=True, help="axis label for the swept parameter")
    parser.add_argument("--out", type=Path, required=True, help="output image (vector formats recommended)")
    args = parser.parse_args(argv)

    try:
        path = render_sweep(FigureSpec(args.csv, args.param, args.out))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
