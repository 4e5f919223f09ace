"""Standalone entry point: minorlab-plot <kind> <csv...> -o out.png"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, plot
from .schemas import SchemaError


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="minorlab-plot", description=__doc__)
    ap.add_argument("kind", choices=sorted(KINDS))
    ap.add_argument("inputs", nargs="+", help="CSV files in the documented schema")
    ap.add_argument("-o", "--output", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        plot(args.kind, args.inputs, args.output)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
