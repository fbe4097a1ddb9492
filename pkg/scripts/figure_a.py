#!/usr/bin/env python3
"""Draw the two-level example paths (x = 7 and x = 10) and check the passage-time equality.

Usage: python3 scripts/figure_a.py [--seed N] [--out DIR]
"""

import argparse
import json
from pathlib import Path

from lcftax.cli import figure_a


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out/figure_a"))
    args = parser.parse_args()
    ok = True
    for variant in (1, 2):
        report = figure_a(variant, args.seed, args.out / f"variant{variant}")
        ok &= report["passage_times_equal"]
        print(json.dumps(report, sort_keys=True))
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
