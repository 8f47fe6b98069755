"""Heston put bounds over spot for several epsilon values.

    python scripts/run_figure1.py [--out out/heston] [--workers 1]

Writes figure1.csv / figure1_hedge.csv via ``gooddeal heston`` and prints
the bound spread per epsilon at a few spots.
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from gooddeal import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("out/heston"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    code = cli.main(["heston", "--out", str(args.out), "--workers", str(args.workers)])
    if code:
        raise SystemExit(code)

    spread = defaultdict(dict)
    with open(args.out / "figure1.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            spread[float(row["epsilon"])][float(row["S0"])] = (
                float(row["base"]),
                float(row["pi_u"]) - float(row["pi_l"]),
            )
    spots = (50.0, 80.0, 100.0, 120.0, 150.0)
    print("\nspread pi_u - pi_l")
    print(f"{'eps':>6}" + "".join(f"{s:>10g}" for s in spots))
    for eps in sorted(spread):
        print(f"{eps:6.2f}" + "".join(f"{spread[eps][s][1]:10.4f}" for s in spots))
    print(f"{'base':>6}" + "".join(f"{spread[0.0][s][0]:10.4f}" for s in spots))


if __name__ == "__main__":
    main()
