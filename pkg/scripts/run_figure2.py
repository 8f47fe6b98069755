"""Uncertain-drift call bounds on a non-traded asset, four panels.

    python scripts/run_figure2.py [--out out/figure2]

Writes one CSV per panel via ``gooddeal figure2`` and prints, per curve,
the correlation maximizing the upper bound and the widest spread.
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from gooddeal import cli, config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("out/figure2"))
    args = ap.parse_args()
    code = cli.main(["figure2", "--out", str(args.out)])
    if code:
        raise SystemExit(code)

    for panel in config.default_config("figure2").panels:
        curves = defaultdict(list)
        with open(args.out / f"figure2_{panel.name}.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                curves[float(row[panel.series])].append(
                    (float(row[panel.sweep]), float(row["pi_u"]), float(row["pi_l"]))
                )
        print(f"\npanel {panel.name} ({panel.sweep} sweep, fixed {panel.fixed})")
        for val, pts in sorted(curves.items()):
            top = max(pts, key=lambda p: p[1])
            wide = max(pts, key=lambda p: p[1] - p[2])
            print(f"  {panel.series} = {val:<5g} max pi_u {top[1]:.4f} at {panel.sweep} = {top[0]:+.2f};"
                  f" widest spread {wide[1] - wide[2]:.4f} at {wide[0]:+.2f}")


if __name__ == "__main__":
    main()
