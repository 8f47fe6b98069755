"""Reproduce the four-asset exchange-option table.

    python scripts/run_table1.py [--out out/table1] [--workers 1] [--ladder]

Writes the same CSVs as ``gooddeal table1`` and prints exact vs Monte Carlo
values with relative errors. ``--ladder`` additionally runs three
(N, M, K_per_dim) refinements and prints the median absolute Y0 error of
each against both exact conventions.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from gooddeal import cli, config

LADDER = ((4, 25_000, 3), (8, 50_000, 6), (16, 100_000, 12))


def read_summary(path: Path) -> dict[str, np.ndarray]:
    rows = {}
    for line in path.read_text().splitlines()[1:]:
        label, *vals = line.split(",")
        rows[label] = np.array([float(v) for v in vals])
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("out/table1"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--ladder", action="store_true")
    args = ap.parse_args()

    code = cli.main(["table1", "--out", str(args.out), "--workers", str(args.workers)])
    if code:
        raise SystemExit(code)
    rows = read_summary(args.out / "table1_summary.csv")
    names = ["Y0", "Z0_1", "Z0_2", "Z0_3", "Z0_4"]
    print(f"\n{'':8}" + "".join(f"{n:>10}" for n in names))
    for label in ("exact", "mean", "rel_rmse"):
        print(f"{label:8}" + "".join(f"{v:10.4f}" for v in rows[label][:5]))
    rel = np.abs(rows["mean"][:5] - rows["exact"][:5]) / rows["exact"][:5]
    print(f"{'rel err':8}" + "".join(f"{v:10.2%}" for v in rel))

    if args.ladder:
        base = config.default_config("table1")
        print("\nN       M   K  median|err| printed  median|err| numeraire")
        for N, M, K in LADDER:
            cfg = replace(base, workers=args.workers, solver=replace(base.solver, N=N, M=M, K_per_dim=K, R=9))
            out = args.out / f"ladder_N{N}"
            cfg_path = args.out / f"ladder_N{N}.json"
            cfg_path.write_text(config.dumps(cfg), encoding="utf-8")
            cli.main(["table1", "--config", str(cfg_path), "--out", str(out)])
            runs = np.loadtxt(out / "table1_runs.csv", delimiter=",", skiprows=1)[:, 1]
            ex = read_summary(out / "table1_summary.csv")
            e1 = np.median(np.abs(runs - ex["exact"][0]))
            e2 = np.median(np.abs(runs - ex["exact_numeraire"][0]))
            print(f"{N:<3}{M:>7}{K:>4}  {e1:20.4f}  {e2:22.4f}")


if __name__ == "__main__":
    main()
