"""Command-line front end.

    gooddeal table1|heston|figure2|closedform|validate
             [--config FILE] [--out DIR] [--seed N] [--workers N] [--exact-only]

Without ``--config`` the built-in defaults for the command are used
(identical to the JSON files under ``gooddeal/configs``). Flags override
file values. Exit status: 0 success, 1 validation failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, GoodDealError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _write(out: Path, files: dict[str, str]) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        p = out / name
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(p)
    return written


# -- builders ---------------------------------------------------------------


def _basket(cfg):
    from .closedform import BasketModel

    b = cfg.basket
    return BasketModel(b.sigmaS, b.beta, b.gamma, b.S0, b.H0)


def _closed_form(cfg, convention=None):
    from .closedform import gd_call_on_nontraded, gd_exchange_option

    basket, o, c = _basket(cfg), cfg.option, cfg.constraint
    if o.kind == "exchange":
        return gd_exchange_option(basket, c.a, c.h, 0.0, o.T, convention=convention or o.convention)
    return gd_call_on_nontraded(basket, c.a, c.h, o.strike, 0.0, o.T)


def _columns(n):
    return ["Y0"] + [f"Z0_{i + 1}" for i in range(n)] + [f"phi0_{i + 1}" for i in range(n)]


# -- commands ---------------------------------------------------------------


def cmd_table1(cfg) -> tuple[dict[str, str], str]:
    from .bsde import BSDEExperiment, SolverSettings, run_experiment

    basket = _basket(cfg)
    n = basket.n
    exact = _closed_form(cfg)
    consistent = _closed_form(cfg, convention="numeraire")
    ref_row = [exact.pi_u, *exact.z, *exact.phi_bar]
    rows = [
        ["exact", *ref_row],
        ["exact_numeraire", consistent.pi_u, *consistent.z, *consistent.phi_bar],
    ]
    files = {}
    lines = [
        f"experiment: {cfg.experiment} ({cfg.option.kind}, T={cfg.option.T})",
        f"exact Y0 = {fmt(exact.pi_u)}  Z0 = {' '.join(fmt(v) for v in exact.z)}",
        f"exact phi0 = {' '.join(fmt(v) for v in exact.phi_bar)}",
        f"numeraire-consistent Y0 = {fmt(consistent.pi_u)}",
    ]
    if not cfg.exact_only:
        s = cfg.solver
        exp = BSDEExperiment(
            basket=basket,
            a=tuple(cfg.constraint.a),
            h=cfg.constraint.h,
            T=cfg.option.T,
            payoff=cfg.option.kind,
            strike=cfg.option.strike,
            solver=SolverSettings(
                M=s.M, N=s.N, K_per_dim=s.K_per_dim, R=s.R, seed=cfg.seed, picard_iters=s.picard_iters,
                scheme=s.scheme, features=s.features, antithetic=s.antithetic, workers=cfg.workers,
            ),
            reference={"Y0": exact.pi_u, "Z0": exact.z, "phi0": exact.phi_bar},
        )
        res = run_experiment(exp)
        run_rows = [
            [r, res.runs["Y0"][r], *res.runs["Z0"][r], *res.runs["phi0"][r]] for r in range(s.R)
        ]
        files["table1_runs.csv"] = csv_text(["run", *_columns(n)], run_rows)
        for label, table in (("mean", res.mean), ("rmse", res.rmse), ("rel_rmse", res.rel_rmse)):
            rows.append([label, table["Y0"], *table["Z0"], *table["phi0"]])
        lines += [
            f"runs R={s.R}, M={s.M}, N={s.N}, K_per_dim={s.K_per_dim}, scheme={s.scheme}, features={s.features}",
            f"mean Y0 = {fmt(res.mean['Y0'])}  rel_rmse = {fmt(res.rel_rmse['Y0'])}",
            f"mean Z0 = {' '.join(fmt(v) for v in res.mean['Z0'])}",
            f"wall clock: {res.wall_clock:.1f} s",
        ]
    files["table1_summary.csv"] = csv_text(["row", *_columns(n)], rows)
    return files, "\n".join(lines) + "\n"


def cmd_closedform(cfg) -> tuple[dict[str, str], str]:
    res = _closed_form(cfg)
    n = len(res.z)
    rows = [["pi_u", res.pi_u], ["pi_l", res.pi_l]]
    rows += [[f"phi_bar_{i + 1}", v] for i, v in enumerate(res.phi_bar)]
    rows += [[f"Z_{i + 1}", v] for i, v in enumerate(res.z)]
    text = f"{cfg.option.kind}: pi_u = {fmt(res.pi_u)}, pi_l = {fmt(res.pi_l)} (n = {n})\n"
    return {"closedform.csv": csv_text(["quantity", "value"], rows)}, text


def cmd_heston(cfg) -> tuple[dict[str, str], str]:
    from .heston import FIGURE1_COLUMNS, HestonParams, figure1_data, gd_put_hedge

    h = cfg.heston
    base = HestonParams(h.a, h.b, h.beta, h.rho, h.nu0, 100.0)
    grid = h.S0.values()
    rows = figure1_data(base, h.K, h.T, h.epsilons, grid, cfg.workers)
    hedge_rows = [
        (s, e, gd_put_hedge(replace(base, S0=s, epsilon=e), h.K, h.T)) for e in h.epsilons for s in grid
    ]
    files = {
        "figure1.csv": csv_text(FIGURE1_COLUMNS, rows),
        "figure1_hedge.csv": csv_text(("S0", "epsilon", "phi_bar"), hedge_rows),
    }
    bad = [r for r in rows if not np.isnan(r[3]) and not (r[3] <= r[4] <= r[2])]
    text = f"{len(rows)} bound rows over {len(grid)} spot values; ordering violations: {len(bad)}\n"
    return files, text


def cmd_figure2(cfg) -> tuple[dict[str, str], str]:
    from .closedform import Figure2Panel, UncertainPairModel, figure2_data

    p = cfg.pair
    template = UncertainPairModel(p.sigmaS, p.beta, p.gamma, H0=p.H0, S0=p.S0, K=p.K, T=p.T)
    files, lines = {}, []
    for pb in cfg.panels:
        panel = Figure2Panel(pb.name, pb.sweep, tuple(pb.grid.values()), pb.series, tuple(pb.series_values), dict(pb.fixed))
        rows = figure2_data(template, [panel])
        body = [(r[2], r[4], r[5], r[6]) for r in rows]
        files[f"figure2_{pb.name}.csv"] = csv_text((pb.sweep, pb.series, "pi_u", "pi_l"), body)
        lines.append(f"panel {pb.name}: {len(body)} rows ({pb.sweep} sweep, one curve per {pb.series})")
    return files, "\n".join(lines) + "\n"


def cmd_validate(cfg) -> tuple[dict[str, str], str, bool]:
    from .validation import run_validation

    results = run_validation(cfg.seed, cfg.checks.instances)
    lines = []
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        lines.append(f"{status} {r.name}: {r.passed}/{r.passed + r.failed} (worst error {r.worst:.3e})")
    total_fail = sum(r.failed for r in results)
    total = sum(r.passed + r.failed for r in results)
    ok = all(r.ok for r in results)
    lines.append(f"{'ALL PASS' if ok else 'FAILURES'}: {total - total_fail}/{total} instances passed")
    text = "\n".join(lines) + "\n"
    return {"validate.txt": text}, text, ok


COMMANDS = {
    "table1": cmd_table1,
    "heston": cmd_heston,
    "figure2": cmd_figure2,
    "closedform": cmd_closedform,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gooddeal", description="Good-deal bounds: experiments and checks.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON config file (defaults to the built-in one)")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--seed", type=int, help="top-level seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, help="worker processes")
    ap.add_argument("--exact-only", action="store_true", help="closed-form values only, no simulation")
    return ap


def resolve_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.default_config(args.command)
    allowed = cfgmod.COMMAND_EXPERIMENTS[args.command]
    if cfg.experiment not in allowed:
        raise ConfigError(f"experiment: command {args.command!r} expects one of {allowed}, got {cfg.experiment!r}")
    over = {}
    if args.out is not None:
        over["output"] = str(args.out)
    if args.seed is not None:
        over["seed"] = args.seed
    if args.workers is not None:
        over["workers"] = args.workers
    if args.exact_only:
        over["exact_only"] = True
    if over:
        cfg = replace(cfg, **over)
        cfgmod.validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GoodDealError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    ok = True
    if args.command == "validate":
        files, text, ok = out
    else:
        files, text = out
    files["summary.txt"] = text
    _write(Path(cfg.output), files)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
