"""Regenerate the frozen Monte Carlo reference values in tests/data/oracles.json.

Every number here comes from plain simulation, with no call into the
package's pricing formulas:

* GBM call at spot = strike, vol * sqrt(tau) = 0.2, 10^7 paths;
* exchange option (geometric basket) under the constant worst-case
  kernel, 10^7 paths of the exact Gaussian terminal law;
* Heston put, Figure-1 parameters, 10^6 paths with 500 exact-variance steps.

Usage: python scripts/make_oracles.py  (about two minutes)
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import gbm_call_mc, heston_log_return_mc  # noqa: E402

SEED = 20240611


def table1_arrays():
    sigmaS = np.array([[0.5, 0.2], [0.0, 0.4]])
    beta = np.array([[0.3, 0.4, 0.2, 0.5], [0.5, 0.7, 0.3, 0.4]])
    gamma = np.array([0.1, 0.3])
    a = np.array([0.5, 0.65, 0.8, 0.95])
    return sigmaS, beta, gamma, a, 0.3


def exchange_mc(paths: int, seed: int, chunk: int = 1_000_000):
    """Upper bound of (geo(H_T) - geo(S_T))^+ under the constant kernel lambda.

    With zero market price of risk the optimal kernel is
    h A^-1 P b / |P b|_{A^-1}, where P zeroes the traded coordinates and b
    is the volatility of the geometric H average; it is constant because
    the payoff's risk exposure in the kernel directions keeps one sign.
    """
    sigmaS, beta, gamma, a, h = table1_arrays()
    d, n = 2, 4
    vol = np.zeros((n, n))
    vol[:d, :d] = sigmaS
    vol[d:] = beta
    b = beta.mean(axis=0)
    pb = b.copy()
    pb[:d] = 0.0
    lam = h * pb / a / np.sqrt(np.sum(pb**2 / a))
    drift = np.concatenate([np.zeros(d), gamma]) - 0.5 * np.sum(vol**2, axis=1) + vol @ lam
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        W = rng.standard_normal((m, n))
        X = drift + W @ vol.T  # log-states at T = 1, started at 0
        pay = np.maximum(np.exp(X[:, d:].mean(axis=1)) - np.exp(X[:, :d].mean(axis=1)), 0.0)
        s1 += pay.sum()
        s2 += (pay * pay).sum()
        done += m
    mean = s1 / paths
    return mean, float(np.sqrt((s2 / paths - mean * mean) / paths))


def main():
    out = {}
    m, se = gbm_call_mc(1.0, 1.0, 0.2, 1.0, 10_000_000, SEED)
    out["gbm_call_atm_sd0.2"] = {"paths": 10_000_000, "mean": m, "se": se}
    m, se = exchange_mc(10_000_000, SEED + 1)
    out["table1_exchange_upper"] = {"paths": 10_000_000, "mean": m, "se": se}
    x = heston_log_return_mc(0.12, 3.0, 0.3, -0.7, 0.04, 10.0, 1_000_000, 500, SEED + 2)
    rows = {}
    for S0 in (60.0, 100.0, 140.0):
        pay = np.maximum(100.0 - S0 * np.exp(x), 0.0)
        rows[f"{S0:g}"] = {"mean": float(pay.mean()), "se": float(pay.std(ddof=1) / np.sqrt(len(pay)))}
    out["heston_fig1_put_K100_T10"] = {"paths": 1_000_000, "steps": 500, "by_S0": rows}
    path = ROOT / "tests" / "data" / "oracles.json"
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
