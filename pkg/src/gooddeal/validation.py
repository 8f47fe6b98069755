"""Fast randomized property checks behind ``gooddeal validate``.

Each check draws its own instances from a generator seeded by
``(seed, check index)`` and counts passes and failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import closedform, generators, heston
from .model import (
    EllipsoidConstraint,
    MarketModel,
    UncertaintyEllipsoid,
    alpha_prime,
    make_projections,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: int
    failed: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.failed == 0


def random_spd(rng: np.random.Generator, k: int, floor: float = 0.2) -> np.ndarray:
    G = rng.normal(size=(k, k))
    return G @ G.T / k + floor * np.eye(k)


def random_instance(rng: np.random.Generator, n: int, d: int, *, separable: bool = True, xi_scale: float = 0.6):
    """Random (model, A, B, projections) with A and B leaving Ker sigma invariant.

    |xi0|_A is ``xi_scale * h`` times a uniform factor, so the growth
    condition holds with margin.
    """
    sigma = rng.normal(size=(d, n))
    tmp = MarketModel(sigma, np.zeros(n))
    proj = make_projections(tmp)
    Q = np.hstack([proj.im_basis, proj.ker_basis])

    def block_spd():
        M = np.zeros((n, n))
        M[:d, :d] = random_spd(rng, d)
        M[d:, d:] = random_spd(rng, n - d)
        out = Q @ M @ Q.T
        return 0.5 * (out + out.T)

    A = block_spd() if separable else random_spd(rng, n)
    B = block_spd()
    h = float(rng.uniform(0.2, 1.0))
    x = proj.im_basis @ rng.normal(size=d)
    x_norm = np.sqrt(x @ A @ x)
    xi0 = x / x_norm * h * xi_scale * rng.uniform(0.05, 1.0)
    model = MarketModel(sigma, xi0)
    delta = float(rng.uniform(0.0, 1.5) * np.linalg.norm(xi0))
    return model, EllipsoidConstraint(A, h), UncertaintyEllipsoid(B, delta), proj


def _check(name, fn: Callable[[np.random.Generator], float], count, rng, tol) -> CheckResult:
    passed = failed = 0
    worst = 0.0
    for _ in range(count):
        try:
            err = float(fn(rng))
        except Exception:  # noqa: BLE001 - any exception counts as a failed instance
            err = np.inf
        worst = max(worst, err)
        if err <= tol:
            passed += 1
        else:
            failed += 1
    return CheckResult(name, passed, failed, worst)


def _projectors(rng):
    n = int(rng.integers(2, 7))
    d = int(rng.integers(1, n))
    sigma = rng.normal(size=(d, n))
    p = make_projections(MarketModel(sigma, np.zeros(n)))
    I = np.eye(n)
    return max(
        np.abs(p.pi @ p.pi - p.pi).max(),
        np.abs(p.pi_perp @ p.pi_perp - p.pi_perp).max(),
        np.abs(p.pi + p.pi_perp - I).max(),
        np.abs(p.pi - p.pi.T).max(),
        np.abs(p.pi @ p.pi_perp).max(),
        np.abs(sigma @ p.pi_perp).max(),
    )


def _alpha_order(rng):
    lemma, exact = alpha_prime(EllipsoidConstraint(random_spd(rng, int(rng.integers(1, 6))), 1.0))
    return max(lemma - exact, 0.0)


def _boundary_max(rng):
    """Closed-form ellipse maximizer against a dense boundary sweep in the plane."""
    A = random_spd(rng, 2)
    h = float(rng.uniform(0.1, 2.0))
    z = rng.normal(size=2)
    res = generators.maximize_linear_over_ellipsoid(z, EllipsoidConstraint(A, h))
    L = np.linalg.cholesky(A)
    ang = np.linspace(0.0, 2 * np.pi, 20001)
    pts = h * np.linalg.solve(L.T, np.vstack([np.cos(ang), np.sin(ang)])).T
    return abs(res.value - np.max(pts @ z))


def _pi_u_optimizer(rng):
    """lambda_bar is feasible, boundary-tight, in -xi0 + Ker sigma, and attains the value."""
    n = int(rng.integers(2, 5))
    d = int(rng.integers(1, n))
    model, con, _, proj = random_instance(rng, n, d)
    z = rng.normal(size=n)
    res = generators.generator_pi_u(z, model, con, proj)
    lam = res.optimizer
    return max(
        abs(lam @ con.A @ lam - con.h**2),
        np.abs(proj.pi @ (lam + model.xi0)).max(),
        abs(lam @ z - res.value),
    )


def _minimax(rng):
    n = int(rng.integers(2, 5))
    d = int(rng.integers(1, n))
    model, con, unc, proj = random_instance(rng, n, d)
    z = rng.normal(size=n)
    sp = generators.robust_saddle(z, model, con, unc, proj)
    v_star = generators.generator_f_phi_theta(z, sp.phi, sp.theta, model, con, proj)
    v_bar = generators.generator_f_phi_theta(z, sp.phi, sp.theta_bar, model, con, proj)
    robust = generators.generator_robust(z, model, con, unc, proj).value
    return max(abs(v_star - v_bar), abs(robust - sp.value), sp.gap)


def _worst_theta_radial(rng):
    n = int(rng.integers(2, 5))
    d = int(rng.integers(1, n))
    model, con, _, proj = random_instance(rng, n, d)
    r = float(rng.uniform(0.3, 3.0))
    unc = UncertaintyEllipsoid(con.A / r, float(rng.uniform(0.0, 2.0)) * np.sqrt(model.xi0 @ con.A @ model.xi0 / r))
    tb = generators.worst_theta(model, con, unc, proj)
    q = model.xi0 @ con.A @ model.xi0
    ref = -model.xi0 if q <= r * unc.delta**2 else -np.sqrt(r) * unc.delta * model.xi0 / np.sqrt(q)
    return np.abs(tb - ref).max()


def _bound_order(rng):
    pair = closedform.UncertainPairModel(
        rho=float(rng.uniform(-1, 1)),
        xi0S=float(rng.uniform(-0.3, 0.3)),
        h=float(rng.uniform(0.35, 0.8)),
        delta=float(rng.uniform(0, 0.4)),
    )
    res = closedform.gd_uncertain_call(pair)
    base = closedform.bs_call(pair.H0 * np.exp((pair.gamma - pair.beta * pair.rho * pair.xi0S) * pair.T), pair.K, pair.beta, pair.T)
    return max(res.pi_l - base, base - res.pi_u, 0.0)


def _heston_parity(rng):
    p = heston.HestonParams(a=0.12, b=3.0, beta=0.3, rho=float(rng.uniform(-0.9, 0.9)), nu0=0.04, S0=float(rng.uniform(60, 140)))
    K, T = 100.0, float(rng.uniform(0.5, 10.0))
    put = heston.heston_put(p, K, T)
    call = heston.heston_call_gil_pelaez(p, K, T)
    return abs(call - put - (p.S0 - K))


CHECKS = (
    ("projector identities", _projectors, 1e-10),
    ("alpha' ordering", _alpha_order, 1e-14),
    ("ellipsoid maximizer vs boundary sweep", _boundary_max, 1e-6),
    ("optimizer feasibility and attainment", _pi_u_optimizer, 1e-8),
    ("minimax cross-evaluation", _minimax, 1e-8),
    ("worst prior closed form", _worst_theta_radial, 1e-12),
    ("bound ordering", _bound_order, 1e-12),
    ("Heston parity", _heston_parity, 1e-8),
)


def run_validation(seed: int = 2024, instances: int = 20) -> list[CheckResult]:
    results = []
    for k, (name, fn, tol) in enumerate(CHECKS):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        count = max(1, instances // 4) if name == "Heston parity" else instances
        results.append(_check(name, fn, count, rng, tol))
    return results
