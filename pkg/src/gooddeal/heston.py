"""Heston put prices by Fourier quadrature and the good-deal bounds obtained
by shifting the mean-reversion level.

Variance follows d nu = (a - b nu) dt + beta sqrt(nu) dW, so the long-run
level is a/b. Prices are discounted, i.e. the rate is zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate

from ._parallel import ordered_map
from .errors import LowerBoundInfeasible, QuadratureNotConverged

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 500
FD_REL_S = 1e-4
FD_NU = 1e-5


@dataclass(frozen=True)
class HestonParams:
    a: float
    b: float
    beta: float
    rho: float
    nu0: float
    S0: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.beta > 0 and self.nu0 > 0 and self.S0 > 0):
            raise ValueError("a, b, beta, nu0, S0: must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho: must lie in (-1, 1), got {self.rho}")
        if self.epsilon < 0:
            raise ValueError("epsilon: must be nonnegative")
        if self.beta**2 > 2.0 * self.a:
            raise ValueError(f"Feller condition fails: beta^2 = {self.beta**2} > 2a = {2 * self.a}")

    @property
    def shift(self) -> float:
        return self.beta * self.epsilon * np.sqrt(1.0 - self.rho**2)

    @property
    def a_upper(self) -> float:
        return self.a + self.shift

    @property
    def a_lower(self) -> float:
        return self.a - self.shift

    @property
    def epsilon_cap(self) -> float:
        """Largest epsilon for which the lower level still satisfies Feller."""
        return 0.5 / self.beta * (2.0 * self.a - self.beta**2) / np.sqrt(1.0 - self.rho**2)

    @property
    def lower_admissible(self) -> bool:
        return self.epsilon <= self.epsilon_cap


def _clog1p(x):
    """log(1 + x) for complex x, accurate when |x| is tiny (numpy's is not)."""
    re, im = x.real, x.imag
    return 0.5 * np.log1p(2.0 * re + re * re + im * im) + 1j * np.arctan2(im, 1.0 + re)


def log_cf(u, T: float, nu0: float, a: float, b: float, beta: float, rho: float):
    """Characteristic function of ln(S_T / S_0) at complex ``u``.

    Uses the branch-stable form where exp(-dT) decays; (xi - d) is formed
    as -beta^2 (iu + u^2) / (xi + d) so small beta does not cancel.
    """
    u = np.asarray(u, dtype=complex)
    iu = 1j * u
    xi = b - rho * beta * iu
    w = iu + u * u
    d = np.sqrt(xi * xi + beta * beta * w)
    xi_minus_d_over_b2 = -w / (xi + d)
    g = beta * beta * xi_minus_d_over_b2 / (xi + d)
    e = np.exp(-d * T)
    log_ratio = _clog1p(-g * e) - _clog1p(-g)
    C = a * (xi_minus_d_over_b2 * T - 2.0 * log_ratio / (beta * beta))
    D = xi_minus_d_over_b2 * (1.0 - e) / (1.0 - g * e)
    return np.exp(C + D * nu0)


def _integrate(f, what: str) -> float:
    out = integrate.quad(f, 0.0, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1)
    val, err = out[0], out[1]
    # QUADPACK may flag roundoff yet still meet the accuracy we need
    if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1.0):
        note = out[3] if len(out) > 3 else ""
        raise QuadratureNotConverged(f"{what}: value {val}, error estimate {err:.2e}. {note}".strip())
    return float(val)


def _lewis_integral(S, K, T, nu, a, b, beta, rho) -> float:
    k = np.log(S / K)

    def f(u):
        phi = log_cf(u - 0.5j, T, nu, a, b, beta, rho)
        return float(np.real(np.exp(1j * u * k) * phi)) / (u * u + 0.25)

    return _integrate(f, "Heston put integral")


def heston_put(
    params: HestonParams, K: float, T: float, t: float = 0.0, S=None, nu=None, a_eff=None
) -> float:
    """European put in the Heston model with level ``a_eff`` (default ``params.a``).

    Single-integral (Lewis) representation; the call value follows from
    parity at zero rate.
    """
    S = params.S0 if S is None else float(S)
    nu = params.nu0 if nu is None else float(nu)
    a = params.a if a_eff is None else float(a_eff)
    tau = T - t
    if tau <= 0:
        return max(K - S, 0.0)
    integral = _lewis_integral(S, K, tau, nu, a, params.b, params.beta, params.rho)
    return K - np.sqrt(S * K) / np.pi * integral


def heston_call_gil_pelaez(
    params: HestonParams, K: float, T: float, t: float = 0.0, S=None, nu=None, a_eff=None
) -> float:
    """Call via the two-probability inversion; an independent route for parity checks."""
    S = params.S0 if S is None else float(S)
    nu = params.nu0 if nu is None else float(nu)
    a = params.a if a_eff is None else float(a_eff)
    tau = T - t
    if tau <= 0:
        return max(S - K, 0.0)
    k = np.log(K / S)
    args = (tau, nu, a, params.b, params.beta, params.rho)

    def f1(u):
        return float(np.real(np.exp(-1j * u * k) * log_cf(u - 1j, *args) / (1j * u)))

    def f2(u):
        return float(np.real(np.exp(-1j * u * k) * log_cf(u, *args) / (1j * u)))

    p1 = 0.5 + _integrate(f1, "Heston P1 integral") / np.pi
    p2 = 0.5 + _integrate(f2, "Heston P2 integral") / np.pi
    return S * p1 - K * p2


class HestonBounds(NamedTuple):
    pi_u: float
    pi_l: float
    base: float
    lower_admissible: bool


def gd_put_bounds(
    params: HestonParams, K: float, T: float, t: float = 0.0, S=None, nu=None, *, strict: bool = False
) -> HestonBounds:
    """Upper/lower bounds from the shifted levels a +- beta eps sqrt(1 - rho^2).

    When the lower level breaks Feller, ``pi_l`` is NaN and a
    :class:`LowerBoundInfeasible` warning is issued (raised if ``strict``).
    """
    base = heston_put(params, K, T, t, S, nu)
    upper = base if params.epsilon == 0 else heston_put(params, K, T, t, S, nu, a_eff=params.a_upper)
    if params.lower_admissible:
        lower = base if params.epsilon == 0 else heston_put(params, K, T, t, S, nu, a_eff=params.a_lower)
    else:
        msg = f"epsilon = {params.epsilon} exceeds the lower-bound cap {params.epsilon_cap:.6g}"
        if strict:
            raise LowerBoundInfeasible(msg)
        warnings.warn(LowerBoundInfeasible(msg))
        lower = float("nan")
    return HestonBounds(float(upper), float(lower), float(base), params.lower_admissible)


def put_greeks(params, K, T, t=0.0, S=None, nu=None, a_eff=None, *, rel_dS=FD_REL_S, d_nu=FD_NU):
    """Central-difference (delta, d price / d nu)."""
    S = params.S0 if S is None else float(S)
    nu = params.nu0 if nu is None else float(nu)
    hS = rel_dS * S
    hv = min(d_nu, 0.5 * nu)
    p = lambda s, v: heston_put(params, K, T, t, s, v, a_eff)  # noqa: E731
    delta = (p(S + hS, nu) - p(S - hS, nu)) / (2 * hS)
    dnu = (p(S, nu + hv) - p(S, nu - hv)) / (2 * hv)
    return delta, dnu


def gd_put_hedge(params: HestonParams, K: float, T: float, t: float = 0.0, S=None, nu=None, **fd) -> float:
    """Seller's hedge S sqrt(nu) Delta + (beta rho / 2) Vega in the upper-level model.

    Vega is the derivative with respect to sqrt(nu). The result is the
    exposure to the stock's Brownian driver.
    """
    S = params.S0 if S is None else float(S)
    nu = params.nu0 if nu is None else float(nu)
    delta, dnu = put_greeks(params, K, T, t, S, nu, params.a_upper, **fd)
    vega = 2.0 * np.sqrt(nu) * dnu
    return S * np.sqrt(nu) * delta + 0.5 * params.beta * params.rho * vega


FIGURE1_COLUMNS = ("S0", "epsilon", "pi_u", "pi_l", "base")


def _figure1_row(job):
    params, K, T = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowerBoundInfeasible)
        res = gd_put_bounds(params, K, T)
    return (params.S0, params.epsilon, res.pi_u, res.pi_l, res.base)


def figure1_data(params: HestonParams, K: float, T: float, epsilons, S0_grid, workers: int = 1) -> list[tuple]:
    """Rows (S0, eps, pi_u, pi_l, base), ordered by eps then S0."""
    epsilons, S0_grid = list(epsilons), list(S0_grid)
    if not epsilons or not S0_grid:
        raise ValueError("figure1_data: empty sweep grid")
    jobs = [(replace(params, S0=float(s), epsilon=float(e)), K, T) for e in epsilons for s in S0_grid]
    return ordered_map(_figure1_row, jobs, workers)
