"""Closed-form good-deal bounds for log-normal baskets and the two-asset prior model.

Prices are discounted (zero rate). The basket formulas assume the traded
assets carry no market price of risk, so the only premium comes from the
non-traded directions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

from .errors import DegenerateBoundWarning, GrowthConditionViolated


def norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))


def _d_plus_minus(spot, strike, vol, tau):
    sd = vol * np.sqrt(tau)
    d_plus = (np.log(spot / strike) + 0.5 * sd**2) / sd
    return d_plus, d_plus - sd


def bs_call(spot, strike, vol, tau):
    """Black-Scholes call at zero rate; intrinsic value when vol*sqrt(tau) is 0."""
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (spot, strike, vol, tau)))
    shape = arrs[0].shape
    spot, strike, vol, tau = (x.ravel() for x in arrs)
    out = np.maximum(spot - strike, 0.0)
    live = (vol * np.sqrt(np.maximum(tau, 0.0)) > 0.0) & (strike > 0.0)
    if np.any(live):
        s, k = spot[live], strike[live]
        dp, dm = _d_plus_minus(s, k, vol[live], tau[live])
        out[live] = s * norm_cdf(dp) - k * norm_cdf(dm)
    neg = strike <= 0.0
    out[neg] = spot[neg] - strike[neg]
    return float(out[0]) if shape == () else out.reshape(shape)


@dataclass(frozen=True)
class BasketModel:
    """d traded log-normal assets S and n-d non-traded log-normal assets H.

    dS = diag(S) sigmaS dW^S and dH = diag(H)(gamma dt + beta dW), where
    W = (W^S, W^H) is n-dimensional and the traded block of sigma is
    (sigmaS, 0).
    """

    sigmaS: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    S0: np.ndarray
    H0: np.ndarray

    def __post_init__(self):
        sS = np.atleast_2d(np.asarray(self.sigmaS, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        S0 = np.atleast_1d(np.asarray(self.S0, dtype=float))
        H0 = np.atleast_1d(np.asarray(self.H0, dtype=float))
        d = sS.shape[0]
        if sS.shape != (d, d):
            raise ValueError(f"sigmaS: must be square, got {sS.shape}")
        if abs(np.linalg.det(sS)) < 1e-14:
            raise ValueError("sigmaS: must be invertible")
        m, n = beta.shape
        if n <= d or m != n - d:
            raise ValueError(f"beta: expected shape ({n - d}, n) with n > d, got {beta.shape}")
        if gamma.shape != (m,) or H0.shape != (m,) or S0.shape != (d,):
            raise ValueError("gamma, H0, S0: inconsistent lengths")
        if np.any(S0 <= 0) or np.any(H0 <= 0):
            raise ValueError("S0, H0: must be positive")
        for name, arr in (("sigmaS", sS), ("beta", beta), ("gamma", gamma), ("S0", S0), ("H0", H0)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.sigmaS.shape[0]

    @property
    def n(self) -> int:
        return self.beta.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        """Full d x n volatility (sigmaS, 0)."""
        return np.hstack([self.sigmaS, np.zeros((self.d, self.n - self.d))])

    def geometric_S(self, S=None) -> float:
        S = self.S0 if S is None else np.asarray(S, dtype=float)
        return float(np.exp(np.mean(np.log(S), axis=-1)))

    def geometric_H(self, H=None) -> float:
        H = self.H0 if H is None else np.asarray(H, dtype=float)
        return float(np.exp(np.mean(np.log(H), axis=-1)))


@dataclass(frozen=True)
class TildeParams:
    sigma_tilde: np.ndarray
    mu_tilde: float
    beta_tilde: np.ndarray
    gamma_tilde: float
    alpha_plus: float
    alpha_minus: float


def tilde_params(basket: BasketModel, a, h: float) -> TildeParams:
    """Dynamics of the geometric averages and the premium-adjusted drifts.

    ``a`` is the diagonal of A (length n). Norms of matrices are Frobenius.
    """
    a = np.asarray(a, dtype=float)
    d, n = basket.d, basket.n
    if a.shape != (n,) or np.any(a <= 0):
        raise ValueError(f"a: expected {n} positive entries")
    s_t = basket.sigmaS.T @ np.ones(d) / d
    mu_t = 0.5 * s_t @ s_t - 0.5 / d * np.sum(basket.sigmaS**2)
    m = n - d
    b_t = basket.beta.T @ np.ones(m) / m
    g_t = np.mean(basket.gamma) + 0.5 * b_t @ b_t - 0.5 / m * np.sum(basket.beta**2)
    prem = h * np.sqrt(np.sum(b_t[d:] ** 2 / a[d:]))
    return TildeParams(s_t, float(mu_t), b_t, float(g_t), float(g_t + prem), float(g_t - prem))


class Bounds(NamedTuple):
    pi_u: float
    pi_l: float
    phi_bar: np.ndarray
    z: np.ndarray


def gd_call_on_nontraded(basket: BasketModel, a, h: float, K: float, t: float, T: float, H_t=None) -> Bounds:
    """Bounds for (H_tilde_T - K)^+ and the seller's hedge.

    ``z`` is the upper-bound BSDE's Z at time t.
    """
    tp = tilde_params(basket, a, h)
    tau = T - t
    Ht = basket.geometric_H(H_t)
    vol = float(np.linalg.norm(tp.beta_tilde))
    fwd_u = Ht * np.exp(tp.alpha_plus * tau)
    pi_u = bs_call(fwd_u, K, vol, tau)
    pi_l = bs_call(Ht * np.exp(tp.alpha_minus * tau), K, vol, tau)
    if vol * np.sqrt(tau) > 0:
        dp, _ = _d_plus_minus(fwd_u, K, vol, tau)
        delta_u = float(norm_cdf(dp))
    else:
        delta_u = float(fwd_u > K)
    z = fwd_u * delta_u * tp.beta_tilde
    phi = z.copy()
    phi[basket.d:] = 0.0
    return Bounds(pi_u, pi_l, phi, z)


EXCHANGE_CONVENTIONS = ("printed", "numeraire")


def gd_exchange_option(
    basket: BasketModel, a, h: float, t: float, T: float, *, convention: str = "printed", S_t=None, H_t=None
) -> Bounds:
    """Bounds for (H_tilde_T - S_tilde_T)^+ with cross-volatility |beta~ - (sigma~, 0)|.

    ``convention="printed"`` evaluates the Margrabe-type formula as usually
    published for this setting, with the S-leg drift added to the log
    moneyness: d+- = (ln(H/S) + (alpha + mu~ +- v^2/2) tau) / (v sqrt(tau)).
    It is the default so the four-factor reference numbers are reproduced.

    ``convention="numeraire"`` uses ln(H e^{alpha tau} / (S e^{mu~ tau})),
    which is what a change of numeraire gives and what the regression
    solver converges to.  The two agree when mu~ = 0 (e.g. d = 1).
    """
    if convention not in EXCHANGE_CONVENTIONS:
        raise ValueError(f"convention: expected one of {EXCHANGE_CONVENTIONS}")
    tp = tilde_params(basket, a, h)
    tau = T - t
    d = basket.d
    Ht = basket.geometric_H(H_t)
    St = basket.geometric_S(S_t)
    s_emb = np.zeros(basket.n)
    s_emb[:d] = tp.sigma_tilde
    vol = float(np.linalg.norm(tp.beta_tilde - s_emb))
    s_leg = St * np.exp(tp.mu_tilde * tau)
    sign = 1.0 if convention == "printed" else -1.0

    def price(alpha):
        h_leg = Ht * np.exp(alpha * tau)
        if vol * np.sqrt(tau) == 0.0:
            return max(h_leg - s_leg, 0.0), float(h_leg > s_leg), float(h_leg > s_leg), h_leg
        sd = vol * np.sqrt(tau)
        dp = (np.log(Ht / St) + (alpha + sign * tp.mu_tilde) * tau + 0.5 * sd**2) / sd
        dm = dp - sd
        nd_p, nd_m = float(norm_cdf(dp)), float(norm_cdf(dm))
        return h_leg * nd_p - s_leg * nd_m, nd_p, nd_m, h_leg

    pi_u, nd_p, nd_m, h_leg = price(tp.alpha_plus)
    pi_l = price(tp.alpha_minus)[0]
    z = h_leg * nd_p * tp.beta_tilde - s_leg * nd_m * s_emb
    phi = z.copy()
    phi[d:] = 0.0
    return Bounds(float(pi_u), float(pi_l), phi, z)


# -- two-asset model with drift uncertainty ---------------------------------


@dataclass(frozen=True)
class UncertainPairModel:
    """One traded asset S, one non-traded H with correlation rho.

    The market price of risk of S is ``xi0S`` under the reference prior and
    is only known to lie within ``delta`` of it. A is the identity.
    """

    sigmaS: float = 0.2
    beta: float = 0.5
    gamma: float = 0.05
    rho: float = 0.0
    xi0S: float = 0.0
    h: float = 0.0
    delta: float = 0.0
    H0: float = 1.0
    S0: float = 1.0
    K: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho: must lie in [-1, 1], got {self.rho}")
        if self.sigmaS <= 0 or self.beta <= 0:
            raise ValueError("sigmaS, beta: must be positive")
        if self.h < 0 or self.delta < 0:
            raise ValueError("h, delta: must be nonnegative")
        if self.H0 <= 0 or self.S0 <= 0 or self.K < 0 or self.T < 0:
            raise ValueError("H0, S0 > 0 and K, T >= 0 required")


class UncertainCallResult(NamedTuple):
    pi_u: float
    pi_l: float
    phi_bar: float
    theta_bar_S: float
    h_tilde: float


def gd_uncertain_call(pair: UncertainPairModel, t: float = 0.0, H_t: float | None = None) -> UncertainCallResult:
    """Robust good-deal bounds for (H_T - K)^+ and the robust hedge in S-units of risk.

    ``phi_bar`` is the amount of Brownian exposure held in the traded
    direction (multiply by 1/sigmaS for a position in S-value).
    """
    xi, dl, h, rho, beta = pair.xi0S, pair.delta, pair.h, pair.rho, pair.beta
    Ht = pair.H0 if H_t is None else float(H_t)
    tau = pair.T - t
    excess = abs(xi) - dl
    if excess <= 0.0:
        theta = -xi
        h_t = h
    else:
        theta = -dl * np.sign(xi)
        r2 = h * h - excess * excess
        if r2 < 0.0:
            raise GrowthConditionViolated(f"h = {h} below |xi| - delta = {excess}")
        h_t = float(np.sqrt(r2))
    c = np.sqrt(max(1.0 - rho * rho, 0.0))
    a_up = pair.gamma + beta * (-rho * xi + h_t * c)
    a_dn = pair.gamma + beta * (-rho * xi - h_t * c)
    fwd_u = Ht * np.exp(a_up * tau)
    pi_u = bs_call(fwd_u, pair.K, beta, tau)
    pi_l = bs_call(Ht * np.exp(a_dn * tau), pair.K, beta, tau)
    if excess > 0.0 and h_t == 0.0:
        warnings.warn("effective radius is zero: bounds coincide, hedge undefined", DegenerateBoundWarning)
        return UncertainCallResult(pi_u, pi_u, float("nan"), float(theta), 0.0)
    if beta * np.sqrt(tau) > 0 and pair.K > 0:
        dp, _ = _d_plus_minus(fwd_u, pair.K, beta, tau)
        n_dp = float(norm_cdf(dp))
    else:
        n_dp = float(fwd_u > pair.K)
    spec = c * np.sign(xi) * excess / h_t if excess > 0.0 else 0.0
    phi = fwd_u * n_dp * beta * (rho + spec)
    return UncertainCallResult(float(pi_u), float(pi_l), float(phi), float(theta), float(h_t))


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class Figure2Panel:
    """One sweep: ``sweep`` over ``sweep_values``, one curve per ``series`` value."""

    name: str
    sweep: str
    sweep_values: tuple[float, ...]
    series: str
    series_values: tuple[float, ...]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        allowed = {"rho", "delta", "h", "xi0S"}
        if self.sweep not in allowed or self.series not in allowed:
            raise ValueError(f"sweep/series: must be one of {sorted(allowed)}")
        if len(self.sweep_values) == 0 or len(self.series_values) == 0:
            raise ValueError(f"panel {self.name}: empty sweep grid")


FIGURE2_COLUMNS = ("panel", "sweep", "sweep_value", "series", "series_value", "pi_u", "pi_l")


def figure2_data(template: UncertainPairModel, panels) -> list[tuple]:
    """Rows ``(panel, sweep, x, series, s, pi_u, pi_l)`` in panel/series/x order."""
    from dataclasses import replace

    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBoundWarning)
        for p in panels:
            base = replace(template, **p.fixed)
            for s in p.series_values:
                for x in p.sweep_values:
                    res = gd_uncertain_call(replace(base, **{p.series: s, p.sweep: x}))
                    rows.append((p.name, p.sweep, x, p.series, s, res.pi_u, res.pi_l))
    return rows
