"""Pointwise optimizers and BSDE generators for ellipsoidal no-good-deal sets.

Every generator accepts ``z`` either as a single n-vector or as a stack of
shape ``(..., n)``; values then come back with shape ``(...)``. The
``make_*_generator`` factories wrap them as ``f(t, z)`` callbacks for the
regression solver.

Degenerate optimizers (z = 0, Pi_perp z = 0, Pi z = phi*) are set to zero;
the generator value does not depend on that choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import (
    GrowthConditionViolated,
    InfeasibleSeparability,
    SaddleCheckFailed,
    SubspaceViolation,
)
from .model import (
    DEFAULT_TOL,
    EllipsoidConstraint,
    MarketModel,
    ProjectionPair,
    UncertaintyEllipsoid,
    check_separability,
    make_projections,
)

# relative threshold below which a direction counts as zero
_DEGENERATE = 1e-14
_SADDLE_TOL = 1e-8


@dataclass(frozen=True)
class GeneratorEval:
    value: float | np.ndarray
    optimizer: np.ndarray | tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SaddlePoint:
    """Robust hedge ``phi`` and worst prior ``theta`` at one ``z``.

    ``theta`` is theta*(phi), or theta_bar where theta*(phi) is degenerate;
    ``theta_bar`` is the minimizer of the effective market price of risk. ``gap`` is the largest violation found
    by the cross-evaluation check.
    """

    phi: np.ndarray
    theta: np.ndarray
    value: float
    theta_bar: np.ndarray
    gap: float


def _quad(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", x, M, x)


def _scaled_direction(scale, q, vec, ref) -> np.ndarray:
    """``scale * vec / sqrt(q)`` with the degenerate rows set to zero.

    ``ref`` is a squared reference magnitude; rows with ``q <= eps * ref``
    are treated as the zero direction.
    """
    q = np.asarray(q, dtype=float)
    ok = q > _DEGENERATE**2 * np.maximum(ref, np.finfo(float).tiny)
    denom = np.sqrt(np.where(ok, q, 1.0))
    out = np.where(ok, np.asarray(scale) / denom, 0.0)
    return out[..., None] * vec


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _premium_radius(xi: np.ndarray, constraint: EllipsoidConstraint) -> float:
    """sqrt(h^2 - xi'A xi), raising when it is not strictly positive."""
    r2 = constraint.h**2 - float(xi @ constraint.A @ xi)
    if r2 <= 0.0:
        raise GrowthConditionViolated(
            f"h^2 - xi'A xi = {r2:.3e} <= 0; the constraint set misses Ker sigma"
        )
    return float(np.sqrt(r2))


def maximize_linear_over_ellipsoid(z, constraint: EllipsoidConstraint) -> GeneratorEval:
    """Maximize y'z over {y : y'Ay <= h^2}."""
    z = np.asarray(z, dtype=float)
    w = z @ constraint.A_inv
    q = np.einsum("...i,...i->...", w, z)
    y = _scaled_direction(constraint.h, q, w, np.einsum("...i,...i->...", z, z))
    value = constraint.h * np.sqrt(np.maximum(q, 0.0))
    return GeneratorEval(_maybe_scalar(value), y)


def generator_rho(z, constraint: EllipsoidConstraint) -> GeneratorEval:
    return maximize_linear_over_ellipsoid(z, constraint)


def _eta_bar(perp_z, radius, constraint: EllipsoidConstraint, ref) -> tuple[np.ndarray, np.ndarray]:
    """Kernel part of the optimal kernel and the Mahalanobis size of perp_z.

    ``ref`` is |z|^2; perp_z counts as zero when tiny relative to it.
    """
    w = perp_z @ constraint.A_inv
    q = np.maximum(np.einsum("...i,...i->...", w, perp_z), 0.0)
    eta = _scaled_direction(radius, q, w, ref * float(np.max(np.diag(constraint.A_inv))))
    return eta, q


def generator_f_theta(
    z, theta, model: MarketModel, constraint: EllipsoidConstraint, projections: ProjectionPair
) -> GeneratorEval:
    """Upper-bound generator under the prior shifted by ``theta``.

    The optimizer is the kernel-space Girsanov component eta^theta.
    """
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    xi0 = model.xi0
    xi_theta = xi0 + projections.pi @ theta
    radius = _premium_radius(xi_theta, constraint)
    perp_theta = projections.pi_perp @ theta
    pz = z @ projections.pi
    perp_z = z - pz
    eta, q = _eta_bar(perp_z, radius, constraint, np.einsum("...i,...i->...", z, z))
    value = perp_z @ perp_theta - pz @ xi0 + radius * np.sqrt(q)
    return GeneratorEval(_maybe_scalar(value), eta + perp_theta)


def generator_pi_u(
    z, model: MarketModel, constraint: EllipsoidConstraint, projections: ProjectionPair
) -> GeneratorEval:
    """Upper good-deal bound generator; the optimizer is lambda_bar = -xi0 + eta_bar."""
    z = np.asarray(z, dtype=float)
    radius = _premium_radius(model.xi0, constraint)
    pz = z @ projections.pi
    perp_z = z - pz
    eta, q = _eta_bar(perp_z, radius, constraint, np.einsum("...i,...i->...", z, z))
    value = -(pz @ model.xi0) + radius * np.sqrt(q)
    return GeneratorEval(_maybe_scalar(value), eta - model.xi0)


def hedge_phi_bar(
    z,
    model: MarketModel,
    constraint: EllipsoidConstraint,
    projections: ProjectionPair,
    xi: np.ndarray | None = None,
) -> np.ndarray:
    """Good-deal hedge: Pi z plus the speculative term along A xi.

    ``xi`` defaults to ``model.xi0``; the robust hedge passes xi^theta_bar.
    """
    z = np.asarray(z, dtype=float)
    xi = model.xi0 if xi is None else np.asarray(xi, dtype=float)
    radius = _premium_radius(xi, constraint)
    pz = z @ projections.pi
    perp_z = z - pz
    q = np.maximum(_quad(constraint.A_inv, perp_z), 0.0)
    return pz + (np.sqrt(q) / radius)[..., None] * (constraint.A @ xi)


def generator_f_phi_theta(
    z,
    phi,
    theta,
    model: MarketModel,
    constraint: EllipsoidConstraint,
    projections: ProjectionPair | None = None,
) -> float | np.ndarray:
    """theta'(z - phi) - xi0'phi + h ||z - phi||_{A^-1} for a hedge phi in Im sigma'."""
    z = np.asarray(z, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if projections is None:
        projections = make_projections(model)
    leak = np.linalg.norm(phi @ projections.pi_perp, axis=-1)
    if np.any(leak > model.tol * np.maximum(1.0, np.linalg.norm(phi, axis=-1))):
        raise SubspaceViolation(f"phi has a Ker sigma component of size {np.max(leak):.3e}")
    w = z - phi
    q = np.maximum(_quad(constraint.A_inv, w), 0.0)
    value = np.einsum("...i,...i->...", theta, w) - phi @ model.xi0 + constraint.h * np.sqrt(q)
    return _maybe_scalar(value)


def _require_separable(mat, projections: ProjectionPair, tol: float, name: str) -> None:
    if not check_separability(mat, projections, tol):
        raise InfeasibleSeparability(f"{name} does not leave Ker sigma invariant")


def _secular_root(lam: np.ndarray, y: np.ndarray, delta: float) -> float:
    """Root mu > 0 of sum (lam y / (lam + mu))^2 = delta^2.

    Safeguarded Newton on 1/sqrt(norm2) - 1/delta, which is close to linear
    in mu; bisection whenever a step leaves the bracket.
    """
    c = (lam * y) ** 2

    def g(mu):
        return float(np.sum(c / (lam + mu) ** 2)) - delta**2

    lo, hi = 0.0, 1.0
    while g(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ArithmeticError("could not bracket the Lagrange multiplier")
    mu = lo
    for _ in range(200):
        s = float(np.sum(c / (lam + mu) ** 2))
        gv = s - delta**2
        if gv == 0.0:
            return mu
        if gv > 0.0:
            lo = mu
        else:
            hi = mu
        if abs(gv) <= 1e-15 * max(1.0, delta**2) or hi - lo <= 4e-16 * hi:
            return mu
        ds = -2.0 * float(np.sum(c / (lam + mu) ** 3))
        # Newton step on phi(mu) = s^{-1/2} - 1/delta
        phi = s**-0.5 - 1.0 / delta
        dphi = -0.5 * s**-1.5 * ds
        step = mu - phi / dphi
        mu = step if lo < step < hi else 0.5 * (lo + hi)
    return mu


def worst_theta(
    model: MarketModel,
    constraint: EllipsoidConstraint,
    uncertainty: UncertaintyEllipsoid,
    projections: ProjectionPair,
) -> np.ndarray:
    """Prior in Theta = Theta0 cap Im sigma' with the smallest xi^theta'A xi^theta."""
    tol = model.tol
    _require_separable(uncertainty, projections, tol, "B")
    _require_separable(constraint, projections, tol, "A")
    xi0 = model.xi0
    delta = uncertainty.delta
    if float(xi0 @ uncertainty.B @ xi0) <= delta**2:
        return -xi0.copy()
    if delta == 0.0:
        return np.zeros_like(xi0)
    V = projections.im_basis
    A_d = V.T @ constraint.A @ V
    B_d = V.T @ uncertainty.B @ V
    x = V.T @ xi0
    # A_d U = B_d U diag(lam), U' B_d U = I
    lam, U = scipy.linalg.eigh(A_d, B_d)
    y = U.T @ (B_d @ x)
    mu = _secular_root(lam, y, delta)
    u = -U @ (lam / (lam + mu) * y)
    return V @ u


def theta_star(
    z, phi_star, uncertainty: UncertaintyEllipsoid, projections: ProjectionPair
) -> np.ndarray:
    """Maximizer of theta'(Pi z - phi*) over Theta."""
    z = np.asarray(z, dtype=float)
    phi_star = np.asarray(phi_star, dtype=float)
    w = z @ projections.pi - phi_star
    v = w @ uncertainty.B_inv
    q = np.maximum(np.einsum("...i,...i->...", v, w), 0.0)
    ref = np.einsum("...i,...i->...", z, z) + np.einsum("...i,...i->...", phi_star, phi_star)
    return _scaled_direction(uncertainty.delta, q, v, ref)


def _saddle_probes(
    z, phi_bar, theta_s, value, model, constraint, uncertainty, projections
) -> float:
    """Largest violation of f(phi_bar, theta) <= value <= f(phi, theta*) on a probe set."""
    V = projections.im_basis
    d = V.shape[1]
    B_d = V.T @ uncertainty.B @ V
    evals, evecs = np.linalg.eigh(B_d)
    thetas = []
    for k in range(d):
        for sgn in (1.0, -1.0):
            thetas.append(V @ (sgn * uncertainty.delta / np.sqrt(evals[k]) * evecs[:, k]))
    thetas.append(np.zeros(model.n))
    thetas = np.array(thetas)
    upper = generator_f_phi_theta(z, phi_bar, thetas, model, constraint)
    scale = max(1.0, float(np.linalg.norm(z)))
    phis = [phi_bar + V @ (s * scale * np.eye(d)[k]) for k in range(d) for s in (1e-3, -1e-3, 0.5, -0.5)]
    lower = generator_f_phi_theta(z, np.array(phis), theta_s, model, constraint)
    return float(max(np.max(upper) - value, value - np.min(lower), 0.0))


def robust_saddle(
    z,
    model: MarketModel,
    constraint: EllipsoidConstraint,
    uncertainty: UncertaintyEllipsoid,
    projections: ProjectionPair,
    *,
    check: bool = True,
) -> SaddlePoint:
    """Robust good-deal hedge and worst-case prior at a single ``z``."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("robust_saddle takes a single n-vector z")
    tb = worst_theta(model, constraint, uncertainty, projections)
    xi_tb = model.xi0 + projections.pi @ tb
    phi = hedge_phi_bar(z, model, constraint, projections, xi=xi_tb)
    ts = theta_star(z, phi, uncertainty, projections)
    if not np.any(ts):
        # any theta maximizes theta'(Pi z - phi) here; only theta_bar keeps phi optimal
        ts = tb.copy()
    value = float(generator_f_phi_theta(z, phi, tb, model, constraint))
    gap = 0.0
    if check:
        scale = max(1.0, abs(value), float(np.linalg.norm(z)))
        v_star = float(generator_f_phi_theta(z, phi, ts, model, constraint))
        v_inner = float(generator_f_theta(z, tb, model, constraint, projections).value)
        gap = max(abs(v_star - value), abs(v_inner - value))
        gap = max(gap, _saddle_probes(z, phi, ts, value, model, constraint, uncertainty, projections))
        if gap > _SADDLE_TOL * scale:
            raise SaddleCheckFailed(f"minimax cross-evaluation gap {gap:.3e}")
    return SaddlePoint(phi=phi, theta=ts, value=value, theta_bar=tb, gap=gap)


def generator_robust(
    z,
    model: MarketModel,
    constraint: EllipsoidConstraint,
    uncertainty: UncertaintyEllipsoid,
    projections: ProjectionPair,
) -> GeneratorEval:
    """sup over Theta of f^theta, attained at theta_bar."""
    tb = worst_theta(model, constraint, uncertainty, projections)
    return generator_f_theta(z, tb, model, constraint, projections)


# -- solver callbacks -------------------------------------------------------

Generator = Callable[[float, np.ndarray], np.ndarray]


def make_pi_u_generator(model, constraint, projections=None) -> Generator:
    proj = projections or make_projections(model)
    radius = _premium_radius(model.xi0, constraint)
    A_inv_perp = proj.pi_perp @ constraint.A_inv @ proj.pi_perp
    lin = -(proj.pi @ model.xi0)

    def f(t, z):
        q = np.maximum(_quad(A_inv_perp, z), 0.0)
        return z @ lin + radius * np.sqrt(q)

    return f


def make_pi_l_generator(model, constraint, projections=None) -> Generator:
    """Lower bound generator, -f_u(-z)."""
    upper = make_pi_u_generator(model, constraint, projections)
    return lambda t, z: -upper(t, -z)


def make_robust_generator(model, constraint, uncertainty, projections=None) -> Generator:
    proj = projections or make_projections(model)
    tb = worst_theta(model, constraint, uncertainty, proj)
    shifted = MarketModel(model.sigma, model.xi0 + proj.pi @ tb, model.tol)
    upper = make_pi_u_generator(shifted, constraint, proj)
    # f^theta_bar uses xi0 on the hedgeable part and xi^theta_bar in the radius
    corr = proj.pi @ tb
    return lambda t, z: upper(t, z) + z @ corr


def make_linear_generator(lam) -> Generator:
    lam = np.asarray(lam, dtype=float)
    return lambda t, z: z @ lam


def make_rho_generator(constraint) -> Generator:
    A_inv = constraint.A_inv
    return lambda t, z: constraint.h * np.sqrt(np.maximum(_quad(A_inv, z), 0.0))


__all__ = [
    "DEFAULT_TOL",
    "GeneratorEval",
    "SaddlePoint",
    "maximize_linear_over_ellipsoid",
    "generator_pi_u",
    "generator_rho",
    "hedge_phi_bar",
    "generator_f_theta",
    "generator_f_phi_theta",
    "worst_theta",
    "theta_star",
    "robust_saddle",
    "generator_robust",
    "make_pi_u_generator",
    "make_pi_l_generator",
    "make_robust_generator",
    "make_linear_generator",
    "make_rho_generator",
]
