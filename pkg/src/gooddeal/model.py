"""Market parametrization and the subspace geometry induced by sigma.

All objects are frozen; arrays are copied on construction and marked
read-only, so instances can be shared across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularVolatility

DEFAULT_TOL = 1e-10
RANK_CUTOFF = 1e-12


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


def _svd_split(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases (n x d, n x (n-d)) of Im sigma' and Ker sigma."""
    d, n = sigma.shape
    _, s, vt = np.linalg.svd(sigma)
    if s.size == 0 or s[0] == 0.0 or s[-1] < RANK_CUTOFF * s[0]:
        raise SingularVolatility(f"sigma is numerically rank deficient (singular values {s})")
    return vt[:d].T.copy(), vt[d:].T.copy()


@dataclass(frozen=True)
class MarketModel:
    """Volatility ``sigma`` (d x n, full row rank) and market price of risk ``xi0``."""

    sigma: np.ndarray
    xi0: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        sigma = _frozen(self.sigma, 2, "sigma")
        xi0 = _frozen(self.xi0, 1, "xi0")
        d, n = sigma.shape
        if d > n:
            raise ValueError(f"sigma: need d <= n, got {d} x {n}")
        if xi0.shape != (n,):
            raise ValueError(f"xi0: expected length {n}, got {xi0.shape}")
        _, ker = _svd_split(sigma)
        leak = np.linalg.norm(ker.T @ xi0)
        if leak > self.tol * max(1.0, np.linalg.norm(xi0)):
            raise ValueError(f"xi0 is not in Im sigma' (kernel component {leak:.3e})")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "xi0", xi0)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    @property
    def n(self) -> int:
        return self.sigma.shape[1]


@dataclass(frozen=True)
class ProjectionPair:
    """Orthogonal projectors onto Im sigma' (``pi``) and Ker sigma (``pi_perp``).

    ``im_basis`` and ``ker_basis`` hold orthonormal columns spanning the two
    subspaces; optimizations over Im sigma' run in the ``im_basis`` chart.
    """

    pi: np.ndarray
    pi_perp: np.ndarray
    im_basis: np.ndarray
    ker_basis: np.ndarray

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    @property
    def d(self) -> int:
        return self.im_basis.shape[1]


def make_projections(model: MarketModel) -> ProjectionPair:
    im, ker = _svd_split(model.sigma)
    pi = im @ im.T
    pi = 0.5 * (pi + pi.T)
    pi_perp = np.eye(model.n) - pi
    arrs = [pi, pi_perp, im, ker]
    for a in arrs:
        a.setflags(write=False)
    return ProjectionPair(*arrs)


def _check_spd(mat: np.ndarray, name: str, tol: float) -> float:
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name}: must be square, got {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > tol * scale:
        raise ValueError(f"{name}: not symmetric")
    lam_min = float(np.linalg.eigvalsh(mat)[0])
    if lam_min <= 0.0:
        raise ValueError(f"{name}: not positive definite (smallest eigenvalue {lam_min:.3e})")
    return lam_min


@dataclass(frozen=True)
class EllipsoidConstraint:
    """No-good-deal set {x : x'Ax <= h^2}."""

    A: np.ndarray
    h: float
    tol: float = DEFAULT_TOL
    A_inv: np.ndarray = field(init=False, repr=False, compare=False)
    c: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        object.__setattr__(self, "c", _check_spd(A, "A", self.tol))
        if not (np.isfinite(self.h) and self.h >= 0.0):
            raise ValueError(f"h: must be finite and >= 0, got {self.h}")
        A_inv = np.linalg.inv(A)
        A_inv = 0.5 * (A_inv + A_inv.T)
        A_inv.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "A_inv", A_inv)


@dataclass(frozen=True)
class UncertaintyEllipsoid:
    """Drift uncertainty set {x : x'Bx <= delta^2}."""

    B: np.ndarray
    delta: float
    tol: float = DEFAULT_TOL
    B_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        B = _frozen(self.B, 2, "B")
        _check_spd(B, "B", self.tol)
        if not (np.isfinite(self.delta) and self.delta >= 0.0):
            raise ValueError(f"delta: must be finite and >= 0, got {self.delta}")
        B_inv = np.linalg.inv(B)
        B_inv = 0.5 * (B_inv + B_inv.T)
        B_inv.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "B_inv", B_inv)


def _matrix_of(obj) -> np.ndarray:
    if isinstance(obj, EllipsoidConstraint):
        return obj.A
    if isinstance(obj, UncertaintyEllipsoid):
        return obj.B
    return np.asarray(obj, dtype=float)


def check_separability(matrix, projections: ProjectionPair, tol: float = DEFAULT_TOL) -> bool:
    """True iff the inverse of ``matrix`` maps Ker sigma into itself.

    ``matrix`` may be an :class:`EllipsoidConstraint`, an
    :class:`UncertaintyEllipsoid` or a plain SPD array. The test is scaled
    by the norm of the inverse so it does not depend on units.
    """
    m = _matrix_of(matrix)
    inv = np.linalg.inv(m)
    leak = np.linalg.norm(projections.pi @ inv @ projections.pi_perp, 2)
    return bool(leak <= tol * max(1.0, np.linalg.norm(inv, 2)))


def alpha_prime(constraint: EllipsoidConstraint) -> tuple[float, float]:
    """Return ``(c / ||A||^2, 1 / lambda_max(A))`` with the operator norm."""
    eig = np.linalg.eigvalsh(constraint.A)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    return lam_min / lam_max**2, 1.0 / lam_max


def _restricted_min_eig(B: np.ndarray, projections: ProjectionPair) -> float:
    V = projections.im_basis
    return float(np.linalg.eigvalsh(V.T @ B @ V)[0])


def theta_radius(uncertainty: UncertaintyEllipsoid, projections: ProjectionPair) -> float:
    """sup |theta| over {theta in Im sigma' : theta'B theta <= delta^2}."""
    if uncertainty.delta == 0.0:
        return 0.0
    return uncertainty.delta / np.sqrt(_restricted_min_eig(uncertainty.B, projections))


def check_growth_condition(
    model: MarketModel,
    constraint: EllipsoidConstraint,
    theta_set: UncertaintyEllipsoid | None = None,
    *,
    exact: bool = False,
) -> bool:
    """Strict check |xi| < h sqrt(alpha'), uniformly over the prior set if given.

    ``exact=True`` uses 1/lambda_max(A) instead of the conservative
    c/||A||^2.
    """
    lemma, sharp = alpha_prime(constraint)
    bound = constraint.h * np.sqrt(sharp if exact else lemma)
    radius = float(np.linalg.norm(model.xi0))
    if theta_set is not None:
        radius += theta_radius(theta_set, make_projections(model))
    return bool(radius < bound)
