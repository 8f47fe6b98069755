"""Regression Monte Carlo for BSDEs -dY = f(t, Z) dt - Z'dW with an
indicator (hypercube-cell) basis.

Conditional expectations are per-cell sample means. Cells live on a
per-time-slice box given by empirical quantiles of the regression
features (log-states by default). Two backward schemes are available:

``one-step``
    Z_i = Cov_cell(Y_{i+1}, dW_i) / dt and Y_i = E_cell[Y_{i+1}] + f(Z_i) dt,
    with Y_{i+1} the fitted value from the previous step.
``mdp``
    Multistep forward scheme: the response at t_i is the payoff plus the
    generator accumulated along the path from t_{i+1} on. Regression errors
    do not compound through the fitted Y values.

Randomness: path block ``b`` of run ``r`` draws from
``SeedSequence(seed, spawn_key=(r, b))``. Blocks have a fixed size, so the
simulated paths do not depend on how runs are split over workers.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from ._parallel import ordered_map
from .closedform import BasketModel, gd_call_on_nontraded, gd_exchange_option
from .errors import NaNGuard
from .generators import hedge_phi_bar, make_pi_l_generator, make_pi_u_generator
from .model import EllipsoidConstraint, MarketModel, make_projections

log = logging.getLogger(__name__)

BLOCK_SIZE = 8192
SCHEMES = ("one-step", "mdp")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 1 or not self.T > 0:
            raise ValueError("TimeGrid: need N >= 1 and T > 0")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt


@dataclass
class PathEnsemble:
    """``increments`` is M x N x n; ``log_states`` is M x (N+1) x n with
    columns (log S_1..log S_d, log H_1..log H_{n-d})."""

    grid: TimeGrid
    increments: np.ndarray
    log_states: np.ndarray

    @property
    def M(self) -> int:
        return self.increments.shape[0]

    @property
    def states(self) -> np.ndarray:
        return np.exp(self.log_states)


def _block_normals(seed: int, stream: int, M: int, N: int, n: int, antithetic: bool) -> np.ndarray:
    base = (M + 1) // 2 if antithetic else M
    out = np.empty((base, N, n))
    for b, start in enumerate(range(0, base, BLOCK_SIZE)):
        stop = min(start + BLOCK_SIZE, base)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, b)))
        out[start:stop] = rng.standard_normal((stop - start, N, n))
    if antithetic:
        out = np.concatenate([out, -out])[:M]
    return out


def simulate_forward(
    basket: BasketModel, grid: TimeGrid, M: int, seed: int, stream: int = 0, *, antithetic: bool = False
) -> PathEnsemble:
    """Exact log-normal stepping of (S, H) driven by n-dimensional Brownian motion."""
    if M < 1:
        raise ValueError("M: must be >= 1")
    d, n = basket.d, basket.n
    dW = _block_normals(seed, stream, M, grid.N, n, antithetic) * np.sqrt(grid.dt)
    vol = np.zeros((n, n))
    vol[:d, :d] = basket.sigmaS
    vol[d:, :] = basket.beta
    drift = np.concatenate([np.zeros(d), basket.gamma]) - 0.5 * np.sum(vol**2, axis=1)
    # explicit sum over the n drivers keeps every path's arithmetic independent of M
    incr = np.zeros_like(dW)
    for j in range(n):
        incr += dW[..., j : j + 1] * vol[:, j]
    incr += drift * grid.dt
    x0 = np.log(np.concatenate([basket.S0, basket.H0]))
    log_states = np.empty((M, grid.N + 1, n))
    log_states[:, 0] = x0
    log_states[:, 1:] = x0 + np.cumsum(incr, axis=1)
    return PathEnsemble(grid, dW, log_states)


@dataclass(frozen=True)
class RegressionBasis:
    """Indicator functions of K_per_dim^k hypercube cells on a quantile box."""

    K_per_dim: int
    q_low: float = 0.001
    q_high: float = 0.999

    def __post_init__(self):
        if self.K_per_dim < 1:
            raise ValueError("K_per_dim: must be >= 1")
        if not 0.0 <= self.q_low < self.q_high <= 1.0:
            raise ValueError("quantile box: need 0 <= q_low < q_high <= 1")

    def cells(self, X: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
        """Flat cell index for each row of X and the cell-array shape.

        Out-of-box rows go to the nearest boundary cell; coordinates with a
        degenerate box collapse to a single cell.
        """
        M, k = X.shape
        lo = np.quantile(X, self.q_low, axis=0)
        hi = np.quantile(X, self.q_high, axis=0)
        shape = []
        idx = np.zeros(M, dtype=np.int64)
        for j in range(k):
            width = hi[j] - lo[j]
            kj = self.K_per_dim if width > 1e-12 * max(1.0, abs(lo[j])) else 1
            if kj > 1:
                c = np.floor((X[:, j] - lo[j]) / width * kj).astype(np.int64)
                np.clip(c, 0, kj - 1, out=c)
                idx = idx * kj + c
            else:
                idx = idx * 1
            shape.append(kj)
        return idx, tuple(shape)


def fill_empty_cells(values: np.ndarray, counts: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Copy each empty cell's coefficients from the nearest nonempty cell (L-inf index distance)."""
    empty = counts == 0
    if not np.any(empty):
        return values
    if np.all(empty):
        raise ValueError("all regression cells are empty")
    log.debug("filling %d empty cells out of %d", int(empty.sum()), empty.size)
    _, inds = ndimage.distance_transform_cdt(
        empty.reshape(shape), metric="chessboard", return_indices=True
    )
    src = np.ravel_multi_index(tuple(i.ravel() for i in inds), shape)
    return values[src]


class _CellStats:
    """Per-cell means and centred cross moments for one time slice."""

    def __init__(self, idx: np.ndarray, shape: tuple[int, ...]):
        self.idx = idx
        self.shape = shape
        self.ncell = int(np.prod(shape))
        self.counts = np.bincount(idx, minlength=self.ncell).astype(float)
        self._safe = np.maximum(self.counts, 1.0)

    def mean(self, w: np.ndarray) -> np.ndarray:
        """Per-cell mean of w (length M), filled for empty cells."""
        m = np.bincount(self.idx, weights=w, minlength=self.ncell) / self._safe
        return fill_empty_cells(m, self.counts, self.shape)

    def z(self, y: np.ndarray, dW: np.ndarray, dt: float, center: bool) -> np.ndarray:
        """Per-cell estimate of E[y dW] / dt, as ncell x n."""
        n = dW.shape[1]
        if center:
            yc = y - self.mean(y)[self.idx]
        else:
            yc = y
        out = np.empty((self.ncell, n))
        for j in range(n):
            w = dW[:, j]
            if center:
                w = w - self.mean(w)[self.idx]
            out[:, j] = self.mean(yc * w) / dt
        return out


@dataclass
class BSDEResult:
    Y0: float
    Z0: np.ndarray
    phi0: np.ndarray
    runs: dict = field(default_factory=dict)
    mean: dict = field(default_factory=dict)
    rmse: dict = field(default_factory=dict)
    rel_rmse: dict = field(default_factory=dict)
    wall_clock: float = 0.0


def _guard(arr, what, i):
    if not np.all(np.isfinite(arr)):
        raise NaNGuard(f"non-finite {what} at time index {i}")


def solve_bsde(
    paths: PathEnsemble,
    basis: RegressionBasis,
    generator: Callable,
    payoff: Callable[[np.ndarray], np.ndarray],
    picard_iters: int = 0,
    *,
    scheme: str = "one-step",
    center: bool = True,
    features: Callable[[np.ndarray], np.ndarray] | None = None,
    hedge: Callable[[np.ndarray], np.ndarray] | None = None,
) -> BSDEResult:
    """Backward induction on the cell basis.

    ``generator(t, z)`` is evaluated on stacks of z (rows = cells). If it
    has a truthy ``takes_y`` attribute it is called as ``generator(t, z, y)``
    and the implicit Y equation is solved by ``picard_iters`` fixed-point
    sweeps. ``payoff`` maps terminal states (M x n, natural scale) to
    values. ``features`` maps log-states at one time to regression
    coordinates (default: the log-states themselves).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme: expected one of {SCHEMES}")
    grid = paths.grid
    dt, N = grid.dt, grid.N
    times = grid.times
    takes_y = bool(getattr(generator, "takes_y", False))
    feat = features or (lambda x: x)

    terminal = np.asarray(payoff(np.exp(paths.log_states[:, N])), dtype=float)
    _guard(terminal, "payoff", N)
    y_next = terminal  # one-step: fitted Y_{i+1} per path
    accum = terminal.copy()  # mdp: payoff + sum_{j > i} f_j dt per path
    Y0 = float("nan")
    Z0 = None

    for i in range(N - 1, -1, -1):
        idx, shape = basis.cells(feat(paths.log_states[:, i]))
        stats = _CellStats(idx, shape)
        dW = paths.increments[:, i]
        response = y_next if scheme == "one-step" else accum
        z = stats.z(response, dW, dt, center)
        ey = stats.mean(response)
        _guard(z, "Z", i)
        if takes_y:
            y = ey.copy()
            for _ in range(max(picard_iters, 1)):
                y = ey + generator(times[i], z, y) * dt
            f_cell = (y - ey) / dt
        else:
            f_cell = generator(times[i], z)
            y = ey + f_cell * dt
        _guard(y, "Y", i)
        if i == 0:
            # deterministic start: report the all-path cell
            cell0 = int(np.argmax(stats.counts))
            Y0, Z0 = float(y[cell0]), z[cell0].copy()
        y_next = y[idx]
        accum = accum + f_cell[idx] * dt

    phi0 = hedge(Z0) if hedge is not None else Z0.copy()
    return BSDEResult(Y0=Y0, Z0=Z0, phi0=np.asarray(phi0, dtype=float))


# -- experiments ------------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    M: int = 200_000
    N: int = 16
    K_per_dim: int = 12
    R: int = 20
    seed: int = 2024
    picard_iters: int = 0
    scheme: str = "mdp"
    center: bool = True
    features: str = "log-state"
    antithetic: bool = False
    workers: int = 1


@dataclass(frozen=True)
class BSDEExperiment:
    """Good-deal bound of a basket payoff, solved R times on fresh paths.

    ``payoff`` is ``"exchange"`` for (H~_T - S~_T)^+ or ``"call"`` for
    (H~_T - K)^+. ``xi0`` (length n, in Im sigma') defaults to zero.
    """

    basket: BasketModel
    a: tuple[float, ...]
    h: float
    T: float
    payoff: str = "exchange"
    strike: float = 1.0
    bound: str = "upper"
    xi0: tuple[float, ...] | None = None
    solver: SolverSettings = SolverSettings()
    reference: dict | None = None


def _payoff_fn(exp: BSDEExperiment):
    d = exp.basket.d

    def geo(x):
        return np.exp(np.mean(np.log(x), axis=1))

    if exp.payoff == "exchange":
        return lambda s: np.maximum(geo(s[:, d:]) - geo(s[:, :d]), 0.0)
    if exp.payoff == "call":
        return lambda s: np.maximum(geo(s[:, d:]) - exp.strike, 0.0)
    raise ValueError(f"payoff: unknown kind {exp.payoff!r}")


FEATURES = ("log-state", "geometric")


def _features_fn(kind: str, d: int):
    """Regression coordinates from log-states at one time slice."""
    if kind == "log-state":
        return None
    if kind == "geometric":
        return lambda x: np.column_stack([x[:, :d].mean(axis=1), x[:, d:].mean(axis=1)])
    raise ValueError(f"features: expected one of {FEATURES}")


def _problem(exp: BSDEExperiment):
    n = exp.basket.n
    xi0 = np.zeros(n) if exp.xi0 is None else np.asarray(exp.xi0, dtype=float)
    model = MarketModel(exp.basket.sigma, xi0)
    constraint = EllipsoidConstraint(np.diag(exp.a), exp.h)
    return model, constraint, make_projections(model)


def exact_reference(exp: BSDEExperiment, convention: str = "printed") -> dict | None:
    """Closed-form (Y0, Z0, phi0) for zero market price of risk, else None."""
    if exp.xi0 is not None and np.any(np.asarray(exp.xi0) != 0):
        return None
    if exp.payoff == "exchange":
        res = gd_exchange_option(exp.basket, exp.a, exp.h, 0.0, exp.T, convention=convention)
    else:
        res = gd_call_on_nontraded(exp.basket, exp.a, exp.h, exp.strike, 0.0, exp.T)
    if exp.bound == "upper":
        return {"Y0": res.pi_u, "Z0": res.z, "phi0": res.phi_bar}
    return {"Y0": res.pi_l, "Z0": None, "phi0": None}


def _single_run(job) -> tuple[float, np.ndarray, np.ndarray]:
    exp, r = job
    s = exp.solver
    model, constraint, proj = _problem(exp)
    gen = (make_pi_u_generator if exp.bound == "upper" else make_pi_l_generator)(model, constraint, proj)
    grid = TimeGrid(exp.T, s.N)
    paths = simulate_forward(exp.basket, grid, s.M, s.seed, stream=r, antithetic=s.antithetic)
    res = solve_bsde(
        paths,
        RegressionBasis(s.K_per_dim),
        gen,
        _payoff_fn(exp),
        s.picard_iters,
        scheme=s.scheme,
        center=s.center,
        features=_features_fn(s.features, exp.basket.d),
        hedge=lambda z: hedge_phi_bar(z, model, constraint, proj),
    )
    return res.Y0, res.Z0, res.phi0


def run_experiment(exp: BSDEExperiment) -> BSDEResult:
    """R independent solves (run r uses stream r) plus summary statistics."""
    s = exp.solver
    if s.R < 1:
        raise ValueError("solver.R: must be >= 1")
    if s.scheme not in SCHEMES:
        raise ValueError(f"solver.scheme: expected one of {SCHEMES}")
    t0 = time.perf_counter()
    out = ordered_map(_single_run, [(exp, r) for r in range(s.R)], s.workers)
    wall = time.perf_counter() - t0
    runs = {
        "Y0": np.array([o[0] for o in out]),
        "Z0": np.array([o[1] for o in out]),
        "phi0": np.array([o[2] for o in out]),
    }
    mean = {k: v.mean(axis=0) for k, v in runs.items()}
    rmse, rel = {}, {}
    ref = exp.reference
    if ref is not None:
        for k, v in runs.items():
            if ref.get(k) is None:
                continue
            exact = np.asarray(ref[k], dtype=float)
            err = np.sqrt(np.mean((v - exact) ** 2, axis=0))
            rmse[k] = err
            with np.errstate(divide="ignore", invalid="ignore"):
                rel[k] = np.where(exact != 0, err / np.abs(exact), np.nan)
    return BSDEResult(
        Y0=float(mean["Y0"]),
        Z0=mean["Z0"],
        phi0=mean["phi0"],
        runs=runs,
        mean=mean,
        rmse=rmse,
        rel_rmse=rel,
        wall_clock=wall,
    )
