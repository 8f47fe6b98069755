"""JSON experiment configuration: schema, validation, defaults.

A config file is one JSON object. Top-level keys:

``experiment``  one of EXPERIMENTS
``seed``        non-negative integer, the single source of randomness
``workers``     process count for sweeps and repeated runs
``output``      output directory
``exact_only``  skip simulation where a closed form exists

plus the parameter blocks the experiment needs (``basket``,
``constraint``, ``option``, ``solver``, ``heston``, ``pair``,
``panels``, ``checks``). Unknown keys are rejected. Errors are reported
as ``ConfigError("<field path>: <reason>")``.
"""

from __future__ import annotations

import json
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError

EXPERIMENTS = (
    "closedform-call",
    "exchange",
    "heston-figure1",
    "uncertainty-figure2",
    "bsde-table1",
    "validate",
)

COMMAND_EXPERIMENTS = {
    "table1": ("bsde-table1",),
    "heston": ("heston-figure1",),
    "figure2": ("uncertainty-figure2",),
    "closedform": ("closedform-call", "exchange"),
    "validate": ("validate",),
}


@dataclass
class Grid:
    """Inclusive evenly spaced grid; ``num`` points from ``start`` to ``stop``."""

    start: float
    stop: float
    num: int

    def values(self) -> list[float]:
        # rounding keeps 0.01-step grids on exact decimal values
        return [round(float(x), 12) for x in np.linspace(self.start, self.stop, self.num)]


@dataclass
class BasketBlock:
    sigmaS: list
    beta: list
    gamma: list
    S0: list
    H0: list


@dataclass
class ConstraintBlock:
    a: list
    h: float


@dataclass
class OptionBlock:
    kind: str
    T: float
    strike: float = 1.0
    convention: str = "printed"


@dataclass
class SolverBlock:
    M: int
    N: int
    K_per_dim: int
    R: int
    picard_iters: int = 0
    scheme: str = "mdp"
    features: str = "geometric"
    antithetic: bool = False


@dataclass
class HestonBlock:
    a: float
    b: float
    beta: float
    rho: float
    nu0: float
    K: float
    T: float
    epsilons: list
    S0: Grid


@dataclass
class PairBlock:
    sigmaS: float
    beta: float
    gamma: float
    H0: float
    S0: float
    K: float
    T: float


@dataclass
class PanelBlock:
    name: str
    sweep: str
    grid: Grid
    series: str
    series_values: list
    fixed: dict = field(default_factory=dict)


@dataclass
class ChecksBlock:
    instances: int = 20


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 2024
    workers: int = 1
    output: str = "out"
    exact_only: bool = False
    basket: BasketBlock | None = None
    constraint: ConstraintBlock | None = None
    option: OptionBlock | None = None
    solver: SolverBlock | None = None
    heston: HestonBlock | None = None
    pair: PairBlock | None = None
    panels: list[PanelBlock] | None = None
    checks: ChecksBlock | None = None


_BLOCK_TYPES = {
    "basket": BasketBlock,
    "constraint": ConstraintBlock,
    "option": OptionBlock,
    "solver": SolverBlock,
    "heston": HestonBlock,
    "pair": PairBlock,
    "checks": ChecksBlock,
}

_REQUIRED_BLOCKS = {
    "closedform-call": ("basket", "constraint", "option"),
    "exchange": ("basket", "constraint", "option"),
    "bsde-table1": ("basket", "constraint", "option", "solver"),
    "heston-figure1": ("heston",),
    "uncertainty-figure2": ("pair", "panels"),
    "validate": ("checks",),
}


# -- parsing ---------------------------------------------------------------


def _num(v, path: str, *, integer: bool = False) -> float | int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(v).__name__}")
    if integer:
        if not isinstance(v, int):
            raise ConfigError(f"{path}: expected an integer")
        return v
    if not np.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    return v


def _check_type(v, typ: str, path: str):
    if "Grid" in typ:
        return _build(Grid, v, path)
    if typ == "int":
        return _num(v, path, integer=True)
    if typ == "float":
        return _num(v, path)
    if typ == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{path}: expected true/false")
        return v
    if typ == "str":
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string")
        return v
    if typ == "list":
        if not isinstance(v, list):
            raise ConfigError(f"{path}: expected a list")
        return _numeric_tree(v, path)
    if typ == "dict":
        if not isinstance(v, dict):
            raise ConfigError(f"{path}: expected an object")
        return {k: _num(x, f"{path}.{k}") for k, x in v.items()}
    raise AssertionError(typ)


def _numeric_tree(v, path):
    if isinstance(v, list):
        return [_numeric_tree(x, f"{path}[{i}]") for i, x in enumerate(v)]
    return _num(v, path)


def _build(cls, raw, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    kwargs = {}
    for name, f in names.items():
        p = f"{path}.{name}" if path else name
        if name not in raw:
            if f.default is MISSING and f.default_factory is MISSING:
                raise ConfigError(f"{p}: missing required key")
            continue
        typ = str(f.type).replace(" | None", "")
        kwargs[name] = _check_type(raw[name], typ, p)
    return cls(**kwargs)


def from_dict(raw: Any) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    top = {k: v for k, v in raw.items() if k not in _BLOCK_TYPES and k != "panels"}
    scalars = {f.name for f in fields(ExperimentConfig)} - set(_BLOCK_TYPES) - {"panels"}
    unknown = sorted(set(top) - scalars)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "experiment" not in raw:
        raise ConfigError("experiment: missing required key")
    kwargs: dict[str, Any] = {}
    for name in scalars:
        if name in raw:
            typ = {"experiment": "str", "seed": "int", "workers": "int", "output": "str", "exact_only": "bool"}[name]
            kwargs[name] = _check_type(raw[name], typ, name)
    for name, cls in _BLOCK_TYPES.items():
        if raw.get(name) is not None:
            kwargs[name] = _build(cls, raw[name], name)
    if raw.get("panels") is not None:
        if not isinstance(raw["panels"], list):
            raise ConfigError("panels: expected a list")
        kwargs["panels"] = [_build(PanelBlock, p, f"panels[{i}]") for i, p in enumerate(raw["panels"])]
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def loads(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return from_dict(raw)


def load(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path} ({exc.strerror})") from None
    return loads(text)


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, list):
            out[f.name] = [asdict(x) if is_dataclass(x) else x for x in v]
        elif is_dataclass(v):
            out[f.name] = asdict(v)
        else:
            out[f.name] = v
    return out


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


# -- semantic validation ----------------------------------------------------


def _wrap(path: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _check_grid(g: Grid, path: str):
    if g.num < 1:
        raise ConfigError(f"{path}.num: empty sweep grid")


def validate(cfg: ExperimentConfig) -> None:
    """Check every referenced block by building the module-level objects."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    for block in _REQUIRED_BLOCKS[cfg.experiment]:
        if getattr(cfg, block) is None:
            raise ConfigError(f"{block}: required for experiment {cfg.experiment!r}")

    from .bsde import FEATURES, SCHEMES
    from .closedform import EXCHANGE_CONVENTIONS, BasketModel, Figure2Panel, UncertainPairModel
    from .heston import HestonParams
    from .model import EllipsoidConstraint

    basket = None
    if cfg.basket is not None:
        b = cfg.basket
        basket = _wrap("basket", lambda: BasketModel(b.sigmaS, b.beta, b.gamma, b.S0, b.H0))
    if cfg.constraint is not None:
        c = cfg.constraint
        _wrap("constraint.a", lambda: EllipsoidConstraint(np.diag(np.asarray(c.a, dtype=float)), c.h))
        if basket is not None and len(c.a) != basket.n:
            raise ConfigError(f"constraint.a: expected {basket.n} entries, got {len(c.a)}")
    if cfg.option is not None:
        o = cfg.option
        if o.kind not in ("call", "exchange"):
            raise ConfigError("option.kind: expected 'call' or 'exchange'")
        if o.convention not in EXCHANGE_CONVENTIONS:
            raise ConfigError(f"option.convention: expected one of {EXCHANGE_CONVENTIONS}")
        if not o.T > 0:
            raise ConfigError("option.T: must be positive")
        if o.strike < 0:
            raise ConfigError("option.strike: must be nonnegative")
    if cfg.solver is not None:
        s = cfg.solver
        for name in ("M", "N", "K_per_dim", "R"):
            if getattr(s, name) < 1:
                raise ConfigError(f"solver.{name}: must be >= 1")
        if s.picard_iters < 0:
            raise ConfigError("solver.picard_iters: must be >= 0")
        if s.scheme not in SCHEMES:
            raise ConfigError(f"solver.scheme: expected one of {SCHEMES}")
        if s.features not in FEATURES:
            raise ConfigError(f"solver.features: expected one of {FEATURES}")
    if cfg.heston is not None:
        h = cfg.heston
        _check_grid(h.S0, "heston.S0")
        if not h.epsilons:
            raise ConfigError("heston.epsilons: empty sweep grid")
        for i, e in enumerate(h.epsilons):
            _wrap(f"heston.epsilons[{i}]", lambda e=e: HestonParams(h.a, h.b, h.beta, h.rho, h.nu0, 100.0, e))
        for s0 in h.S0.values():
            if s0 <= 0:
                raise ConfigError("heston.S0: grid values must be positive")
        if not h.T > 0 or not h.K > 0:
            raise ConfigError("heston.T, heston.K: must be positive")
    if cfg.pair is not None:
        p = cfg.pair
        _wrap("pair", lambda: UncertainPairModel(p.sigmaS, p.beta, p.gamma, H0=p.H0, S0=p.S0, K=p.K, T=p.T))
    if cfg.panels is not None:
        if not cfg.panels:
            raise ConfigError("panels: empty list")
        for i, pb in enumerate(cfg.panels):
            _check_grid(pb.grid, f"panels[{i}].grid")
            _wrap(
                f"panels[{i}]",
                lambda pb=pb: Figure2Panel(pb.name, pb.sweep, tuple(pb.grid.values()), pb.series, tuple(pb.series_values), pb.fixed),
            )
            bad = sorted(set(pb.fixed) - {"rho", "delta", "h", "xi0S"})
            if bad:
                raise ConfigError(f"panels[{i}].fixed.{bad[0]}: unknown parameter")
    if cfg.checks is not None and cfg.checks.instances < 1:
        raise ConfigError("checks.instances: must be >= 1")


# -- defaults --------------------------------------------------------------

DEFAULT_FILES = {
    "table1": "table1.json",
    "heston": "heston.json",
    "figure2": "figure2.json",
    "closedform": "closedform.json",
    "validate": "validate.json",
}


def _table1_blocks():
    basket = BasketBlock(
        sigmaS=[[0.5, 0.2], [0.0, 0.4]],
        beta=[[0.3, 0.4, 0.2, 0.5], [0.5, 0.7, 0.3, 0.4]],
        gamma=[0.1, 0.3],
        S0=[1.0, 1.0],
        H0=[1.0, 1.0],
    )
    return basket, ConstraintBlock(a=[0.5, 0.65, 0.8, 0.95], h=0.3)


def default_config(command: str) -> ExperimentConfig:
    """The built-in parameter set for a CLI command."""
    if command == "table1":
        basket, constraint = _table1_blocks()
        return ExperimentConfig(
            experiment="bsde-table1",
            output="out/table1",
            basket=basket,
            constraint=constraint,
            option=OptionBlock(kind="exchange", T=1.0),
            solver=SolverBlock(M=200_000, N=16, K_per_dim=12, R=20),
        )
    if command == "closedform":
        basket, constraint = _table1_blocks()
        return ExperimentConfig(
            experiment="closedform-call",
            output="out/closedform",
            basket=basket,
            constraint=constraint,
            option=OptionBlock(kind="call", T=1.0, strike=1.0),
        )
    if command == "heston":
        return ExperimentConfig(
            experiment="heston-figure1",
            output="out/heston",
            heston=HestonBlock(
                a=0.12, b=3.0, beta=0.3, rho=-0.7, nu0=0.04, K=100.0, T=10.0,
                epsilons=[0.0, 0.1, 0.2, 0.3], S0=Grid(50.0, 150.0, 21),
            ),
        )
    if command == "figure2":
        rho = Grid(-1.0, 1.0, 201)
        return ExperimentConfig(
            experiment="uncertainty-figure2",
            output="out/figure2",
            pair=PairBlock(sigmaS=0.2, beta=0.5, gamma=0.05, H0=1.0, S0=1.0, K=1.0, T=1.0),
            panels=[
                PanelBlock("2a", "rho", rho, "h", [0.0, 0.1, 0.2, 0.3], {"xi0S": 0.0, "delta": 0.0}),
                PanelBlock("2b", "rho", rho, "h", [0.2, 0.3, 0.4, 0.5], {"xi0S": 0.2, "delta": 0.0}),
                PanelBlock("2c", "delta", Grid(0.0, 0.4, 41), "h", [0.2, 0.3, 0.4, 0.5], {"xi0S": 0.2, "rho": 0.6}),
                PanelBlock("2d", "rho", rho, "delta", [0.0, 0.05, 0.1, 0.15, 0.2], {"xi0S": 0.2, "h": 0.2}),
            ],
        )
    if command == "validate":
        return ExperimentConfig(experiment="validate", output="out/validate", checks=ChecksBlock(instances=20))
    raise ConfigError(f"<command>: unknown command {command!r}")


def golden_text(command: str) -> str:
    """Contents of the shipped default config file for ``command``."""
    return resources.files("gooddeal.configs").joinpath(DEFAULT_FILES[command]).read_text(encoding="utf-8")
