"""Run configuration: schema, defaults, validation, parsing, serialization.

Configurations are plain YAML/JSON mappings; every omitted key falls back to
the benchmark defaults (2% noise, threshold J/3, chain length 10, etc.).
Unknown keys are rejected by name.
"""

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import yaml

from .errors import ConfigError

_DEFAULT_INTERVALS: Tuple[Tuple[float, float], ...] = (
    (0.05 * 6.0, 0.35 * 6.0),
    (math.pi / 2.0, 6.0 * math.pi),
    (-math.pi / 2.0 + 0.01, math.pi / 2.0 - 0.01),
    (0.0, 6.0),
    (0.02 * 6.0, 0.7 * 6.0),
)


@dataclass(frozen=True)
class GridConfig:
    nx: int = 24
    ny: int = 24


@dataclass(frozen=True)
class ObservationConfig:
    count: int = 36
    eps: Optional[float] = None  # default: one inference-grid cell width
    noise_fraction: float = 0.02


@dataclass(frozen=True)
class MaternConfig:
    nu: float = 1.5
    ell: float = 1.0
    sigma0_sq: float = 1.0
    mean: Optional[float] = None  # default: model-specific benchmark mean


@dataclass(frozen=True)
class SmcConfig:
    particles: int = 100
    j_thresh: Optional[float] = None  # default: particles / 3
    n_mu: int = 10
    beta: float = 0.2
    geom_step_fraction: float = 0.1
    tune: bool = True
    max_iterations: int = 200
    ess_rel_tol: float = 0.01
    mutation_enabled: bool = True


@dataclass(frozen=True)
class ReferenceConfig:
    chains: int = 4
    length: int = 100_000
    burnin: int = 10_000
    thinning: int = 100
    beta: float = 0.2


@dataclass(frozen=True)
class SolverConfig:
    method: str = "banded"
    cg_tol: float = 1e-10


@dataclass(frozen=True)
class RunConfig:
    model: str = "p1"
    grid: GridConfig = field(default_factory=GridConfig)
    truth_grid: Optional[GridConfig] = None  # default: twice the inference grid
    observations: ObservationConfig = field(default_factory=ObservationConfig)
    prior: MaternConfig = field(default_factory=MaternConfig)
    prior_inside: MaternConfig = field(default_factory=MaternConfig)
    prior_outside: MaternConfig = field(default_factory=MaternConfig)
    intervals: Tuple[Tuple[float, float], ...] = _DEFAULT_INTERVALS
    smc: SmcConfig = field(default_factory=SmcConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    data_seed: int = 90210
    seeds: Tuple[int, ...] = tuple(range(10))
    ensemble_sizes: Tuple[int, ...] = (100,)
    methods: Tuple[str, ...] = ("monomial", "transport", "kalman")
    output_dir: Optional[str] = None
    threads: int = 1


_VALID_METHODS = ("monomial", "transport", "kalman")


def _coerce_scalar(ftype, value, where):
    """Convert YAML scalars to the declared field type (YAML reads 1e-10 as text)."""
    if typing.get_origin(ftype) is typing.Union:
        if value is None:
            return None
        inner = [a for a in typing.get_args(ftype) if a is not type(None)]
        return _coerce_scalar(inner[0], value, where) if len(inner) == 1 else value
    try:
        if ftype is float:
            return float(value)
        if ftype is int and not isinstance(value, bool):
            return int(value)
        if ftype is bool:
            if isinstance(value, bool):
                return value
            raise ValueError(f"expected a boolean, got {value!r}")
        if ftype is str:
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {where!r}: {exc}") from exc
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            raise ConfigError(f"unknown configuration key {where!r}")
        ftype = fields[key].type
        if key in ("grid", "truth_grid"):
            kwargs[key] = _build(GridConfig, value, where) if value is not None else None
        elif key == "observations":
            kwargs[key] = _build(ObservationConfig, value, where)
        elif key in ("prior", "prior_inside", "prior_outside"):
            kwargs[key] = _build(MaternConfig, value, where)
        elif key == "smc":
            kwargs[key] = _build(SmcConfig, value, where)
        elif key == "reference":
            kwargs[key] = _build(ReferenceConfig, value, where)
        elif key == "solver":
            kwargs[key] = _build(SolverConfig, value, where)
        elif key == "intervals":
            kwargs[key] = tuple(tuple(float(x) for x in pair) for pair in value)
        elif key in ("seeds", "ensemble_sizes"):
            kwargs[key] = tuple(int(x) for x in value)
        elif key == "methods":
            kwargs[key] = tuple(str(x) for x in value)
        else:
            kwargs[key] = _coerce_scalar(ftype, value, where)
    return cls(**kwargs)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.model not in ("p1", "p2"):
        raise ConfigError(f"model must be 'p1' or 'p2', got {cfg.model!r}")
    if cfg.observations.noise_fraction <= 0.0:
        raise ConfigError("observations.noise_fraction must be positive")
    if cfg.observations.eps is not None and cfg.observations.eps <= 0.0:
        raise ConfigError("observations.eps must be positive")
    if cfg.smc.particles < 2:
        raise ConfigError("smc.particles must be at least 2")
    if cfg.smc.j_thresh is not None and not (1.0 <= cfg.smc.j_thresh <= cfg.smc.particles):
        raise ConfigError(
            f"smc.j_thresh must lie in [1, particles={cfg.smc.particles}], got {cfg.smc.j_thresh}"
        )
    if cfg.smc.n_mu < 1:
        raise ConfigError("smc.n_mu must be at least 1")
    if not (0.0 < cfg.smc.beta <= 1.0):
        raise ConfigError("smc.beta must lie in (0, 1]")
    for m in cfg.methods:
        if m not in _VALID_METHODS:
            raise ConfigError(f"unknown method {m!r}; valid: {_VALID_METHODS}")
    if cfg.solver.method not in ("banded", "cg"):
        raise ConfigError("solver.method must be 'banded' or 'cg'")
    if len(cfg.intervals) != 5 or any(hi <= lo for lo, hi in cfg.intervals):
        raise ConfigError("intervals must be five nonempty (lo, hi) pairs")
    if cfg.reference.thinning < 1 or cfg.reference.burnin < 0:
        raise ConfigError("reference.thinning must be >= 1 and burnin >= 0")
    if cfg.reference.burnin >= cfg.reference.length:
        raise ConfigError("reference.burnin must be smaller than reference.length")
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def parse_config_data(data: dict) -> RunConfig:
    return validate(_build(RunConfig, data or {}, ""))


def parse_config(path) -> RunConfig:
    """Load and validate a YAML or JSON configuration file."""
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if data is None:
        data = {}
    return parse_config_data(data)


def resolved(cfg: RunConfig) -> RunConfig:
    """Fill the derived defaults so the configuration is fully explicit."""
    truth_grid = cfg.truth_grid or GridConfig(nx=2 * cfg.grid.nx, ny=2 * cfg.grid.ny)
    obs = cfg.observations
    if obs.eps is None:
        obs = dataclasses.replace(obs, eps=6.0 / cfg.grid.nx)
    smc = cfg.smc
    if smc.j_thresh is None:
        smc = dataclasses.replace(smc, j_thresh=smc.particles / 3.0)
    return dataclasses.replace(cfg, truth_grid=truth_grid, observations=obs, smc=smc)


def to_json(cfg: RunConfig) -> str:
    return json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(to_json(cfg).encode()).hexdigest()[:16]
