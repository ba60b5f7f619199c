"""MCMC mutation kernels invariant under the tempered measures.

Gaussian blocks move by autoregressive prior-reversible proposals whose
acceptance ratio involves only the tempered likelihood; the channel model adds
a Metropolis-within-Gibbs sweep whose geometric block is a bounded random walk
with reflection at the interval endpoints.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import ConfigError
from .fields import GridField
from .forward import ObservationSet
from .permeability import ChannelGeometry, P1Parameter, P2Parameter, Parameter
from .prior import PriorSpec
from .tempering import misfit

ACCEPT_WINDOW = (0.2, 0.3)
SHRINK, GROW = 0.8, 1.25


@dataclass(frozen=True)
class PcnConfig:
    beta: float = 0.2
    n_mu: int = 10

    def __post_init__(self) -> None:
        if not (0.0 < self.beta <= 1.0):
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if self.n_mu < 1:
            raise ConfigError(f"chain length must be at least 1, got {self.n_mu}")


@dataclass(frozen=True)
class GibbsConfig:
    geom_step: np.ndarray
    beta_in: float = 0.2
    beta_out: float = 0.2
    n_mu: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "geom_step", np.asarray(self.geom_step, dtype=float))
        if np.any(self.geom_step < 0.0):
            raise ConfigError("geometric step scales must be nonnegative")
        for b in (self.beta_in, self.beta_out):
            if not (0.0 < b <= 1.0):
                raise ConfigError(f"beta must lie in (0, 1], got {b}")
        if self.n_mu < 1:
            raise ConfigError(f"chain length must be at least 1, got {self.n_mu}")


def default_gibbs_config(spec: PriorSpec, step_fraction: float = 0.1, n_mu: int = 10) -> GibbsConfig:
    widths = spec.intervals[:, 1] - spec.intervals[:, 0]
    return GibbsConfig(geom_step=step_fraction * widths, n_mu=n_mu)


def reflect(x, lo, hi):
    """Fold a value into [lo, hi] by repeated reflection at the endpoints."""
    x = np.asarray(x, dtype=float)
    width = hi - lo
    t = np.mod(x - lo, 2.0 * width)
    out = lo + np.minimum(t, 2.0 * width - t)
    return out if out.ndim else float(out)


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    if log_ratio >= 0.0:
        rng.random()  # keep the stream aligned regardless of the branch
        return True
    return math.log(rng.random() + 1e-300) < log_ratio


def pcn_vector_step(
    state: np.ndarray,
    predictions: np.ndarray,
    current_misfit: float,
    mean: float,
    chol: np.ndarray,
    forward: Callable[[np.ndarray], np.ndarray],
    obs: ObservationSet,
    phi: float,
    beta: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, float, bool]:
    """One pcn proposal/accept step on a Gaussian-prior coordinate block.

    Proposal: sqrt(1-beta^2) state + (1 - sqrt(1-beta^2)) mean + beta L xi.
    Acceptance probability: min(1, exp(-phi (misfit' - misfit))).
    """
    root = math.sqrt(1.0 - beta * beta)
    xi = chol @ rng.standard_normal(state.size)
    proposal = root * state + (1.0 - root) * mean + beta * xi
    pred_prop = forward(proposal)
    mis_prop = misfit(pred_prop, obs)
    if _accept(-phi * (mis_prop - current_misfit), rng):
        return proposal, pred_prop, mis_prop, True
    return state, predictions, current_misfit, False


def pcn_step(
    state: P1Parameter,
    predictions: np.ndarray,
    current_misfit: float,
    spec: PriorSpec,
    forward: Callable[[Parameter], np.ndarray],
    obs: ObservationSet,
    phi: float,
    cfg: PcnConfig,
    rng: np.random.Generator,
) -> Tuple[P1Parameter, np.ndarray, float, bool]:
    """pcn step for the single-field model."""
    vec, pred, mis, acc = pcn_vector_step(
        state.logk.values,
        predictions,
        current_misfit,
        spec.matern.mean,
        spec.factor().chol,
        lambda v: forward(P1Parameter(GridField(state.grid, v))),
        obs,
        phi,
        cfg.beta,
        rng,
    )
    return P1Parameter(GridField(state.grid, vec)), pred, mis, acc


def mwg_step(
    state: P2Parameter,
    predictions: np.ndarray,
    current_misfit: float,
    spec: PriorSpec,
    forward: Callable[[Parameter], np.ndarray],
    obs: ObservationSet,
    phi: float,
    cfg: GibbsConfig,
    rng: np.random.Generator,
) -> Tuple[P2Parameter, np.ndarray, float, Dict[str, bool]]:
    """One Metropolis-within-Gibbs sweep: geometry, inside field, outside field.

    The geometric proposal moves all five coordinates jointly and reflects at
    the interval endpoints, which preserves reversibility with respect to the
    uniform prior, so every block accepts on the tempered likelihood ratio.
    """
    flags: Dict[str, bool] = {}
    lo, hi = spec.intervals[:, 0], spec.intervals[:, 1]

    d = state.geom.as_array()
    d_prop = reflect(d + cfg.geom_step * rng.standard_normal(d.size), lo, hi)
    candidate = P2Parameter(ChannelGeometry.from_array(d_prop), state.logk_in, state.logk_out)
    pred_prop = forward(candidate)
    mis_prop = misfit(pred_prop, obs)
    if _accept(-phi * (mis_prop - current_misfit), rng):
        state, predictions, current_misfit = candidate, pred_prop, mis_prop
        flags["geom"] = True
    else:
        flags["geom"] = False

    for name, factor, mean, beta, rebuild in (
        (
            "field_in",
            spec.factor_in(),
            spec.matern_in.mean,
            cfg.beta_in,
            lambda v, s: P2Parameter(s.geom, GridField(s.grid, v), s.logk_out),
        ),
        (
            "field_out",
            spec.factor_out(),
            spec.matern_out.mean,
            cfg.beta_out,
            lambda v, s: P2Parameter(s.geom, s.logk_in, GridField(s.grid, v)),
        ),
    ):
        current = state.logk_in.values if name == "field_in" else state.logk_out.values
        vec, pred, mis, acc = pcn_vector_step(
            current,
            predictions,
            current_misfit,
            mean,
            factor.chol,
            lambda v, s=state, rb=rebuild: forward(rb(v, s)),
            obs,
            phi,
            beta,
            rng,
        )
        if acc:
            state = rebuild(vec, state)
            predictions, current_misfit = pred, mis
        flags[name] = acc

    return state, predictions, current_misfit, flags


@dataclass
class MutationResult:
    particle: Parameter
    predictions: np.ndarray
    misfit: float
    accepts: Dict[str, int]
    proposals: Dict[str, int]


def mutate(
    particle: Parameter,
    predictions: np.ndarray,
    current_misfit: float,
    spec: PriorSpec,
    forward: Callable[[Parameter], np.ndarray],
    obs: ObservationSet,
    phi: float,
    cfg,
    rng: np.random.Generator,
) -> MutationResult:
    """Run the chain-length worth of kernel steps on one particle."""
    accepts: Dict[str, int] = {}
    proposals: Dict[str, int] = {}
    if isinstance(particle, P1Parameter):
        for _ in range(cfg.n_mu):
            particle, predictions, current_misfit, acc = pcn_step(
                particle, predictions, current_misfit, spec, forward, obs, phi, cfg, rng
            )
            accepts["field"] = accepts.get("field", 0) + int(acc)
            proposals["field"] = proposals.get("field", 0) + 1
    else:
        for _ in range(cfg.n_mu):
            particle, predictions, current_misfit, flags = mwg_step(
                particle, predictions, current_misfit, spec, forward, obs, phi, cfg, rng
            )
            for name, acc in flags.items():
                accepts[name] = accepts.get(name, 0) + int(acc)
                proposals[name] = proposals.get(name, 0) + 1
    return MutationResult(particle, predictions, current_misfit, accepts, proposals)


def _scaled(value: float, rate: float, lo: float = 1e-4, hi: float = 1.0) -> float:
    if rate < ACCEPT_WINDOW[0]:
        value *= SHRINK
    elif rate > ACCEPT_WINDOW[1]:
        value *= GROW
    return min(max(value, lo), hi)


def tune_acceptance(rates: Dict[str, float], cfg):
    """Rescale step sizes between tempering iterations toward the 20-30% window."""
    if isinstance(cfg, PcnConfig):
        return replace(cfg, beta=_scaled(cfg.beta, rates.get("field", 0.25)))
    assert isinstance(cfg, GibbsConfig)
    geom_rate = rates.get("geom", 0.25)
    step = cfg.geom_step
    if geom_rate < ACCEPT_WINDOW[0]:
        step = step * SHRINK
    elif geom_rate > ACCEPT_WINDOW[1]:
        step = step * GROW
    return replace(
        cfg,
        geom_step=step,
        beta_in=_scaled(cfg.beta_in, rates.get("field_in", 0.25)),
        beta_out=_scaled(cfg.beta_out, rates.get("field_out", 0.25)),
    )
