"""Orchestration: adaptive tempered runs for all three particle transitions,
the long-chain MCMC reference runner, and the experiment sweep."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import RunConfig, resolved, validate
from .errors import ContractViolation, NumericalError
from .fields import Grid
from .forward import (
    ObservationSet,
    forward_map,
    synthesize_data,
    uniform_observation_locations,
)
from .kalman import clamp_geometry_rows, eki_transform, inflation
from .mutation import (
    GibbsConfig,
    MutationResult,
    PcnConfig,
    default_gibbs_config,
    mutate,
    mwg_step,
    pcn_step,
    tune_acceptance,
)
from .permeability import ModelKind, Parameter
from .prior import (
    P1_MEAN,
    P2_MEAN_INSIDE,
    P2_MEAN_OUTSIDE,
    MaternParams,
    PriorSpec,
    sample_prior,
)
from .resampling import (
    cost_matrix,
    flatten,
    multinomial_resample,
    solve_transport,
    transform_ensemble,
    unflatten,
)
from .rng import stream
from .tempering import log_normalizer_increment, misfit, next_temperature, ess


class MethodKind(str, Enum):
    MONOMIAL = "monomial"
    TRANSPORT = "transport"
    KALMAN = "kalman"


@dataclass
class Ensemble:
    particles: List[Parameter]
    weights: np.ndarray
    predictions: np.ndarray  # (J, M)
    misfits: np.ndarray  # (J,)

    @property
    def size(self) -> int:
        return len(self.particles)

    def flat(self) -> np.ndarray:
        return np.array([flatten(p) for p in self.particles])


@dataclass
class IterationRecord:
    n: int
    phi_prev: float
    phi: float
    ess: float
    log_z_increment: float
    acceptance: Dict[str, float]
    forward_solves: int
    seconds: float


@dataclass
class RunRecord:
    method: str
    model: str
    seed: int
    particles: int
    config_hash: str
    iterations: List[IterationRecord] = field(default_factory=list)
    total_seconds: float = 0.0

    def phis(self) -> List[float]:
        return [it.phi for it in self.iterations]


@dataclass
class InverseProblem:
    """Fixed ingredients of one inference: model, prior, data, solver options."""

    model: ModelKind
    prior: PriorSpec
    obs: ObservationSet
    solver_method: str = "banded"
    cg_tol: float = 1e-10

    def forward(self, particle: Parameter) -> np.ndarray:
        return forward_map(
            particle, self.obs, method=self.solver_method, cg_tol=self.cg_tol
        )


def _map_indexed(fn: Callable[[int], object], count: int, threads: int) -> list:
    """Apply fn to 0..count-1, optionally on a bounded pool of chunked workers.

    Work is split into one contiguous block per worker so results are gathered
    in index order and are identical for any worker count.
    """
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    edges = np.linspace(0, count, min(threads, count) + 1).astype(int)

    def run_block(b: int) -> list:
        return [fn(i) for i in range(edges[b], edges[b + 1])]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        blocks = list(pool.map(run_block, range(len(edges) - 1)))
    return [item for block in blocks for item in block]


def _evaluate(problem: InverseProblem, particles: List[Parameter], threads: int) -> np.ndarray:
    return np.array(_map_indexed(lambda i: problem.forward(particles[i]), len(particles), threads))


def _mutation_cfg(problem: InverseProblem, smc_cfg):
    if problem.model is ModelKind.P1:
        return PcnConfig(beta=smc_cfg.beta, n_mu=smc_cfg.n_mu)
    cfg = default_gibbs_config(problem.prior, smc_cfg.geom_step_fraction, smc_cfg.n_mu)
    return GibbsConfig(
        geom_step=cfg.geom_step, beta_in=smc_cfg.beta, beta_out=smc_cfg.beta, n_mu=smc_cfg.n_mu
    )


def initial_ensemble(problem: InverseProblem, j: int, seed: int, threads: int = 1) -> Ensemble:
    rng = stream(seed, "init")
    particles = [sample_prior(problem.prior, rng) for _ in range(j)]
    predictions = _evaluate(problem, particles, threads)
    misfits = np.array([misfit(p, problem.obs) for p in predictions])
    return Ensemble(particles, np.full(j, 1.0 / j), predictions, misfits)


def run_smc(
    problem: InverseProblem,
    smc_cfg,
    method,
    seed: int,
    threads: int = 1,
) -> tuple[Ensemble, RunRecord]:
    """One adaptive tempered run from the prior to the posterior.

    The transition between consecutive tempered measures follows the chosen
    method (multinomial resampling, optimal-transport transform, or ensemble
    Kalman update), and every particle is then mutated with the kernel that
    leaves the current tempered measure invariant. Exactly-uniform weights
    make every transition the identity and are skipped.
    """
    method = MethodKind(method)
    j = smc_cfg.particles
    if j < 2:
        raise ContractViolation("need at least 2 particles")
    j_thresh = smc_cfg.j_thresh if smc_cfg.j_thresh is not None else j / 3.0
    record = RunRecord(
        method=method.value,
        model=problem.model.value,
        seed=seed,
        particles=j,
        config_hash="",
    )
    t_start = time.perf_counter()

    ensemble = initial_ensemble(problem, j, seed, threads)
    mut_cfg = _mutation_cfg(problem, smc_cfg)
    template = ensemble.particles[0]
    phi = 0.0

    for n in range(1, smc_cfg.max_iterations + 1):
        t_iter = time.perf_counter()
        solves = 0
        phi_next, weights = next_temperature(
            ensemble.misfits, phi, j_thresh, rel_tol=smc_cfg.ess_rel_tol
        )
        log_z = log_normalizer_increment(ensemble.misfits, phi, phi_next)
        ess_n = ess(weights)

        if np.all(weights == weights[0]):
            pass  # perfectly balanced weights: every transition is the identity
        elif method is MethodKind.MONOMIAL:
            idx = multinomial_resample(weights, stream(seed, "transition", n))
            ensemble.particles = [ensemble.particles[i] for i in idx]
            ensemble.predictions = ensemble.predictions[idx]
            ensemble.misfits = ensemble.misfits[idx]
        else:
            flat = ensemble.flat()
            if method is MethodKind.TRANSPORT:
                plan = solve_transport(cost_matrix(flat), weights)
                flat = transform_ensemble(flat, plan)
            else:
                alpha = inflation(phi, phi_next)
                flat = eki_transform(
                    flat,
                    ensemble.predictions,
                    problem.obs.y,
                    alpha,
                    problem.obs.sigma**2,
                    stream(seed, "transition", n),
                )
                if problem.model is ModelKind.P2:
                    flat = clamp_geometry_rows(flat, problem.prior.intervals)
            ensemble.particles = [unflatten(row, template) for row in flat]
            ensemble.predictions = _evaluate(problem, ensemble.particles, threads)
            ensemble.misfits = np.array([misfit(p, problem.obs) for p in ensemble.predictions])
            solves += j
        ensemble.weights = np.full(j, 1.0 / j)

        acceptance: Dict[str, float] = {}
        if smc_cfg.mutation_enabled:
            def mutate_one(i: int) -> MutationResult:
                return mutate(
                    ensemble.particles[i],
                    ensemble.predictions[i],
                    float(ensemble.misfits[i]),
                    problem.prior,
                    problem.forward,
                    problem.obs,
                    phi_next,
                    mut_cfg,
                    stream(seed, "mutation", n, i),
                )

            results = _map_indexed(mutate_one, j, threads)
            ensemble.particles = [r.particle for r in results]
            ensemble.predictions = np.array([r.predictions for r in results])
            ensemble.misfits = np.array([r.misfit for r in results])
            acc_tot: Dict[str, int] = {}
            prop_tot: Dict[str, int] = {}
            for r in results:
                for k, v in r.accepts.items():
                    acc_tot[k] = acc_tot.get(k, 0) + v
                for k, v in r.proposals.items():
                    prop_tot[k] = prop_tot.get(k, 0) + v
            acceptance = {k: acc_tot[k] / prop_tot[k] for k in prop_tot}
            solves += sum(prop_tot.values())
            if smc_cfg.tune:
                mut_cfg = tune_acceptance(acceptance, mut_cfg)

        record.iterations.append(
            IterationRecord(
                n=n,
                phi_prev=phi,
                phi=phi_next,
                ess=ess_n,
                log_z_increment=log_z,
                acceptance=acceptance,
                forward_solves=solves,
                seconds=time.perf_counter() - t_iter,
            )
        )
        phi = phi_next
        if phi >= 1.0:
            break
    else:
        record.total_seconds = time.perf_counter() - t_start
        raise NumericalError(
            f"tempering did not reach phi=1 within {smc_cfg.max_iterations} iterations"
        )

    record.total_seconds = time.perf_counter() - t_start
    return ensemble, record


# ---------------------------------------------------------------------------
# Long-chain MCMC reference


@dataclass
class ReferenceArchive:
    """Thinned post-burn-in samples from independent chains at phi = 1.

    The posterior mean is accumulated over every post-burn-in state, not just
    the thinned ones, so it carries no subsampling noise.
    """

    model: str
    samples: np.ndarray  # (S, K) flattened parameters
    chain_ids: np.ndarray  # (S,)
    acceptance: Dict[str, float]
    mean_full: Optional[np.ndarray] = None

    def mean_vector(self) -> np.ndarray:
        if self.mean_full is not None:
            return self.mean_full
        return self.samples.mean(axis=0)


_ADAPT_BLOCK = 500


def run_reference(
    problem: InverseProblem,
    ref_cfg,
    seed: int,
    threads: int = 1,
    geom_step_fraction: float = 0.1,
) -> ReferenceArchive:
    """Independent MCMC chains targeting the full posterior.

    Step sizes adapt toward the 20-30% acceptance window during burn-in only,
    so the post-burn-in chains are time-homogeneous.
    """
    n_keep_per_chain = (ref_cfg.length - ref_cfg.burnin) // ref_cfg.thinning

    def run_chain(c: int):
        rng = stream(seed, "reference", c)
        state = sample_prior(problem.prior, rng)
        pred = problem.forward(state)
        mis = misfit(pred, problem.obs)
        if problem.model is ModelKind.P1:
            cfg = PcnConfig(beta=ref_cfg.beta, n_mu=1)
        else:
            base = default_gibbs_config(problem.prior, geom_step_fraction, 1)
            cfg = GibbsConfig(
                geom_step=base.geom_step, beta_in=ref_cfg.beta, beta_out=ref_cfg.beta, n_mu=1
            )
        kept = []
        acc_block: Dict[str, int] = {}
        prop_block: Dict[str, int] = {}
        acc_total = 0
        prop_total = 0
        state_sum = None
        n_sum = 0
        for step_i in range(ref_cfg.length):
            if problem.model is ModelKind.P1:
                state, pred, mis, acc = pcn_step(
                    state, pred, mis, problem.prior, problem.forward, problem.obs, 1.0, cfg, rng
                )
                flags = {"field": acc}
            else:
                state, pred, mis, flags = mwg_step(
                    state, pred, mis, problem.prior, problem.forward, problem.obs, 1.0, cfg, rng
                )
            for k, v in flags.items():
                acc_block[k] = acc_block.get(k, 0) + int(v)
                prop_block[k] = prop_block.get(k, 0) + 1
                acc_total += int(v)
                prop_total += 1
            in_burnin = step_i < ref_cfg.burnin
            if in_burnin and (step_i + 1) % _ADAPT_BLOCK == 0:
                rates = {k: acc_block[k] / prop_block[k] for k in prop_block}
                cfg = tune_acceptance(rates, cfg)
                acc_block, prop_block = {}, {}
            if not in_burnin:
                vec = flatten(state)
                state_sum = vec.copy() if state_sum is None else state_sum + vec
                n_sum += 1
                if (step_i - ref_cfg.burnin) % ref_cfg.thinning == ref_cfg.thinning - 1:
                    kept.append(vec)
        return np.array(kept[:n_keep_per_chain]), acc_total / max(prop_total, 1), state_sum, n_sum

    results = _map_indexed(run_chain, ref_cfg.chains, threads)
    samples = np.concatenate([r[0] for r in results], axis=0)
    chain_ids = np.concatenate(
        [np.full(len(results[c][0]), c) for c in range(ref_cfg.chains)]
    )
    acceptance = {f"chain_{c}": results[c][1] for c in range(ref_cfg.chains)}
    mean_full = sum(r[2] for r in results) / sum(r[3] for r in results)
    return ReferenceArchive(problem.model.value, samples, chain_ids, acceptance, mean_full)


# ---------------------------------------------------------------------------
# Experiment setup and sweep


@dataclass
class ExperimentSetup:
    config: RunConfig  # resolved
    problem: InverseProblem
    truth: Parameter
    grid: Grid
    truth_grid: Grid


def _matern(cfg_matern, default_mean: float) -> MaternParams:
    mean = cfg_matern.mean if cfg_matern.mean is not None else default_mean
    return MaternParams(
        nu=cfg_matern.nu, ell=cfg_matern.ell, sigma0_sq=cfg_matern.sigma0_sq, mean=mean
    )


def _prior_spec(cfg: RunConfig, grid: Grid) -> PriorSpec:
    model = ModelKind(cfg.model)
    return PriorSpec(
        model=model,
        grid=grid,
        matern=_matern(cfg.prior, P1_MEAN),
        matern_in=_matern(cfg.prior_inside, P2_MEAN_INSIDE),
        matern_out=_matern(cfg.prior_outside, P2_MEAN_OUTSIDE),
        intervals=np.asarray(cfg.intervals),
    )


def build_setup(cfg: RunConfig) -> ExperimentSetup:
    """Resolve the configuration and synthesize the truth and data."""
    rcfg = resolved(validate(cfg))
    grid = Grid(rcfg.grid.nx, rcfg.grid.ny)
    fine = Grid(rcfg.truth_grid.nx, rcfg.truth_grid.ny)
    spec = _prior_spec(rcfg, grid)
    truth_spec = _prior_spec(rcfg, fine)
    rng_truth = stream(rcfg.data_seed, "truth")
    truth = sample_prior(truth_spec, rng_truth)
    locations = uniform_observation_locations(rcfg.observations.count)
    obs = synthesize_data(
        truth,
        locations,
        rcfg.observations.noise_fraction,
        rng_truth,
        eps=rcfg.observations.eps,
        inference_grid=grid,
    )
    problem = InverseProblem(
        ModelKind(rcfg.model), spec, obs, rcfg.solver.method, rcfg.solver.cg_tol
    )
    return ExperimentSetup(rcfg, problem, truth, grid, fine)


def run_experiment_sweep(
    cfg: RunConfig,
    reference: Optional[ReferenceArchive] = None,
    setup: Optional[ExperimentSetup] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> tuple[List[dict], ReferenceArchive, ExperimentSetup]:
    """Cross product of seeds, ensemble sizes, and methods, with metrics.

    Failures in individual cells are recorded and the sweep continues.
    """
    from . import metrics as metrics_mod

    say = progress or (lambda _msg: None)
    setup = setup or build_setup(cfg)
    rcfg = setup.config
    if reference is None:
        say(f"running reference ({rcfg.reference.chains} chains x {rcfg.reference.length})")
        reference = run_reference(
            setup.problem, rcfg.reference, rcfg.data_seed, threads=rcfg.threads
        )
    rows: List[dict] = []
    import dataclasses as _dc

    for j in rcfg.ensemble_sizes:
        for method in rcfg.methods:
            for seed in rcfg.seeds:
                smc_cfg = _dc.replace(rcfg.smc, particles=j, j_thresh=None)
                say(f"run: J={j} method={method} seed={seed}")
                t0 = time.perf_counter()
                try:
                    ensemble, record = run_smc(
                        setup.problem, smc_cfg, method, seed, threads=rcfg.threads
                    )
                    row = metrics_mod.run_metrics(setup, ensemble, reference)
                    row.update(
                        model=rcfg.model,
                        method=method,
                        particles=j,
                        seed=seed,
                        iterations=len(record.iterations),
                        seconds=time.perf_counter() - t0,
                        error_message="",
                    )
                except Exception as exc:  # noqa: BLE001 - sweep must survive cell failures
                    row = {
                        "model": rcfg.model,
                        "method": method,
                        "particles": j,
                        "seed": seed,
                        "iterations": 0,
                        "seconds": time.perf_counter() - t0,
                        "error_message": str(exc),
                    }
                rows.append(row)
    return rows, reference, setup


def summarize_sweep(rows: List[dict]) -> List[dict]:
    """Median and quartiles of every numeric metric per (particles, method)."""
    cells: Dict[tuple, List[dict]] = {}
    for row in rows:
        if row.get("error_message"):
            continue
        cells.setdefault((row["particles"], row["method"]), []).append(row)
    summary = []
    for (j, method), group in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        out = {"particles": j, "method": method, "runs": len(group)}
        numeric = [
            k
            for k, v in group[0].items()
            if isinstance(v, (int, float)) and k not in ("particles", "seed")
        ]
        for k in numeric:
            vals = np.array([row[k] for row in group], dtype=float)
            out[f"{k}_median"] = float(np.median(vals))
            out[f"{k}_q25"] = float(np.percentile(vals, 25))
            out[f"{k}_q75"] = float(np.percentile(vals, 75))
        summary.append(out)
    return summary
