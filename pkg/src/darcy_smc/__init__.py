"""Tempered sequential Monte Carlo for a Darcy-flow aquifer inverse problem,
with multinomial, optimal-transport, and ensemble-Kalman particle transitions."""

from .config import RunConfig, parse_config, parse_config_data, resolved
from .driver import (
    Ensemble,
    InverseProblem,
    MethodKind,
    ReferenceArchive,
    RunRecord,
    build_setup,
    initial_ensemble,
    run_experiment_sweep,
    run_reference,
    run_smc,
    summarize_sweep,
)
from .fields import Grid, GridField, constant_field
from .forward import (
    ObservationSet,
    assemble,
    forward_map,
    observe,
    recharge,
    solve_pressure,
    synthesize_data,
)
from .kalman import eki_project, eki_transform, empirical_moments, inflation
from .metrics import HistogramSpec, ensemble_variance_field, kl_marginal, mean_error
from .mutation import GibbsConfig, PcnConfig, mutate, mwg_step, pcn_step, tune_acceptance
from .permeability import (
    ChannelGeometry,
    ModelKind,
    P1Parameter,
    P2Parameter,
    channel_indicator,
    lower_boundary,
    realize_permeability,
)
from .prior import (
    CovFactor,
    MaternParams,
    PriorSpec,
    build_cov_factor,
    matern_correlation,
    prior_logdensity_ratio,
    sample_grf,
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
from .tempering import ess, misfit, next_temperature, tempered_log_weights

__all__ = [name for name in dir() if not name.startswith("_")]
