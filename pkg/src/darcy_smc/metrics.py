"""Evaluation metrics: mean-field error, histogram KL divergence of geometric
marginals, ensemble variance fields, and per-run metric rows for sweeps."""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError, DegenerateEnsembleError, DimensionError
from .fields import GridField
from .permeability import N_GEOM, ModelKind

_BIN_FLOOR = 1e-10


def mean_error(mean_field: GridField, reference_mean: GridField) -> float:
    """Cell-area-weighted L2 norm of the difference of two mean fields."""
    if mean_field.grid != reference_mean.grid:
        raise DimensionError("mean fields live on different grids")
    diff = mean_field.values - reference_mean.values
    return float(np.sqrt(mean_field.grid.cell_area * np.sum(diff**2)))


@dataclass(frozen=True)
class HistogramSpec:
    bins: int
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ConfigError(f"need at least 2 bins, got {self.bins}")
        if self.hi <= self.lo:
            raise ConfigError("histogram range must be nonempty")

    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)


def _binned_density(samples, weights, spec: HistogramSpec) -> np.ndarray:
    counts, _ = np.histogram(samples, bins=spec.edges(), weights=weights)
    counts = counts.astype(float)
    total = counts.sum()
    if total > 0:
        counts /= total
    counts += _BIN_FLOOR
    return counts / counts.sum()


def kl_marginal(
    ref_samples: np.ndarray,
    approx_samples: np.ndarray,
    spec: HistogramSpec,
    approx_weights: Optional[np.ndarray] = None,
) -> float:
    """KL divergence of binned marginals, reference against approximation.

    Both sample sets are histogrammed on the shared prior-interval binning;
    a small floor added to every bin before normalization keeps the statistic
    finite when the approximation leaves bins empty.
    """
    p_ref = _binned_density(np.asarray(ref_samples, dtype=float), None, spec)
    p = _binned_density(np.asarray(approx_samples, dtype=float), approx_weights, spec)
    return float(np.sum(p_ref * np.log(p_ref / p)))


def ensemble_variance_field(fields: List[GridField]) -> GridField:
    """Per-cell unbiased sample variance across an ensemble of fields."""
    if len(fields) < 2:
        raise DegenerateEnsembleError("variance needs at least 2 fields")
    grid = fields[0].grid
    values = np.array([f.values for f in fields])
    return GridField(grid, values.var(axis=0, ddof=1))


def run_metrics(setup, ensemble, reference) -> Dict[str, float]:
    """Error and KL metrics of one finished run against a reference archive."""
    grid = setup.grid
    n = grid.n_cells
    flat = ensemble.flat()
    ref_mean = reference.mean_vector()
    row: Dict[str, float] = {}
    if setup.problem.model is ModelKind.P1:
        row["error_mean"] = mean_error(
            GridField(grid, flat.mean(axis=0)), GridField(grid, ref_mean)
        )
    else:
        mean_vec = flat.mean(axis=0)
        row["error_mean_inside"] = mean_error(
            GridField(grid, mean_vec[N_GEOM : N_GEOM + n]),
            GridField(grid, ref_mean[N_GEOM : N_GEOM + n]),
        )
        row["error_mean_outside"] = mean_error(
            GridField(grid, mean_vec[N_GEOM + n :]),
            GridField(grid, ref_mean[N_GEOM + n :]),
        )
        intervals = setup.problem.prior.intervals
        bins = max(ensemble.size // 10, 2)
        for i in range(N_GEOM):
            spec = HistogramSpec(bins, intervals[i, 0], intervals[i, 1])
            row[f"kl_d{i + 1}"] = kl_marginal(
                reference.samples[:, i], flat[:, i], spec, ensemble.weights
            )
    return row
