"""Misfit, tempered importance weights, effective sample size, and the
adaptive bisection that picks the next tempering parameter."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionError
from .forward import ObservationSet


@dataclass(frozen=True)
class TemperingState:
    phi_prev: float
    phi_curr: float
    iteration: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.phi_prev < self.phi_curr <= 1.0):
            raise ContractViolation(
                f"tempering parameters must satisfy 0 <= {self.phi_prev} < {self.phi_curr} <= 1"
            )


def misfit(predictions: np.ndarray, obs: ObservationSet) -> float:
    """Data misfit ||y - predictions||^2 / (2 sigma^2)."""
    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape != obs.y.shape:
        raise DimensionError(
            f"predictions have shape {predictions.shape}, data {obs.y.shape}"
        )
    r = obs.y - predictions
    return float(r @ r / (2.0 * obs.sigma**2))


def tempered_log_weights(misfits: np.ndarray, phi_prev: float, phi: float) -> np.ndarray:
    """Normalized weights proportional to exp(-(phi - phi_prev) misfit).

    Computed in log space with max subtraction so small noise levels or large
    tempering steps cannot underflow.
    """
    if phi < phi_prev:
        raise ContractViolation(f"phi={phi} must not be below phi_prev={phi_prev}")
    logw = -(phi - phi_prev) * np.asarray(misfits, dtype=float)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def log_normalizer_increment(misfits: np.ndarray, phi_prev: float, phi: float) -> float:
    """log of the mean incremental likelihood, useful for run diagnostics."""
    logw = -(phi - phi_prev) * np.asarray(misfits, dtype=float)
    m = logw.max()
    return float(m + np.log(np.mean(np.exp(logw - m))))


def ess(weights: np.ndarray) -> float:
    """Effective sample size 1 / sum w_j^2 of a normalized weight vector."""
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights**2))


def next_temperature(
    misfits: np.ndarray,
    phi_prev: float,
    j_thresh: float,
    rel_tol: float = 0.01,
    max_bisect: int = 50,
) -> tuple[float, np.ndarray]:
    """Choose the next tempering parameter and its weights.

    Returns phi = 1 outright when the full step keeps the effective sample
    size at or above the threshold; otherwise bisects on (phi_prev, 1] until
    the ESS is within rel_tol of the threshold.
    """
    misfits = np.asarray(misfits, dtype=float)
    j = misfits.size
    if not (0.0 <= phi_prev < 1.0):
        raise ContractViolation(f"phi_prev must lie in [0, 1), got {phi_prev}")
    if not (1.0 <= j_thresh <= j):
        raise ContractViolation(f"j_thresh must lie in [1, {j}], got {j_thresh}")

    w_full = tempered_log_weights(misfits, phi_prev, 1.0)
    if ess(w_full) >= j_thresh:
        return 1.0, w_full

    lo, hi = phi_prev, 1.0
    phi = 0.5 * (lo + hi)
    for _ in range(max_bisect):
        w = tempered_log_weights(misfits, phi_prev, phi)
        e = ess(w)
        if abs(e - j_thresh) <= rel_tol * j_thresh:
            return phi, w
        if e > j_thresh:
            lo = phi
        else:
            hi = phi
        phi = 0.5 * (lo + hi)
    return phi, tempered_log_weights(misfits, phi_prev, phi)
