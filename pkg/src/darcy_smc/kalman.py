"""Ensemble Kalman particle update with tempering-derived inflation.

One update step moves every particle by a gain built from ensemble
cross-covariances, against observations perturbed with inflated noise, so the
ensemble tracks the Gaussian approximation of the next tempered measure.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ContractViolation, DegenerateEnsembleError, DimensionError, NumericalError
from .permeability import N_GEOM, P2Parameter, Parameter
from .prior import PriorSpec
from .resampling import flatten, unflatten


@dataclass
class EnsembleMoments:
    mean: np.ndarray  # (K,)
    data_mean: np.ndarray  # (M,)
    cov_ug: np.ndarray  # (K, M) parameter-data cross covariance
    cov_gg: np.ndarray  # (M, M) data covariance


def empirical_moments(particles_flat: np.ndarray, predictions: np.ndarray) -> EnsembleMoments:
    """Unbiased (1/(J-1)) sample moments of particles and their predictions."""
    u = np.asarray(particles_flat, dtype=float)
    g = np.asarray(predictions, dtype=float)
    if u.ndim != 2 or g.ndim != 2 or u.shape[0] != g.shape[0]:
        raise DimensionError("particles and predictions must be (J, K) and (J, M)")
    j = u.shape[0]
    if j < 2:
        raise DegenerateEnsembleError("moments need at least 2 particles")
    mean = u.mean(axis=0)
    data_mean = g.mean(axis=0)
    du = u - mean
    dg = g - data_mean
    cov_ug = du.T @ dg / (j - 1)
    cov_gg = dg.T @ dg / (j - 1)
    return EnsembleMoments(mean, data_mean, cov_ug, cov_gg)


def inflation(phi_prev: float, phi: float) -> float:
    """Inflation factor 1 / (phi - phi_prev) for the current tempering step."""
    if phi <= phi_prev:
        raise ContractViolation(f"phi={phi} must exceed phi_prev={phi_prev}")
    return 1.0 / (phi - phi_prev)


def eki_transform(
    particles_flat: np.ndarray,
    predictions: np.ndarray,
    y: np.ndarray,
    alpha: float,
    sigma_sq: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Kalman update with perturbed observations.

    u_hat = u + C_uG (C_GG + alpha sigma^2 I)^{-1} (y + eta - G(u)),
    eta ~ N(0, alpha sigma^2 I) drawn per particle.
    """
    if alpha <= 0.0:
        raise ContractViolation("inflation alpha must be positive")
    mom = empirical_moments(particles_flat, predictions)
    m = mom.cov_gg.shape[0]
    noise = alpha * sigma_sq
    eta = np.sqrt(noise) * rng.standard_normal(predictions.shape)
    residual = y[None, :] + eta - predictions  # (J, M)
    try:
        factor = cho_factor(mom.cov_gg + noise * np.eye(m), lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD since noise > 0
        raise NumericalError(f"gain factorization failed: {exc}") from exc
    return particles_flat + cho_solve(factor, residual.T).T @ mom.cov_ug.T


def clamp_geometry_rows(particles_flat: np.ndarray, intervals: np.ndarray) -> np.ndarray:
    """Clamp the leading geometric coordinates of every row into their intervals."""
    out = np.asarray(particles_flat, dtype=float).copy()
    out[:, :N_GEOM] = np.clip(out[:, :N_GEOM], intervals[:, 0], intervals[:, 1])
    return out


def eki_project(particle: Parameter, spec: PriorSpec) -> Parameter:
    """Clamp the geometric coordinates back into their prior intervals."""
    if not isinstance(particle, P2Parameter):
        return particle
    vec = flatten(particle)
    vec[:N_GEOM] = np.clip(vec[:N_GEOM], spec.intervals[:, 0], spec.intervals[:, 1])
    return unflatten(vec, particle)
