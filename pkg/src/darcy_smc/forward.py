"""Steady Darcy flow on [0,6]^2: discretization, pressure solve, observations.

Cell-centred finite volumes with harmonic face conductivities. Dirichlet
sides fix the boundary layer of cell centres; flux sides prescribe the inflow
density through boundary faces. The default setup is the aquifer benchmark:
pressure 100 along the bottom, inflow 500 through the left side, no flow
through the top and right sides, and a recharge term that increases with
height.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import cg

from .errors import ConfigError, DimensionError, DomainError, InvalidFieldError, NumericalError
from .fields import DOMAIN_SIDE, Grid, GridField, rms_norm
from .permeability import Parameter, realize_permeability

BCValue = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def recharge(x2):
    """Piecewise-constant recharge rate as a function of height.

    0 on [0,4], 137 on (4,5), 274 on [5,6]; the piece boundaries follow the
    half-open conventions of the benchmark. Scalars or arrays.
    """
    x2 = np.asarray(x2, dtype=float)
    if np.any(x2 < 0.0) or np.any(x2 > DOMAIN_SIDE):
        raise DomainError("recharge coordinate outside [0, 6]")
    out = np.where(x2 < 5.0, np.where(x2 <= 4.0, 0.0, 137.0), 274.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SideCondition:
    """One side of the boundary: Dirichlet pressure or prescribed inflow density."""

    kind: str  # "dirichlet" | "flux"
    value: BCValue = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("dirichlet", "flux"):
            raise ConfigError(f"unknown boundary kind {self.kind!r}")

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if callable(self.value):
            return np.broadcast_to(np.asarray(self.value(x, y), dtype=float), x.shape).copy()
        return np.full(x.shape, float(self.value))


@dataclass(frozen=True)
class BoundaryConditions:
    bottom: SideCondition
    top: SideCondition
    left: SideCondition
    right: SideCondition


def aquifer_boundary_conditions() -> BoundaryConditions:
    """Benchmark conditions: h=100 on the bottom, inflow 500 on the left."""
    return BoundaryConditions(
        bottom=SideCondition("dirichlet", 100.0),
        top=SideCondition("flux", 0.0),
        left=SideCondition("flux", 500.0),
        right=SideCondition("flux", 0.0),
    )


def dirichlet_everywhere(value: BCValue) -> BoundaryConditions:
    side = SideCondition("dirichlet", value)
    return BoundaryConditions(bottom=side, top=side, left=side, right=side)


@dataclass
class ObservationSet:
    """Smoothed point observations: locations, kernel width, noise level, data."""

    locations: np.ndarray
    eps: float
    sigma: float
    y: np.ndarray

    def __post_init__(self) -> None:
        self.locations = np.atleast_2d(np.asarray(self.locations, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.locations.shape[0] < 1 or self.locations.shape[1] != 2:
            raise DimensionError("locations must be an (M, 2) array with M >= 1")
        if np.any(self.locations <= 0.0) or np.any(self.locations >= DOMAIN_SIDE):
            raise DomainError("observation locations must lie strictly inside the domain")
        if self.eps <= 0.0:
            raise ConfigError("kernel width eps must be positive")
        if self.sigma <= 0.0:
            raise ConfigError("noise std sigma must be positive")
        if self.y.shape != (self.locations.shape[0],):
            raise DimensionError("data vector length must match the number of locations")

    @property
    def m(self) -> int:
        return self.locations.shape[0]


def uniform_observation_locations(count: int) -> np.ndarray:
    """A sqrt(count) x sqrt(count) lattice strictly inside the domain."""
    m = round(count**0.5)
    if m * m != count or m < 1:
        raise ConfigError(f"observation count must be a perfect square, got {count}")
    ticks = DOMAIN_SIDE * np.arange(1, m + 1) / (m + 1)
    xg, yg = np.meshgrid(ticks, ticks)
    return np.column_stack([xg.ravel(), yg.ravel()])


# ---------------------------------------------------------------------------
# Discretization


@dataclass
class LinearSystem:
    """Reduced SPD system over the free (non-Dirichlet) cells."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_pos: np.ndarray  # flat cell index -> position among free cells, -1 if fixed
    fixed_values: np.ndarray  # full-grid vector; NaN on free cells
    grid: Grid


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def _assemble_parts(conductivity: GridField, bc: BoundaryConditions, source):
    """Shared assembly: transmissibilities, free-cell numbering, diag/rhs.

    Returns (diag, pairs_pos_lo, pairs_offset, pairs_val, rhs, free_pos,
    fixed_values) where pairs describe the symmetric off-diagonal couplings
    between free cells in lower-triangular (column = lower position) form.
    """
    grid = conductivity.grid
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    kap = conductivity.as_matrix()
    if np.any(kap <= 0.0) or not np.all(np.isfinite(kap)):
        raise InvalidFieldError("conductivity must be finite and strictly positive")

    xs, ys = grid.center_xs(), grid.center_ys()

    # Dirichlet layer: cells along dirichlet sides are fixed at the side value
    # evaluated at their centres (bottom, top, left, right precedence order).
    fixed = np.zeros((ny, nx), dtype=bool)
    fixed_vals = np.full((ny, nx), np.nan)
    for name, rows, cols in (
        ("bottom", np.zeros(nx, dtype=int), np.arange(nx)),
        ("top", np.full(nx, ny - 1), np.arange(nx)),
        ("left", np.arange(ny), np.zeros(ny, dtype=int)),
        ("right", np.arange(ny), np.full(ny, nx - 1)),
    ):
        side: SideCondition = getattr(bc, name)
        if side.kind != "dirichlet":
            continue
        fresh = ~fixed[rows, cols]
        vals = side.evaluate(xs[cols], ys[rows])
        fixed[rows[fresh], cols[fresh]] = True
        fixed_vals[rows[fresh], cols[fresh]] = vals[fresh]

    free = ~fixed
    n_free = int(free.sum())
    if n_free == 0:
        raise InvalidFieldError("no free cells: all boundary layers are Dirichlet")
    free_pos = np.full(ny * nx, -1, dtype=int)
    free_pos[free.ravel()] = np.arange(n_free)
    pos = free_pos.reshape(ny, nx)

    # Face transmissibilities from harmonic conductivity averages.
    th = _harmonic(kap[:, :-1], kap[:, 1:]) * (hy / hx)  # between ix, ix+1
    tv = _harmonic(kap[:-1, :], kap[1:, :]) * (hx / hy)  # between iy, iy+1

    diag2d = np.zeros((ny, nx))
    diag2d[:, :-1] += th
    diag2d[:, 1:] += th
    diag2d[:-1, :] += tv
    diag2d[1:, :] += tv

    if source is None:
        rhs2d = np.broadcast_to(recharge(ys)[:, None] * (hx * hy), (ny, nx)).copy()
    else:
        xg, yg = np.meshgrid(xs, ys)
        rhs2d = np.asarray(source(xg, yg), dtype=float) * (hx * hy)

    # faces between a free and a fixed cell move the known value to the rhs
    fv = fixed_vals
    for free_blk, fixed_blk, t, rhs_blk, fv_blk in (
        (free[:, :-1], fixed[:, 1:], th, rhs2d[:, :-1], fv[:, 1:]),
        (free[:, 1:], fixed[:, :-1], th, rhs2d[:, 1:], fv[:, :-1]),
        (free[:-1, :], fixed[1:, :], tv, rhs2d[:-1, :], fv[1:, :]),
        (free[1:, :], fixed[:-1, :], tv, rhs2d[1:, :], fv[:-1, :]),
    ):
        m = free_blk & fixed_blk
        if m.any():
            rhs_blk[m] += t[m] * fv_blk[m]

    # prescribed inflow through boundary faces of flux sides
    for name, rows, cols, fx, fy, length in (
        ("bottom", np.zeros(nx, dtype=int), np.arange(nx), xs, np.zeros(nx), hx),
        ("top", np.full(nx, ny - 1), np.arange(nx), xs, np.full(nx, grid.ly), hx),
        ("left", np.arange(ny), np.zeros(ny, dtype=int), np.zeros(ny), ys, hy),
        ("right", np.arange(ny), np.full(ny, nx - 1), np.full(ny, grid.lx), ys, hy),
    ):
        side = getattr(bc, name)
        if side.kind != "flux":
            continue
        keep = free[rows, cols]
        if keep.any():
            q = side.evaluate(fx, fy)
            rhs2d[rows[keep], cols[keep]] += q[keep] * length

    # off-diagonal couplings between adjacent free cells; the flat index of
    # the first cell is always lower, so it is the column in lower-banded form
    both_h = free[:, :-1] & free[:, 1:]
    both_v = free[:-1, :] & free[1:, :]
    lo_h = pos[:, :-1][both_h]
    lo_v = pos[:-1, :][both_v]
    pair_lo = np.concatenate([lo_h, lo_v])
    pair_off = np.concatenate([pos[:, 1:][both_h] - lo_h, pos[1:, :][both_v] - lo_v])
    pair_val = np.concatenate([-th[both_h], -tv[both_v]])

    return diag2d[free], pair_lo, pair_off, pair_val, rhs2d[free], free_pos, fixed_vals.ravel()


def assemble(
    conductivity: GridField,
    bc: Optional[BoundaryConditions] = None,
    source=None,
) -> LinearSystem:
    """Assemble the reduced sparse system for the pressure unknowns."""
    bc = bc or aquifer_boundary_conditions()
    diag, lo, off, val, rhs, free_pos, fixed_values = _assemble_parts(conductivity, bc, source)
    n = diag.size
    rows = np.concatenate([np.arange(n), lo, lo + off])
    cols = np.concatenate([np.arange(n), lo + off, lo])
    data = np.concatenate([diag, val, val])
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return LinearSystem(matrix, rhs, free_pos, fixed_values, conductivity.grid)


def solve_pressure(
    conductivity: GridField,
    bc: Optional[BoundaryConditions] = None,
    source=None,
    method: str = "banded",
    cg_tol: float = 1e-10,
) -> GridField:
    """Solve for the pressure field on the full grid.

    "banded" uses a direct symmetric banded Cholesky; "cg" uses conjugate
    gradients with a relative residual tolerance.
    """
    bc = bc or aquifer_boundary_conditions()
    diag, lo, off, val, rhs, free_pos, fixed_values = _assemble_parts(conductivity, bc, source)
    n = diag.size

    if method == "banded":
        bw = int(off.max()) if off.size else 0
        ab = np.zeros((bw + 1, n))
        ab[0, :] = diag
        ab[off, lo] = val
        try:
            h_free = solveh_banded(ab, rhs, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
            raise NumericalError(f"banded factorization failed: {exc}") from exc
    elif method == "cg":
        rows = np.concatenate([np.arange(n), lo, lo + off])
        cols = np.concatenate([np.arange(n), lo + off, lo])
        data = np.concatenate([diag, val, val])
        matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        h_free, info = cg(matrix, rhs, rtol=cg_tol, atol=0.0, maxiter=20 * n)
        if info != 0:
            res = np.linalg.norm(matrix @ h_free - rhs) / np.linalg.norm(rhs)
            raise NumericalError(f"cg did not converge (info={info}, rel residual {res:.3e})")
    else:
        raise ConfigError(f"unknown solver method {method!r}")

    h = fixed_values.copy()
    h[free_pos >= 0] = h_free
    return GridField(conductivity.grid, h)


# ---------------------------------------------------------------------------
# Observations


@lru_cache(maxsize=64)
def _observation_matrix_cached(grid: Grid, eps: float, loc_bytes: bytes, m: int) -> sp.csr_matrix:
    locations = np.frombuffer(loc_bytes).reshape(m, 2)
    centers = grid.cell_centers()
    rows, cols, vals = [], [], []
    for i, x0 in enumerate(locations):
        d2 = np.sum((centers - x0) ** 2, axis=1)
        mask = d2 <= (4.0 * eps) ** 2
        if not np.any(mask):
            mask = d2 == d2.min()
        # shift by the minimum distance so the nearest cell has weight 1
        w = np.exp(-(d2[mask] - d2[mask].min()) / (2.0 * eps**2))
        w /= w.sum()
        idx = np.nonzero(mask)[0]
        rows.extend([i] * idx.size)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, grid.n_cells))


def observation_matrix(grid: Grid, locations: np.ndarray, eps: float) -> sp.csr_matrix:
    """Sparse (M, n_cells) operator of truncated, renormalized Gaussian kernels."""
    locations = np.ascontiguousarray(np.atleast_2d(locations), dtype=float)
    return _observation_matrix_cached(grid, float(eps), locations.tobytes(), locations.shape[0])


def observe(pressure: GridField, obs: ObservationSet) -> np.ndarray:
    """Kernel-averaged pressure at the observation locations."""
    op = observation_matrix(pressure.grid, obs.locations, obs.eps)
    return op @ pressure.values


def forward_map(
    u: Parameter,
    obs: ObservationSet,
    bc: Optional[BoundaryConditions] = None,
    method: str = "banded",
    cg_tol: float = 1e-10,
) -> np.ndarray:
    """Parameter-to-observations map: conductivity, pressure, observation."""
    kappa = realize_permeability(u)
    h = solve_pressure(kappa, bc=bc, method=method, cg_tol=cg_tol)
    return observe(h, obs)


def synthesize_data(
    truth: Parameter,
    obs_locations: np.ndarray,
    noise_fraction: float,
    rng: np.random.Generator,
    eps: float,
    inference_grid: Optional[Grid] = None,
) -> ObservationSet:
    """Generate noisy observations from a truth parameter on its (fine) grid.

    The noise std is noise_fraction times the root-mean-square of the true
    pressure field, so "2% noise" means 2% of the typical pressure value. When an inference grid is given, the truth grid must be at least
    twice as fine per axis so synthetic data does not reuse the inference
    discretization.
    """
    if noise_fraction <= 0.0:
        raise ConfigError("noise_fraction must be positive")
    fine = truth.grid
    if inference_grid is not None:
        if fine.nx < 2 * inference_grid.nx or fine.ny < 2 * inference_grid.ny:
            raise ConfigError(
                f"truth grid {fine.nx}x{fine.ny} must be at least twice the "
                f"inference grid {inference_grid.nx}x{inference_grid.ny}"
            )
    kappa = realize_permeability(truth)
    h = solve_pressure(kappa)
    sigma = noise_fraction * rms_norm(h)
    op = observation_matrix(fine, np.atleast_2d(obs_locations), eps)
    predictions = op @ h.values
    y = predictions + sigma * rng.standard_normal(predictions.size)
    return ObservationSet(locations=obs_locations, eps=eps, sigma=sigma, y=y)


def restrict_to_grid(field: GridField, coarse: Grid) -> GridField:
    """Injection of a fine field onto a coarser grid by sampling cell centres.

    Each coarse centre picks the fine cell containing it under the half-open
    cell convention.
    """
    fine = field.grid
    ix = np.minimum((coarse.center_xs() / fine.hx).astype(int), fine.nx - 1)
    iy = np.minimum((coarse.center_ys() / fine.hy).astype(int), fine.ny - 1)
    mat = field.as_matrix()[np.ix_(iy, ix)]
    return GridField(coarse, mat.ravel())
