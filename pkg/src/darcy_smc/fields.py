"""Uniform cell-centred grids on the aquifer domain and scalar fields on them."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError

DOMAIN_SIDE = 6.0


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid covering [0, lx] x [0, ly].

    Cells are numbered row-major with x fastest: cell (ix, iy) has flat
    index k = iy * nx + ix and centre ((ix + 1/2) hx, (iy + 1/2) hy).
    """

    nx: int
    ny: int
    lx: float = DOMAIN_SIDE
    ly: float = DOMAIN_SIDE

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise DimensionError(f"grid needs at least 2 cells per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def center_xs(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def center_ys(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def cell_centers(self) -> np.ndarray:
        """(n_cells, 2) array of cell-centre coordinates in flat order."""
        return _cell_centers(self)


@lru_cache(maxsize=32)
def _cell_centers(grid: Grid) -> np.ndarray:
    xg, yg = np.meshgrid(grid.center_xs(), grid.center_ys())
    pts = np.column_stack([xg.ravel(), yg.ravel()])
    pts.setflags(write=False)
    return pts


@dataclass
class GridField:
    """A scalar function sampled at the cell centres of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise DimensionError(
                f"field has {self.values.size} values for a grid of {self.grid.n_cells} cells"
            )

    def as_matrix(self) -> np.ndarray:
        """View the values as an (ny, nx) array (row iy, column ix)."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())


def constant_field(grid: Grid, value: float) -> GridField:
    return GridField(grid, np.full(grid.n_cells, float(value)))


def l2_norm(field: GridField) -> float:
    """Cell-area-weighted discrete L2 norm, comparable across resolutions."""
    return float(np.sqrt(field.grid.cell_area * np.sum(field.values**2)))


def rms_norm(field: GridField) -> float:
    """Root-mean-square over cells: the L2 norm under the normalized measure."""
    return float(np.sqrt(np.mean(field.values**2)))
