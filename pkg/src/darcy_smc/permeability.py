"""Parameterizations of the conductivity field.

Two models: a single log-conductivity field (P1), and a sinusoidal channel
whose interior and exterior carry separate log-conductivity fields on the
whole grid, plus five geometric scalars (P2).
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import DimensionError, DomainError
from .fields import Grid, GridField

N_GEOM = 5


class ModelKind(str, Enum):
    P1 = "p1"
    P2 = "p2"


@dataclass(frozen=True)
class ChannelGeometry:
    """Sinusoidal channel: amplitude, frequency, slope angle, intercept, width."""

    d1: float
    d2: float
    d3: float
    d4: float
    d5: float

    def __post_init__(self) -> None:
        if self.d5 <= 0:
            raise DomainError(f"channel width must be positive, got {self.d5}")
        if abs(abs(self.d3) - math.pi / 2) < 1e-12:
            raise DomainError("slope angle at +-pi/2 makes tan singular")

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3, self.d4, self.d5])

    @classmethod
    def from_array(cls, d: np.ndarray) -> "ChannelGeometry":
        if len(d) != N_GEOM:
            raise DimensionError(f"expected {N_GEOM} geometric values, got {len(d)}")
        return cls(*(float(v) for v in d))


@dataclass
class P1Parameter:
    logk: GridField

    @property
    def grid(self) -> Grid:
        return self.logk.grid


@dataclass
class P2Parameter:
    geom: ChannelGeometry
    logk_in: GridField
    logk_out: GridField

    def __post_init__(self) -> None:
        if self.logk_in.grid != self.logk_out.grid:
            raise DimensionError("inside and outside fields must share one grid")

    @property
    def grid(self) -> Grid:
        return self.logk_in.grid


Parameter = Union[P1Parameter, P2Parameter]


def model_kind(u: Parameter) -> ModelKind:
    return ModelKind.P1 if isinstance(u, P1Parameter) else ModelKind.P2


def lower_boundary(x1, geom: ChannelGeometry):
    """Height of the channel's lower edge at horizontal position x1.

    x2 = d1 sin(d2 x1 / 6) + tan(d3) x1 + d4.  Accepts scalars or arrays.
    """
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 < 0.0) or np.any(x1 > 6.0):
        raise DomainError("x1 outside [0, 6]")
    out = geom.d1 * np.sin(geom.d2 * x1 / 6.0) + math.tan(geom.d3) * x1 + geom.d4
    return out if out.ndim else float(out)


def channel_indicator(points, geom: ChannelGeometry) -> np.ndarray:
    """True where a point lies in the closed band [lower, lower + d5]."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lb = lower_boundary(pts[:, 0], geom)
    inside = (pts[:, 1] >= lb) & (pts[:, 1] <= lb + geom.d5)
    return inside if np.asarray(points).ndim > 1 else bool(inside[0])


def realize_permeability(u: Parameter) -> GridField:
    """Map a parameter to the positive conductivity field on its grid.

    P1: exp of the log-field.  P2: exp(u1) on cells whose centre falls inside
    the channel band, exp(u2) elsewhere; membership is decided at cell
    centres, with boundary cells counted as inside.
    """
    if isinstance(u, P1Parameter):
        return GridField(u.grid, np.exp(u.logk.values))
    inside = channel_indicator(u.grid.cell_centers(), u.geom)
    values = np.where(inside, np.exp(u.logk_in.values), np.exp(u.logk_out.values))
    return GridField(u.grid, values)
