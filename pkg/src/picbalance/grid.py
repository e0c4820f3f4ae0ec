"""Domain geometry, the grid-element sub-grid and the per-element cost field."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

Rect = Tuple[int, int, int, int]  # (ix0, ix1, iy0, iy1), half-open


@dataclass(frozen=True)
class Domain:
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"domain extents must be positive, got {self.lx}x{self.ly}")

    def wrap(self, x, y):
        """Wrap coordinates into [0, lx) x [0, ly)."""
        x = np.mod(x, self.lx)
        y = np.mod(y, self.ly)
        # np.mod can round up to exactly lx for tiny negative inputs
        x = np.where(x >= self.lx, 0.0, x)
        y = np.where(y >= self.ly, 0.0, y)
        return x, y


@dataclass(frozen=True)
class GridElementGrid:
    gx: int
    gy: int

    def __post_init__(self):
        if self.gx < 1 or self.gy < 1:
            raise ValueError(f"grid element counts must be >= 1, got {self.gx}x{self.gy}")

    @property
    def n_elements(self) -> int:
        return self.gx * self.gy

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.gx, self.gy)

    @property
    def full_rect(self) -> Rect:
        return (0, self.gx, 0, self.gy)


@dataclass(frozen=True)
class FieldGrid:
    nx: int
    ny: int
    dom: Domain

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"field grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return self.dom.lx / self.nx

    @property
    def hy(self) -> float:
        return self.dom.ly / self.ny

    def check_compatible(self, geg: GridElementGrid) -> None:
        if self.nx % geg.gx or self.ny % geg.gy:
            raise ValueError(
                f"field grid {self.nx}x{self.ny} is not divisible by grid elements "
                f"{geg.gx}x{geg.gy} (need nx mod gx == 0 and ny mod gy == 0)"
            )


def locate_grid_element(x, y, geg: GridElementGrid, dom: Domain):
    """Grid-element indices (i, j) of wrapped positions.

    Works on scalars and arrays alike; positions are wrapped first so the
    result is always in range.
    """
    x, y = dom.wrap(x, y)
    # the minimum guards against x*gx/lx rounding up to gx
    i = np.minimum(np.floor(x * geg.gx / dom.lx).astype(np.int64), geg.gx - 1)
    j = np.minimum(np.floor(y * geg.gy / dom.ly).astype(np.int64), geg.gy - 1)
    if np.ndim(i) == 0:
        return int(i), int(j)
    return i, j


@dataclass
class CostField:
    """Per-element load estimate: particle count plus ``beta`` times FE count.

    Prefix sums are built once at construction; the field is treated as
    immutable afterwards (build a new one when counts change).
    """

    particles: np.ndarray
    fe: np.ndarray | None = None
    beta: float = 0.0
    _prefix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.particles = np.asarray(self.particles)
        if self.particles.ndim != 2:
            raise ValueError("particle counts must be a 2D (gx, gy) array")
        if self.fe is None:
            self.fe = np.zeros_like(self.particles)
        self.fe = np.asarray(self.fe)
        if self.fe.shape != self.particles.shape:
            raise ValueError("finite-element counts must match particle count shape")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if (self.particles < 0).any() or (self.fe < 0).any():
            raise ValueError("counts must be non-negative")
        self.cost = self.particles + self.beta * self.fe if self.beta else self.particles.copy()
        gx, gy = self.particles.shape
        pre = np.zeros((gx + 1, gy + 1), dtype=self.cost.dtype)
        pre[1:, 1:] = self.cost.cumsum(axis=0).cumsum(axis=1)
        self._prefix = pre

    @classmethod
    def from_costs(cls, costs) -> "CostField":
        return cls(np.asarray(costs))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.particles.shape

    @property
    def total(self):
        return self._prefix[-1, -1]

    def region_cost(self, rect: Rect):
        """Sum of element costs over ``rect`` in O(1)."""
        ix0, ix1, iy0, iy1 = rect
        gx, gy = self.shape
        if not (0 <= ix0 <= ix1 <= gx and 0 <= iy0 <= iy1 <= gy):
            raise IndexError(f"rect {rect} out of bounds for {gx}x{gy} grid")
        p = self._prefix
        return p[ix1, iy1] - p[ix0, iy1] - p[ix1, iy0] + p[ix0, iy0]


def region_cost(cf: CostField, rect: Rect):
    return cf.region_cost(rect)


def cost_field_from_particles(ei, ej, geg: GridElementGrid, fe=None, beta: float = 0.0) -> CostField:
    """Histogram particle element indices into a cost field."""
    flat = np.asarray(ei, dtype=np.int64) * geg.gy + np.asarray(ej, dtype=np.int64)
    counts = np.bincount(flat, minlength=geg.n_elements).reshape(geg.gx, geg.gy)
    return CostField(counts, fe, beta)


def imbalance(loads: Sequence[float]) -> float:
    """max/mean of per-rank loads; 1.0 for an all-zero vector."""
    loads = np.asarray(loads, dtype=float)
    if loads.size == 0:
        raise ValueError("imbalance of an empty load vector")
    if (loads < 0).any():
        raise ValueError("loads must be non-negative")
    mean = loads.mean()
    if mean == 0:
        return 1.0
    return float(loads.max() / mean)
