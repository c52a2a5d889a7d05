"""Uniform box grids and sampled scalar fields.

The computational domain is the box [-R, R]^N discretized with n points per
axis at spacing h = 2R/n, nodes x_i = -R + i*h.  Fields carry a time stamp and
an exterior extension rule ("zero" or "constant" continuation of the boundary
value) that every derived quantity records.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EXTERIOR_RULES = ("zero", "constant")


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on [-R, R]^ndim."""

    ndim: int
    box_radius: float
    n_points: int

    def __post_init__(self):
        if self.ndim not in (1, 2):
            raise ValueError(f"ndim must be 1 or 2, got {self.ndim}")
        if self.box_radius <= 0 or self.n_points < 8:
            raise ValueError("need box_radius > 0 and n_points >= 8")

    @property
    def h(self) -> float:
        return 2.0 * self.box_radius / self.n_points

    @property
    def axis(self) -> np.ndarray:
        return -self.box_radius + self.h * np.arange(self.n_points)

    def points(self) -> np.ndarray:
        """All grid nodes, shape (n_points**ndim, ndim)."""
        ax = self.axis
        if self.ndim == 1:
            return ax[:, None]
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    @property
    def cell_volume(self) -> float:
        return self.h**self.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.ndim


@dataclass(frozen=True)
class GridFunction:
    """Scalar field sampled on a Grid, with a time stamp and exterior rule."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    exterior: str = "zero"

    def __post_init__(self):
        if self.exterior not in EXTERIOR_RULES:
            raise ValueError(f"exterior must be one of {EXTERIOR_RULES}")
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "GridFunction":
        return replace(self, values=values, time=self.time if time is None else time)

    def integrate(self) -> float:
        return float(self.grid.cell_volume * self.values.sum())

    def norm(self, p) -> float:
        v = self.values
        if p == np.inf or p == "inf":
            return float(np.abs(v).max())
        if p == 1:
            return float(self.grid.cell_volume * np.abs(v).sum())
        if p == 2:
            return float(np.sqrt(self.grid.cell_volume * (v * v).sum()))
        raise ValueError(f"unsupported norm order {p}")


def from_callable(grid: Grid, fn, time: float = 0.0, exterior: str = "zero") -> GridFunction:
    """Sample fn on the grid.  fn takes the coordinate array (1D: x; 2D: x, y)."""
    ax = grid.axis
    if grid.ndim == 1:
        vals = np.asarray(fn(ax), dtype=float)
    else:
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        vals = np.asarray(fn(xx, yy), dtype=float)
    return GridFunction(grid, vals, time=time, exterior=exterior)


def gradient(f: GridFunction) -> list[np.ndarray]:
    """Centered differences per axis, one-sided at the box edge."""
    return list(np.gradient(f.values, f.grid.h)) if f.grid.ndim > 1 else [np.gradient(f.values, f.grid.h)]


def interior_mask(grid: Grid, fraction: float = 0.1) -> np.ndarray:
    """Boolean mask excluding the outer `fraction` of the box on each side."""
    ax = grid.axis
    cut = grid.box_radius * (1.0 - fraction)
    keep = np.abs(ax) <= cut
    if grid.ndim == 1:
        return keep
    return keep[:, None] & keep[None, :]


def power_field(grid: Grid, gamma: float, exterior: str = "zero") -> GridFunction:
    """|x|^gamma sampled on the grid; the origin cell takes its cell average.

    The cell average keeps the field integrable against singular kernels
    without regularizing the exponent.
    """
    ax = grid.axis
    if grid.ndim == 1:
        vals = np.abs(ax) ** gamma
        origin = np.argmin(np.abs(ax))
        if abs(ax[origin]) < 1e-12 * grid.h:
            h = grid.h
            vals[origin] = (h / 2.0) ** gamma / (gamma + 1.0)
    else:
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        rr = np.hypot(xx, yy)
        vals = rr**gamma
        i = np.unravel_index(np.argmin(rr), rr.shape)
        if rr[i] < 1e-12 * grid.h:
            # 16x16 subsample average over the origin cell
            u = (np.arange(16) + 0.5) / 16.0 - 0.5
            ux, uy = np.meshgrid(u * grid.h, u * grid.h, indexing="ij")
            vals[i] = np.mean(np.hypot(ux, uy) ** gamma)
    return GridFunction(grid, vals, exterior=exterior)
