"""Structured grids over the admissible configuration-space domain.

Nodes are cell-centered: axis [lo, hi] with count k has nodes at
lo + (j + 1/2) * (hi - lo) / k. Cell centering keeps nodes off
coordinate singularities and makes the no-flux treatment of bounded
axes natural. Periodic axes wrap, so spacing * count equals the axis
period by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .space import ConfigurationSpace

Array = np.ndarray

MIN_NODES_PER_AXIS = 8


@dataclass(frozen=True)
class GridAxis:
    lo: float
    hi: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if self.count < MIN_NODES_PER_AXIS:
            raise ValueError(f"grid axes need >= {MIN_NODES_PER_AXIS} nodes, got {self.count}")
        if not self.hi > self.lo:
            raise ValueError("grid axis requires hi > lo")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.count

    @property
    def centers(self) -> Array:
        return self.lo + (np.arange(self.count) + 0.5) * self.spacing


@dataclass(frozen=True)
class GridSpec:
    axes: tuple[GridAxis, ...]

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.count for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(ax.spacing for ax in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def mesh(self) -> list[Array]:
        """Per-axis coordinate arrays broadcast to the grid shape."""
        return list(np.meshgrid(*(ax.centers for ax in self.axes), indexing="ij"))

    def points(self) -> Array:
        """All node coordinates, shape ``grid.shape + (ndim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def flat_points(self) -> Array:
        return self.points().reshape(-1, self.ndim)

    def cell_index(self, x: Array) -> tuple[Array, ...]:
        """Cell indices containing the points ``(..., ndim)``."""
        x = np.asarray(x, dtype=float)
        idx = []
        for a, ax in enumerate(self.axes):
            j = np.floor((x[..., a] - ax.lo) / ax.spacing).astype(np.int64)
            if ax.periodic:
                j = np.mod(j, ax.count)
            else:
                j = np.clip(j, 0, ax.count - 1)
            idx.append(j)
        return tuple(idx)

    @classmethod
    def for_space(cls, cs: ConfigurationSpace, counts: Sequence[int]) -> "GridSpec":
        """Grid covering the admissible domain of the configuration space."""
        specs = cs.axis_specs
        if len(counts) != len(specs):
            raise ValueError(f"need {len(specs)} axis counts, got {len(counts)}")
        axes = []
        for (i, a, spec), k in zip(specs, counts):
            axes.append(
                GridAxis(
                    lo=spec.admissible_lo,
                    hi=spec.admissible_hi,
                    count=int(k),
                    periodic=spec.periodic,
                )
            )
        return cls(axes=tuple(axes))


FIELD_ROLES = ("density", "drift_potential", "phase", "potential", "curvature_potential", "")


@dataclass
class GridField:
    """Real scalar field sampled at grid nodes."""

    grid: GridSpec
    values: Array
    role: str = ""
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy(), self.role, self.time)


@dataclass
class WaveField:
    """Complex field sampled at grid nodes."""

    grid: GridSpec
    values: Array
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy(), self.time)


def volume_weights(cs: ConfigurationSpace, grid: GridSpec) -> Array:
    """Invariant cell measure sqrt(det M) * cell_volume at every node."""
    pts = grid.points()
    return cs._sqrt_det_mass_unchecked(pts) * grid.cell_volume


def integrate(weights: Array, values: Array) -> float:
    return float(np.sum(weights * values))


def inner(weights: Array, f: Array, g: Array) -> complex | float:
    out = np.sum(weights * np.conj(f) * g)
    return complex(out) if np.iscomplexobj(out) else float(out)


def normalize_density(cs: ConfigurationSpace, field: GridField) -> GridField:
    w = volume_weights(cs, field.grid)
    total = float(np.sum(w * field.values))
    if total <= 0:
        raise ValueError("cannot normalize a field with nonpositive mass")
    return GridField(field.grid, field.values / total, role="density", time=field.time)
