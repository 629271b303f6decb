"""Coordinate charts for the single-particle manifold.

A chart is one coordinate patch with an explicit metric evaluator. All
evaluators are vectorized: points have shape ``(..., d)`` and tensor
outputs gain trailing ``(d, d)`` or ``(d, d, d)`` axes. Charts whose
coordinates degenerate somewhere (the polar angle of a sphere) carry a
per-axis exclusion margin; grids and walkers never enter the excluded
strips, and reflection at the margin stands in for crossing the
singular locus.

Built-in charts: ``flat``, ``circle``, ``sphere``, ``torus``, plus
table charts whose metric components are sampled on a grid and
interpolated bilinearly. Connection coefficients come from an analytic
callback when the chart has one, otherwise from central finite
differences of the metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConditioningError, DomainError

Array = np.ndarray

# Per-axis finite-difference step for metric derivatives: absolute floor
# 1e-5 with a relative 1e-5 scale, balancing truncation against rounding
# for float64.
FD_STEP_ABS = 1.0e-5
FD_STEP_REL = 1.0e-5


@dataclass(frozen=True)
class AxisSpec:
    """One coordinate axis: bounds, topology, and singular margin."""

    lo: float
    hi: float
    periodic: bool = False
    margin: float = 0.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"axis bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.margin < 0:
            raise ValueError("axis margin must be nonnegative")
        if self.periodic and self.margin != 0:
            raise ValueError("periodic axes cannot carry a singular margin")
        if 2 * self.margin >= (self.hi - self.lo):
            raise ValueError("margins leave no admissible interval")

    @property
    def period(self) -> float:
        return self.hi - self.lo

    @property
    def admissible_lo(self) -> float:
        return self.lo if self.periodic else self.lo + self.margin

    @property
    def admissible_hi(self) -> float:
        return self.hi if self.periodic else self.hi - self.margin


@dataclass(frozen=True)
class ManifoldChart:
    """A coordinate chart with vectorized geometric evaluators.

    ``metric_fn`` maps points ``(..., d)`` to symmetric matrices
    ``(..., d, d)``. The optional analytic evaluators are used when
    present; otherwise inverses, determinants and connection
    coefficients fall back to dense linear algebra and finite
    differences. ``embed_fn`` is an optional isometric embedding into
    R^k used by chart-to-chart maps and geodesic-distance presets.
    """

    name: str
    axes: tuple[AxisSpec, ...]
    metric_fn: Callable[[Array], Array]
    christoffel_fn: Optional[Callable[[Array], Array]] = None
    inverse_metric_fn: Optional[Callable[[Array], Array]] = None
    sqrt_det_fn: Optional[Callable[[Array], Array]] = None
    contracted_christoffel_fn: Optional[Callable[[Array], Array]] = None
    scalar_curvature_fn: Optional[Callable[[Array], Array]] = None
    embed_fn: Optional[Callable[[Array], Array]] = None
    metric_is_diagonal: bool = False

    @property
    def dim(self) -> int:
        return len(self.axes)

    # -- evaluators ---------------------------------------------------

    def metric(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return self.metric_fn(x)

    def inverse_metric(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if self.inverse_metric_fn is not None:
            return self.inverse_metric_fn(x)
        h = self.metric(x)
        try:
            return np.linalg.inv(h)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"singular metric block on chart '{self.name}'") from exc

    def sqrt_det(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if self.sqrt_det_fn is not None:
            return self.sqrt_det_fn(x)
        det = np.linalg.det(self.metric(x))
        if np.any(det <= 0):
            raise DomainError(f"metric determinant not positive on chart '{self.name}'")
        return np.sqrt(det)

    def christoffel(self, x: Array) -> Array:
        """Connection coefficients Gamma^a_{bc}, shape ``(..., d, d, d)``."""
        x = np.asarray(x, dtype=float)
        if self.christoffel_fn is not None:
            return self.christoffel_fn(x)
        return self._christoffel_fd(x)

    def contracted_christoffel(self, x: Array) -> Array:
        """h^{bc} Gamma^a_{bc}, shape ``(..., d)``; the diffusion drift kernel."""
        x = np.asarray(x, dtype=float)
        if self.contracted_christoffel_fn is not None:
            return self.contracted_christoffel_fn(x)
        gamma = self.christoffel(x)
        hinv = self.inverse_metric(x)
        return np.einsum("...abc,...bc->...a", gamma, hinv)

    def scalar_curvature(self, x: Array) -> Array:
        if self.scalar_curvature_fn is None:
            raise NotImplementedError(f"chart '{self.name}' has no scalar-curvature evaluator")
        return self.scalar_curvature_fn(np.asarray(x, dtype=float))

    # -- domain handling ----------------------------------------------

    def wrap(self, x: Array) -> Array:
        """Normalize periodic coordinates into their fundamental interval."""
        x = np.array(x, dtype=float, copy=True)
        for a, ax in enumerate(self.axes):
            if ax.periodic:
                x[..., a] = np.mod(x[..., a] - ax.lo, ax.period) + ax.lo
        return x

    def admissible_mask(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for a, ax in enumerate(self.axes):
            c = x[..., a]
            if ax.periodic:
                continue
            ok &= (c >= ax.admissible_lo) & (c <= ax.admissible_hi)
        return ok

    def _christoffel_fd(self, x: Array) -> Array:
        d = self.dim
        x = np.asarray(x, dtype=float)
        steps = np.maximum(FD_STEP_ABS, FD_STEP_REL * np.abs(x))
        # dh[..., c, a, b] = d h_ab / d x^c by central differences
        dh = np.empty(x.shape[:-1] + (d, d, d))
        for c in range(d):
            ax = self.axes[c]
            eps = steps[..., c]
            xp = x.copy()
            xm = x.copy()
            xp[..., c] = x[..., c] + eps
            xm[..., c] = x[..., c] - eps
            if not ax.periodic:
                if np.any(xp[..., c] >= ax.hi) or np.any(xm[..., c] <= ax.lo):
                    raise DomainError(
                        f"finite-difference stencil leaves chart '{self.name}' on axis {c}",
                        axis=c,
                    )
            dh[..., c, :, :] = (self.metric(xp) - self.metric(xm)) / (2.0 * eps)[..., None, None]
        hinv = self.inverse_metric(x)
        # Levi-Civita: Gamma^a_bc = 1/2 h^{ad} (d_b h_dc + d_c h_db - d_d h_bc)
        term = (
            np.einsum("...bdc->...dbc", dh)
            + np.einsum("...cdb->...dbc", dh)
            - dh
        )
        return 0.5 * np.einsum("...ad,...dbc->...abc", hinv, term)


# ---------------------------------------------------------------------------
# Built-in charts
# ---------------------------------------------------------------------------


def _const_metric_chart(name, axes, diag, scalar_curv=0.0, embed_fn=None):
    d = len(axes)
    diag = np.asarray(diag, dtype=float)
    g = np.diag(diag)
    ginv = np.diag(1.0 / diag)
    sqrt_det = float(np.sqrt(np.prod(diag)))

    def metric(x):
        return np.broadcast_to(g, x.shape[:-1] + (d, d)).copy()

    def inv(x):
        return np.broadcast_to(ginv, x.shape[:-1] + (d, d)).copy()

    def sdet(x):
        return np.full(x.shape[:-1], sqrt_det)

    def gamma(x):
        return np.zeros(x.shape[:-1] + (d, d, d))

    def gamma_c(x):
        return np.zeros(x.shape[:-1] + (d,))

    def curv(x):
        return np.full(x.shape[:-1], scalar_curv)

    return ManifoldChart(
        name=name,
        axes=tuple(axes),
        metric_fn=metric,
        christoffel_fn=gamma,
        inverse_metric_fn=inv,
        sqrt_det_fn=sdet,
        contracted_christoffel_fn=gamma_c,
        scalar_curvature_fn=curv,
        embed_fn=embed_fn,
        metric_is_diagonal=True,
    )


def flat_chart(dim: int = 1, extent: float | Sequence[tuple[float, float]] = 8.0) -> ManifoldChart:
    """Euclidean box chart with the identity metric.

    ``extent`` is either a half-width L (axes span [-L, L]) or an explicit
    sequence of per-axis (lo, hi) bounds.
    """
    if np.isscalar(extent):
        bounds = [(-float(extent), float(extent))] * dim
    else:
        bounds = [(float(lo), float(hi)) for lo, hi in extent]
        if len(bounds) != dim:
            raise ValueError("extent must provide one (lo, hi) pair per axis")
    axes = [AxisSpec(lo, hi, periodic=False, margin=0.0) for lo, hi in bounds]

    def embed(x):
        return np.asarray(x, dtype=float)

    return _const_metric_chart("flat", axes, np.ones(dim), embed_fn=embed)


def circle_chart(radius: float = 1.0) -> ManifoldChart:
    """A circle of given radius, angular coordinate on [0, 2*pi)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    axes = [AxisSpec(0.0, 2.0 * math.pi, periodic=True)]

    def embed(x):
        t = np.asarray(x, dtype=float)[..., 0]
        return np.stack([radius * np.cos(t), radius * np.sin(t)], axis=-1)

    return _const_metric_chart("circle", axes, np.array([radius**2]), embed_fn=embed)


DEFAULT_POLE_MARGIN = 0.05


def sphere_chart(radius: float = 1.0, margin: float = DEFAULT_POLE_MARGIN) -> ManifoldChart:
    """Polar chart (theta, phi) of a 2-sphere; poles excluded by ``margin``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r2 = radius * radius
    axes = (
        AxisSpec(0.0, math.pi, periodic=False, margin=margin),
        AxisSpec(0.0, 2.0 * math.pi, periodic=True),
    )

    def metric(x):
        th = x[..., 0]
        h = np.zeros(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = r2
        h[..., 1, 1] = r2 * np.sin(th) ** 2
        return h

    def inv(x):
        th = x[..., 0]
        h = np.zeros(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = 1.0 / r2
        h[..., 1, 1] = 1.0 / (r2 * np.sin(th) ** 2)
        return h

    def sdet(x):
        return r2 * np.abs(np.sin(x[..., 0]))

    def gamma(x):
        th = x[..., 0]
        g = np.zeros(x.shape[:-1] + (2, 2, 2))
        g[..., 0, 1, 1] = -np.sin(th) * np.cos(th)
        cot = np.cos(th) / np.sin(th)
        g[..., 1, 0, 1] = cot
        g[..., 1, 1, 0] = cot
        return g

    def gamma_c(x):
        # h^{bc} Gamma^a_bc: only the theta component survives.
        th = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2,))
        out[..., 0] = -np.cos(th) / (r2 * np.sin(th))
        return out

    def curv(x):
        return np.full(x.shape[:-1], 2.0 / r2)

    def embed(x):
        th, ph = x[..., 0], x[..., 1]
        st = np.sin(th)
        return radius * np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)

    return ManifoldChart(
        name="sphere",
        axes=axes,
        metric_fn=metric,
        christoffel_fn=gamma,
        inverse_metric_fn=inv,
        sqrt_det_fn=sdet,
        contracted_christoffel_fn=gamma_c,
        scalar_curvature_fn=curv,
        embed_fn=embed,
        metric_is_diagonal=True,
    )


def torus_chart(big_radius: float = 2.0, small_radius: float = 1.0) -> ManifoldChart:
    """Embedded torus; u is the tube angle, v runs around the central hole."""
    if not (big_radius > small_radius > 0):
        raise ValueError("torus requires big_radius > small_radius > 0")
    R, r = big_radius, small_radius
    axes = (
        AxisSpec(0.0, 2.0 * math.pi, periodic=True),
        AxisSpec(0.0, 2.0 * math.pi, periodic=True),
    )

    def ring(u):
        return R + r * np.cos(u)

    def metric(x):
        u = x[..., 0]
        h = np.zeros(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = r * r
        h[..., 1, 1] = ring(u) ** 2
        return h

    def inv(x):
        u = x[..., 0]
        h = np.zeros(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = 1.0 / (r * r)
        h[..., 1, 1] = 1.0 / ring(u) ** 2
        return h

    def sdet(x):
        return r * ring(x[..., 0])

    def gamma(x):
        u = x[..., 0]
        g = np.zeros(x.shape[:-1] + (2, 2, 2))
        g[..., 0, 1, 1] = ring(u) * np.sin(u) / r
        guv = -r * np.sin(u) / ring(u)
        g[..., 1, 0, 1] = guv
        g[..., 1, 1, 0] = guv
        return g

    def gamma_c(x):
        u = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2,))
        out[..., 0] = np.sin(u) / (r * ring(u))
        return out

    def curv(x):
        u = x[..., 0]
        return 2.0 * np.cos(u) / (r * ring(u))

    def embed(x):
        u, v = x[..., 0], x[..., 1]
        return np.stack(
            [ring(u) * np.cos(v), ring(u) * np.sin(v), r * np.sin(u)], axis=-1
        )

    return ManifoldChart(
        name="torus",
        axes=axes,
        metric_fn=metric,
        christoffel_fn=gamma,
        inverse_metric_fn=inv,
        sqrt_det_fn=sdet,
        contracted_christoffel_fn=gamma_c,
        scalar_curvature_fn=curv,
        embed_fn=embed,
        metric_is_diagonal=True,
    )


def table_chart(
    axes: Sequence[AxisSpec],
    sample_points: Sequence[Array],
    metric_samples: Array,
    name: str = "table",
) -> ManifoldChart:
    """Chart whose metric components are tabulated on a grid.

    ``metric_samples`` has shape ``grid_shape + (d, d)``; components are
    interpolated bilinearly between nodes. The table is symmetrized on
    load. Connection coefficients use the finite-difference fallback.
    """
    from scipy.interpolate import RegularGridInterpolator

    axes = tuple(axes)
    d = len(axes)
    samples = np.asarray(metric_samples, dtype=float)
    if samples.shape[-2:] != (d, d) or samples.ndim != d + 2:
        raise ValueError("metric_samples must have shape grid_shape + (d, d)")
    samples = 0.5 * (samples + np.swapaxes(samples, -1, -2))

    interpolators = {}
    for a in range(d):
        for b in range(a, d):
            interpolators[(a, b)] = RegularGridInterpolator(
                tuple(np.asarray(p, dtype=float) for p in sample_points),
                samples[..., a, b],
                method="linear",
                bounds_error=False,
                fill_value=None,
            )

    diagonal = all(
        np.allclose(samples[..., a, b], 0.0)
        for a in range(d)
        for b in range(a + 1, d)
    )

    def metric(x):
        pts = x.reshape(-1, d)
        h = np.zeros((pts.shape[0], d, d))
        for (a, b), itp in interpolators.items():
            vals = itp(pts)
            h[:, a, b] = vals
            h[:, b, a] = vals
        return h.reshape(x.shape[:-1] + (d, d))

    return ManifoldChart(
        name=name,
        axes=axes,
        metric_fn=metric,
        metric_is_diagonal=diagonal,
    )


BUILTIN_CHARTS = {
    "flat": flat_chart,
    "circle": circle_chart,
    "sphere": sphere_chart,
    "torus": torus_chart,
}


def make_chart(name: str, **params) -> ManifoldChart:
    """Build a built-in chart by name with keyword parameters."""
    try:
        factory = BUILTIN_CHARTS[name]
    except KeyError:
        raise ValueError(
            f"unknown chart '{name}'; built-ins: {sorted(BUILTIN_CHARTS)}"
        ) from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Sphere chart pairs for invariance testing
# ---------------------------------------------------------------------------


def _sphere_unembed(p: Array, radius: float) -> Array:
    n = p / radius
    z = np.clip(n[..., 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2.0 * math.pi)
    return np.stack([theta, phi], axis=-1)


@dataclass(frozen=True)
class ChartPair:
    """Two charts of the same manifold plus coordinate maps between them."""

    chart_a: ManifoldChart
    chart_b: ManifoldChart
    rotation: Array

    def a_to_b(self, x: Array) -> Array:
        p = self.chart_a.embed_fn(np.asarray(x, dtype=float))
        q = np.einsum("ij,...j->...i", self.rotation, p)
        return _sphere_unembed(q, self._radius())

    def b_to_a(self, x: Array) -> Array:
        p = self.chart_b.embed_fn(np.asarray(x, dtype=float))
        q = np.einsum("ij,...j->...i", self.rotation.T, p)
        return _sphere_unembed(q, self._radius())

    def _radius(self) -> float:
        probe = np.array([math.pi / 2, 0.0])
        return float(np.linalg.norm(self.chart_a.embed_fn(probe)))


def sphere_chart_pair(radius: float = 1.0, margin: float = DEFAULT_POLE_MARGIN) -> ChartPair:
    """Standard polar chart plus one with the pole rotated onto the +x axis.

    The second chart is functionally identical; only the correspondence
    between coordinates differs, which is exactly what invariance tests
    need.
    """
    chart_a = sphere_chart(radius, margin)
    chart_b = sphere_chart(radius, margin)
    # Rotation by pi/2 about the y axis: chart B's poles sit on chart A's
    # +-x axis, so the two charts exclude disjoint caps.
    rot = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    return ChartPair(chart_a=chart_a, chart_b=chart_b, rotation=rot)
