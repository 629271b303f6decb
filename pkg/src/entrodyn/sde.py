"""Walker ensembles sampling the short-step entropic transition kernel.

Each step moves every walker by b(x) dt + dw, with all coefficients
evaluated at the pre-step point (Ito convention). The drift is

    b^A = eta M^{AB} d_B phi - (eta/2) M^{BC} Gamma^A_{BC},

whose second, connection term compensates for coordinate displacements
not transforming as vectors: with it, pure diffusion equilibrates to
the uniform volume measure. Fluctuations are zero-mean Gaussian with
covariance eta M^{AB}(x) dt, sampled block-by-block per particle.

Randomness comes from counter-based Philox streams keyed on
(seed, step index), with Gaussians produced by a deterministic
Box-Muller transform (no rejection), so draw (w, axis) of any step is
reproducible bit-for-bit regardless of how walkers are partitioned
across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .errors import ConditioningError, DomainError
from .geometry import ConfigurationSpace, GridField, GridSpec, volume_weights
from .geometry.laplace import nodal_gradient
from .params import SimParams

Array = np.ndarray

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# reproducible draws
# ---------------------------------------------------------------------------


def philox_uniforms(seed: int, stream: int, shape) -> Array:
    """Positionally reproducible uniforms in [0, 1) from a keyed Philox."""
    key = np.array([np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF), np.uint64(stream)], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(size=shape)


def philox_normals(seed: int, stream: int, shape) -> Array:
    """Standard normals via Box-Muller on Philox uniforms.

    Two uniforms feed each output draw, keeping the map from (walker,
    axis) slots to random numbers strictly positional.
    """
    u = philox_uniforms(seed, stream, tuple(shape) + (2,))
    r = np.sqrt(-2.0 * np.log1p(-u[..., 0]))
    return r * np.cos(_TWO_PI * u[..., 1])


# ---------------------------------------------------------------------------
# drift potentials
# ---------------------------------------------------------------------------


class DriftPotential:
    """Scalar drift potential with a gradient, evaluable on point batches."""

    def value(self, x: Array) -> Array:
        raise NotImplementedError

    def gradient(self, x: Array) -> Array:
        raise NotImplementedError


class ZeroPotential(DriftPotential):
    def value(self, x):
        return np.zeros(np.asarray(x).shape[:-1])

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class CallablePotential(DriftPotential):
    """Analytic callback; gradient falls back to central differences."""

    def __init__(self, fn: Callable[[Array], Array], grad: Optional[Callable[[Array], Array]] = None,
                 fd_step: float = 1.0e-6):
        self.fn = fn
        self.grad = grad
        self.fd_step = fd_step

    def value(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x))
        out = np.empty_like(x)
        for a in range(x.shape[-1]):
            xp = x.copy()
            xm = x.copy()
            xp[..., a] += self.fd_step
            xm[..., a] -= self.fd_step
            out[..., a] = (self.fn(xp) - self.fn(xm)) / (2.0 * self.fd_step)
        return out


class GridPotential(DriftPotential):
    """Potential tabulated on a grid; multilinear interpolation of the
    node values and of centered-difference nodal gradients."""

    def __init__(self, field: GridField):
        self.field = field
        self.grid = field.grid
        self._grad = nodal_gradient(self.grid, field.values)

    def _interp(self, table: Array, x: Array) -> Array:
        grid = self.grid
        x = np.asarray(x, dtype=float)
        idx_lo = []
        frac = []
        for a, ax in enumerate(grid.axes):
            t = (x[..., a] - ax.lo) / ax.spacing - 0.5
            if ax.periodic:
                j = np.floor(t).astype(np.int64)
                frac.append(t - j)
                idx_lo.append(np.mod(j, ax.count))
            else:
                t = np.clip(t, 0.0, ax.count - 1.0)
                j = np.clip(np.floor(t).astype(np.int64), 0, ax.count - 2)
                frac.append(t - j)
                idx_lo.append(j)
        out = np.zeros(x.shape[:-1] + table.shape[grid.ndim:])
        for corner in range(2**grid.ndim):
            weight = np.ones(x.shape[:-1])
            idx = []
            for a in range(grid.ndim):
                bit = (corner >> a) & 1
                w_a = frac[a] if bit else (1.0 - frac[a])
                weight = weight * w_a
                j = idx_lo[a] + bit
                if grid.axes[a].periodic:
                    j = np.mod(j, grid.axes[a].count)
                idx.append(j)
            vals = table[tuple(idx)]
            out += weight[..., None] * vals if vals.ndim > weight.ndim else weight * vals
        return out

    def value(self, x):
        return self._interp(self.field.values, x)

    def gradient(self, x):
        return self._interp(self._grad, x)


PotentialLike = Union[DriftPotential, GridField, Callable[[Array], Array], None]


def as_potential(phi: PotentialLike) -> DriftPotential:
    if phi is None:
        return ZeroPotential()
    if isinstance(phi, DriftPotential):
        return phi
    if isinstance(phi, GridField):
        return GridPotential(phi)
    if callable(phi):
        return CallablePotential(phi)
    raise TypeError(f"cannot interpret {type(phi)!r} as a drift potential")


# ---------------------------------------------------------------------------
# ensembles and stepping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkerEnsemble:
    """W sample points in configuration space at a common time."""

    positions: Array
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2:
            raise ValueError("positions must have shape (walkers, dim)")
        object.__setattr__(self, "positions", pos)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


class DriftVelocity(NamedTuple):
    total: Array      # b^A, includes the connection term (not a vector)
    covariant: Array  # eta M^{AB} d_B phi, transforms as a vector


def drift_velocity(cs: ConfigurationSpace, x: Array, phi: PotentialLike, p: SimParams) -> DriftVelocity:
    """Ito drift of the entropic step at pre-point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    pot = as_potential(phi)
    if isinstance(pot, ZeroPotential):
        btilde = np.zeros_like(x)
    else:
        btilde = p.eta * cs.apply_inverse_mass(x, pot.gradient(x))
    b = btilde - 0.5 * p.eta * cs.contracted_christoffel(x)
    return DriftVelocity(total=b, covariant=btilde)


def _fluctuations(cs: ConfigurationSpace, x: Array, z: Array, p: SimParams) -> Array:
    """Gaussian displacements with covariance eta M^{AB}(x) dt, per block."""
    W = x.shape[0]
    N, d = cs.num_particles, cs.chart.dim
    xi = cs.split(x).reshape(W * N, d)
    zi = cs.split(z).reshape(W * N, d)
    mass = np.broadcast_to(np.asarray(cs.masses), (W, N)).reshape(W * N)
    var_scale = p.eta * p.dt / mass
    hinv = cs.chart.inverse_metric(xi)
    if cs.chart.metric_is_diagonal:
        sig = np.sqrt(var_scale[:, None] * np.einsum("...aa->...a", hinv))
        dw = sig * zi
    else:
        cov = var_scale[:, None, None] * hinv
        try:
            L = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            dets = np.linalg.det(cov)
            bad = int(np.argmin(dets))
            raise ConditioningError(
                f"non-positive-definite fluctuation block for walker {bad // N}, particle {bad % N}",
                block=bad % N,
            ) from exc
        dw = np.einsum("...ab,...b->...a", L, zi)
    return dw.reshape(W, N * d)


def sample_step(
    ens: WalkerEnsemble,
    cs: ConfigurationSpace,
    phi: PotentialLike,
    p: SimParams,
    *,
    include_connection_drift: bool = True,
) -> WalkerEnsemble:
    """Advance every walker by one entropic step.

    Deterministic given (p.seed, ens.step_index). ``include_connection_drift``
    exists so tests can demonstrate that dropping the connection term
    breaks the volume-measure equilibrium; production callers leave it on.
    """
    x = ens.positions
    if x.shape[1] != cs.dim:
        raise ValueError(f"ensemble dimension {x.shape[1]} != space dimension {cs.dim}")
    if not bool(np.all(cs.admissible_mask(x))):
        bad = int(np.argmin(cs.admissible_mask(x)))
        raise DomainError(f"walker {bad} outside the admissible domain before stepping")
    drift = drift_velocity(cs, x, phi, p)
    b = drift.total if include_connection_drift else drift.covariant
    z = philox_normals(p.seed, ens.step_index, x.shape)
    dw = _fluctuations(cs, x, z, p)
    x_new = cs.reflect(x + b * p.dt + dw)
    return WalkerEnsemble(positions=x_new, t=ens.t + p.dt, step_index=ens.step_index + 1)


# ---------------------------------------------------------------------------
# covariant displacement and transition density
# ---------------------------------------------------------------------------


def covariant_displacement(cs: ConfigurationSpace, x: Array, dx: Array) -> Array:
    """The displacement corrected to transform as a vector at ``x``."""
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    gamma = cs.christoffel(x)
    return dx + 0.5 * np.einsum("...abc,...b,...c->...a", gamma, dx, dx)


def coordinate_displacement(cs: ConfigurationSpace, x_from: Array, x_to: Array) -> Array:
    """x_to - x_from with minimal-image convention on periodic axes."""
    dx = np.asarray(x_to, dtype=float) - np.asarray(x_from, dtype=float)
    for idx, (_, _, spec) in enumerate(cs.axis_specs):
        if spec.periodic:
            half = 0.5 * spec.period
            dx[..., idx] = np.mod(dx[..., idx] + half, spec.period) - half
    return dx


class TransitionDensity(NamedTuple):
    value: float
    short_step: bool  # False flags a step outside the short-step regime


def _log_transition_terms(cs, x_from, x_to, phi, p):
    """Log transition density for one source point and a batch of targets."""
    x_from = np.asarray(x_from, dtype=float)
    x_to = np.asarray(x_to, dtype=float)
    n = cs.dim
    dx = coordinate_displacement(cs, x_from, x_to)
    gamma = cs.christoffel(x_from)
    dxt = dx + 0.5 * np.einsum("abc,...b,...c->...a", gamma, dx, dx)
    pot = as_potential(phi)
    if isinstance(pot, ZeroPotential):
        mean = np.zeros(n)
    else:
        mean = p.eta * p.dt * cs.apply_inverse_mass(x_from, pot.gradient(x_from))
    u = dxt - mean
    M = cs.mass_tensor(x_from)
    quad = np.einsum("...a,ab,...b->...", u, M, u) / (2.0 * p.eta * p.dt)
    log_prefactor = np.log(cs._sqrt_det_mass_unchecked(x_to)) - 0.5 * n * np.log(
        2.0 * math.pi * p.eta * p.dt
    )
    return log_prefactor - quad, dxt


def transition_density(
    cs: ConfigurationSpace, x_from: Array, x_to: Array, phi: PotentialLike, p: SimParams
) -> TransitionDensity:
    """Short-step transition density between two configuration points.

    The quadratic form is taken in the covariant displacement, the
    volume factor at the arrival point, and the Gaussian normalizer
    from the metric at the departure point (the determinants cancel,
    leaving (2 pi eta dt)^(-n/2)).
    """
    cs.require_admissible(np.asarray(x_from, dtype=float), "source point")
    cs.require_admissible(np.asarray(x_to, dtype=float), "target point")
    logp, dxt = _log_transition_terms(cs, x_from, np.asarray(x_to, dtype=float)[None, :], phi, p)
    minv = cs.inverse_mass(np.asarray(x_from, dtype=float))
    scale = 6.0 * math.sqrt(p.eta * p.dt * float(np.max(np.linalg.eigvalsh(minv))))
    ok = bool(np.linalg.norm(dxt[0]) <= scale)
    return TransitionDensity(value=float(np.exp(logp[0])), short_step=ok)


# ---------------------------------------------------------------------------
# density estimation
# ---------------------------------------------------------------------------


def bin_counts(ens_positions: Array, grid: GridSpec) -> Array:
    """Histogram walker positions into grid cells."""
    idx = grid.cell_index(ens_positions)
    flat = np.ravel_multi_index(idx, grid.shape)
    return np.bincount(flat, minlength=grid.size).reshape(grid.shape).astype(float)


def density_from_counts(counts: Array, cs: ConfigurationSpace, grid: GridSpec) -> GridField:
    """Scalar density estimate from accumulated cell counts.

    Counts are divided by (total count * coordinate cell volume *
    sqrt(det M) at the cell center) and the result renormalized so the
    invariant-measure integral is exactly one.
    """
    total = float(np.sum(counts))
    if total <= 0:
        raise ValueError("cannot estimate a density from an empty ensemble")
    w = volume_weights(cs, grid)
    rho = counts / (total * w)
    rho /= np.sum(rho * w)
    return GridField(grid, rho, role="density")


def estimate_density(ens: WalkerEnsemble, cs: ConfigurationSpace, grid: GridSpec) -> GridField:
    if ens.size == 0:
        raise ValueError("cannot estimate a density from an empty ensemble")
    field = density_from_counts(bin_counts(ens.positions, grid), cs, grid)
    field.time = ens.t
    return field


# ---------------------------------------------------------------------------
# Monte-Carlo information metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InformationMetricEstimate:
    matrix: Array
    stderr: Array
    samples: int
    wide_error: bool


def information_metric_mc(
    cs: ConfigurationSpace,
    x: Array,
    p: SimParams,
    samples: int,
    phi: PotentialLike = None,
) -> InformationMetricEstimate:
    """Monte-Carlo estimate of the transition-kernel information metric.

    Draws one entropic step from ``x`` per sample and averages the
    outer product of score functions d_A log P(x'|x), obtained by
    central differences of the log transition density with respect to
    the source point. The scale factor multiplying the metric is fixed
    to one. Expected structure: M_AB(x) / (eta dt).
    """
    x = np.asarray(x, dtype=float)
    cs.require_admissible(x, "evaluation point")
    n = cs.dim
    wide = samples < 100_000

    start = WalkerEnsemble(positions=np.broadcast_to(x, (samples, n)).copy(), t=0.0, step_index=0)
    stepped = sample_step(start, cs, phi, p)
    x_to = stepped.positions

    sigma = np.sqrt(p.eta * p.dt * np.diagonal(cs.inverse_mass(x)))
    scores = np.empty((samples, n))
    for a in range(n):
        eps = 1.0e-4 * sigma[a]
        xp = x.copy()
        xm = x.copy()
        xp[a] += eps
        xm[a] -= eps
        lp, _ = _log_transition_terms(cs, xp, x_to, phi, p)
        lm, _ = _log_transition_terms(cs, xm, x_to, phi, p)
        scores[:, a] = (lp - lm) / (2.0 * eps)

    outer = scores[:, :, None] * scores[:, None, :]
    g = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / math.sqrt(samples)
    return InformationMetricEstimate(matrix=g, stderr=se, samples=samples, wide_error=wide)
