"""N-particle configuration space over a single chart.

The configuration-space metric is block-diagonal over particles: block i
is the particle mass times the chart metric at that particle's
coordinates. Every operation here exploits that structure, assembling
or inverting d x d blocks instead of the full (N d) x (N d) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConditioningError, DomainError
from .charts import AxisSpec, ManifoldChart

Array = np.ndarray


@dataclass(frozen=True)
class NormalCoordinateReport:
    """Diagnostics from probing exponential normal coordinates at a point.

    ``metric_deviation`` is the max-norm distance of the transformed
    metric from its flat block value at probe radius r; it scales as
    O(r^2). ``metric_gradient`` is the divided difference
    |M(xi) - M(0)| / r, a first-derivative magnitude on the probe ball,
    and scales as O(r). ``metric_gradient_center`` estimates the first
    derivative at the expansion point itself by antisymmetric probing;
    it vanishes to O(r^2), which is the defining property of the frame.
    """

    probe_radius: float
    metric_deviation: float
    metric_gradient: float
    metric_gradient_center: float
    n_probes: int


@dataclass(frozen=True)
class ConfigurationSpace:
    """N particles with masses on a common chart."""

    chart: ManifoldChart
    masses: tuple[float, ...]

    def __post_init__(self):
        if len(self.masses) == 0:
            raise ValueError("at least one particle required")
        if any(m <= 0 for m in self.masses):
            raise ValueError("masses must be positive")
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @property
    def num_particles(self) -> int:
        return len(self.masses)

    @property
    def dim(self) -> int:
        return self.num_particles * self.chart.dim

    @property
    def axis_specs(self) -> tuple[tuple[int, int, AxisSpec], ...]:
        """Per configuration-space axis: (particle, chart axis, spec)."""
        out = []
        for i in range(self.num_particles):
            for a, spec in enumerate(self.chart.axes):
                out.append((i, a, spec))
        return tuple(out)

    # -- shape helpers --------------------------------------------------

    def split(self, x: Array) -> Array:
        """View points ``(..., n)`` as per-particle blocks ``(..., N, d)``."""
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (self.num_particles, self.chart.dim))

    def join(self, xs: Array) -> Array:
        xs = np.asarray(xs, dtype=float)
        return xs.reshape(xs.shape[:-2] + (self.dim,))

    def _mass_column(self) -> Array:
        return np.asarray(self.masses, dtype=float)[:, None, None]

    # -- block evaluators ------------------------------------------------

    def metric_blocks(self, x: Array) -> Array:
        """Chart metric per particle, shape ``(..., N, d, d)`` (no masses)."""
        return self.chart.metric(self.split(x))

    def mass_blocks(self, x: Array) -> Array:
        return self._mass_column() * self.metric_blocks(x)

    def inverse_mass_blocks(self, x: Array) -> Array:
        hinv = self.chart.inverse_metric(self.split(x))
        return hinv / self._mass_column()

    def _embed_blocks(self, blocks: Array) -> Array:
        """Place ``(..., N, d, d)`` blocks on the diagonal of ``(..., n, n)``."""
        N, d = self.num_particles, self.chart.dim
        n = self.dim
        out = np.zeros(blocks.shape[:-3] + (n, n))
        for i in range(N):
            out[..., i * d : (i + 1) * d, i * d : (i + 1) * d] = blocks[..., i, :, :]
        return out

    # -- public tensors ---------------------------------------------------

    def mass_tensor(self, x: Array) -> Array:
        """Block-diagonal configuration-space metric m_i h_ab(x_i)."""
        self.require_admissible(x)
        blocks = self.mass_blocks(x)
        blocks = 0.5 * (blocks + np.swapaxes(blocks, -1, -2))
        return self._embed_blocks(blocks)

    def inverse_mass(self, x: Array) -> Array:
        self.require_admissible(x)
        try:
            blocks = self.inverse_mass_blocks(x)
        except (np.linalg.LinAlgError, ConditioningError) as exc:
            raise ConditioningError(
                "singular mass-tensor block; " + str(exc), block=None
            ) from exc
        blocks = 0.5 * (blocks + np.swapaxes(blocks, -1, -2))
        return self._embed_blocks(blocks)

    def sqrt_det_mass(self, x: Array) -> Array:
        """sqrt(det M) = prod_i m_i^{d/2} sqrt(det h(x_i))."""
        self.require_admissible(x)
        return self._sqrt_det_mass_unchecked(x)

    def _sqrt_det_mass_unchecked(self, x: Array) -> Array:
        d = self.chart.dim
        sdet = self.chart.sqrt_det(self.split(x))
        mass_factor = float(np.prod(np.asarray(self.masses) ** (d / 2.0)))
        return mass_factor * np.prod(sdet, axis=-1)

    def christoffel(self, x: Array) -> Array:
        """Configuration-space connection, nonzero only within particle blocks.

        Mass factors cancel between M^{AD} and the derivatives of M, so
        each block equals the chart connection at that particle's point.
        """
        self.require_admissible(x)
        N, d = self.num_particles, self.chart.dim
        n = self.dim
        gam = self.chart.christoffel(self.split(x))
        out = np.zeros(gam.shape[:-4] + (n, n, n))
        for i in range(N):
            sl = slice(i * d, (i + 1) * d)
            out[..., sl, sl, sl] = gam[..., i, :, :, :]
        return out

    def contracted_christoffel(self, x: Array) -> Array:
        """M^{BC} Gamma^A_{BC}, shape ``(..., n)``, from per-particle blocks."""
        contracted = self.chart.contracted_christoffel(self.split(x))
        contracted = contracted / np.asarray(self.masses, dtype=float)[:, None]
        return self.join(contracted)

    def apply_inverse_mass(self, x: Array, vec: Array) -> Array:
        """M^{AB} v_B without assembling the full matrix."""
        blocks = self.inverse_mass_blocks(x)
        v = self.split(vec)
        return self.join(np.einsum("...ab,...b->...a", blocks, v))

    def scalar_curvature(self, x: Array) -> Array:
        """Curvature of the configuration-space metric: sum_i R_chart(x_i)/m_i."""
        curv = self.chart.scalar_curvature(self.split(x))
        return np.sum(curv / np.asarray(self.masses, dtype=float), axis=-1)

    # -- domain handling ---------------------------------------------------

    def wrap(self, x: Array) -> Array:
        x = np.array(x, dtype=float, copy=True)
        for idx, (_, a, spec) in enumerate(self.axis_specs):
            if spec.periodic:
                x[..., idx] = np.mod(x[..., idx] - spec.lo, spec.period) + spec.lo
        return x

    def reflect(self, x: Array) -> Array:
        """Fold points back into the admissible box.

        Periodic axes wrap; bounded axes reflect at the margin, which
        preserves walker count at coordinate singularities.
        """
        x = np.array(x, dtype=float, copy=True)
        for idx, (_, a, spec) in enumerate(self.axis_specs):
            c = x[..., idx]
            if spec.periodic:
                x[..., idx] = np.mod(c - spec.lo, spec.period) + spec.lo
            else:
                lo, hi = spec.admissible_lo, spec.admissible_hi
                span = hi - lo
                y = np.mod(c - lo, 2.0 * span)
                y = np.where(y > span, 2.0 * span - y, y)
                x[..., idx] = lo + y
        return x

    def admissible_mask(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for idx, (_, a, spec) in enumerate(self.axis_specs):
            if spec.periodic:
                continue
            c = x[..., idx]
            ok &= (c >= spec.admissible_lo) & (c <= spec.admissible_hi)
        return ok

    def require_admissible(self, x: Array, what: str = "point") -> None:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got {x.shape}")
        for idx, (i, a, spec) in enumerate(self.axis_specs):
            if spec.periodic:
                continue
            c = x[..., idx]
            bad_lo = c < spec.admissible_lo
            bad_hi = c > spec.admissible_hi
            if np.any(bad_lo | bad_hi):
                raise DomainError(
                    f"{what} outside admissible domain: particle {i}, axis {a} "
                    f"(allowed [{spec.admissible_lo:g}, {spec.admissible_hi:g}])",
                    particle=i,
                    axis=a,
                )

    # -- normal-coordinate diagnostic ---------------------------------------

    def normal_coords_check(
        self, x_p: Array, probe_radius: float, n_random: int = 8, seed: int = 0
    ) -> NormalCoordinateReport:
        """Probe the exponential-map normal frame at ``x_p``.

        Builds second-order normal coordinates from the connection at
        x_p and measures how far the pulled-back metric is from its
        flat block value gamma = diag(m_i) on a sphere of coordinate
        radius ``probe_radius``, together with an antisymmetric
        first-derivative estimate.
        """
        x_p = np.asarray(x_p, dtype=float)
        self.require_admissible(x_p)
        n = self.dim
        N, d = self.num_particles, self.chart.dim

        h_p = self.chart.metric(self.split(x_p))  # (N, d, d)
        frames = np.zeros((N, d, d))
        for i in range(N):
            L = np.linalg.cholesky(h_p[i])
            frames[i] = np.linalg.inv(L).T  # e with e^T h e = I
        frame = np.zeros((n, n))
        for i in range(N):
            sl = slice(i * d, (i + 1) * d)
            frame[sl, sl] = frames[i]

        gamma_p = self.christoffel(x_p)  # (n, n, n)
        mass_diag = np.repeat(np.asarray(self.masses, dtype=float), d)
        gamma_flat = np.diag(mass_diag)

        rng = np.random.default_rng(seed)
        dirs = [v for v in np.eye(n)] + [v for v in -np.eye(n)]
        for _ in range(n_random):
            v = rng.normal(size=n)
            dirs.append(v / np.linalg.norm(v))
        dirs = np.asarray(dirs)

        def pulled_back_metric(xi):
            u = frame @ xi
            x = x_p + u - 0.5 * np.einsum("abc,b,c->a", gamma_p, u, u)
            if not bool(np.all(self.admissible_mask(self.wrap(x)))):
                raise DomainError("normal-coordinate probe leaves the admissible domain")
            jac = frame - np.einsum("abc,bd,c->ad", gamma_p, frame, u)
            M = self.mass_tensor(self.wrap(x))
            return jac.T @ M @ jac

        dev = 0.0
        grad_center = 0.0
        for v in dirs:
            xi = probe_radius * v
            Mp = pulled_back_metric(xi)
            Mm = pulled_back_metric(-xi)
            dev = max(dev, float(np.max(np.abs(Mp - gamma_flat))))
            dev = max(dev, float(np.max(np.abs(Mm - gamma_flat))))
            grad_center = max(
                grad_center, float(np.max(np.abs(Mp - Mm))) / (2.0 * probe_radius)
            )
        return NormalCoordinateReport(
            probe_radius=float(probe_radius),
            metric_deviation=dev,
            metric_gradient=dev / probe_radius,
            metric_gradient_center=grad_center,
            n_probes=len(dirs),
        )


def make_space(chart: ManifoldChart, masses: Sequence[float]) -> ConfigurationSpace:
    return ConfigurationSpace(chart=chart, masses=tuple(float(m) for m in masses))
