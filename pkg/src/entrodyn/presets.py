"""Named initial conditions and potentials for the run drivers.

Initial densities: ``gaussian-blob`` (geodesic blob when the chart has
an embedding, wrapped coordinate blob otherwise), ``uniform``,
``plane-wave`` (uniform density, linear phase), ``eigenmode`` (sphere
zonal harmonic). Potentials: ``zero``, ``harmonic``,
``scalar-curvature``.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import ConfigError
from .geometry import ConfigurationSpace, GridField, GridSpec, volume_weights
from .sde import WalkerEnsemble, philox_uniforms

INITIAL_PRESETS = ("gaussian-blob", "uniform", "plane-wave", "eigenmode")
POTENTIAL_PRESETS = ("zero", "harmonic", "scalar-curvature")

_STREAM_INIT_CELL = 0xE0000000_00000001
_STREAM_INIT_JITTER = 0xE0000000_00000002


def _wrapped_sqdist(cs: ConfigurationSpace, pts: np.ndarray, center: np.ndarray) -> np.ndarray:
    d2 = np.zeros(pts.shape[:-1])
    for idx, (_, _, spec) in enumerate(cs.axis_specs):
        delta = pts[..., idx] - center[idx]
        if spec.periodic:
            half = 0.5 * spec.period
            delta = np.mod(delta + half, spec.period) - half
        d2 += delta**2
    return d2


def blob_density(cs: ConfigurationSpace, grid: GridSpec, center, sigma: float) -> GridField:
    """Smooth localized bump of width ``sigma`` around ``center``.

    With an embedded chart the bump is a function of geodesic angle per
    particle (so it names the same physical distribution in any chart);
    otherwise it is a wrapped coordinate Gaussian.
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (cs.dim,):
        raise ConfigError(f"blob center needs {cs.dim} coordinates", field="initial.center")
    pts = grid.points()
    if cs.chart.embed_fn is not None and cs.chart.name in ("sphere", "torus", "circle"):
        log_rho = np.zeros(pts.shape[:-1])
        split_pts = cs.split(pts)
        split_center = cs.split(center)
        for i in range(cs.num_particles):
            e = cs.chart.embed_fn(split_pts[..., i, :])
            e0 = cs.chart.embed_fn(split_center[i])
            r2 = float(np.dot(e0, e0))
            cosang = np.clip((e @ e0) / r2, -1.0, 1.0)
            log_rho += (cosang - 1.0) / sigma**2
        vals = np.exp(log_rho)
    else:
        vals = np.exp(-_wrapped_sqdist(cs, pts, center) / (2.0 * sigma**2))
    return _normalized(cs, grid, vals)


def uniform_density(cs: ConfigurationSpace, grid: GridSpec) -> GridField:
    return _normalized(cs, grid, np.ones(grid.shape))


def _normalized(cs, grid, vals) -> GridField:
    w = volume_weights(cs, grid)
    total = float(np.sum(w * vals))
    return GridField(grid, vals / total, role="density")


def initial_density(cs: ConfigurationSpace, grid: GridSpec, spec: dict) -> GridField:
    kind = spec.get("kind", "uniform")
    if kind == "gaussian-blob":
        return blob_density(cs, grid, spec["center"], float(spec["sigma"]))
    if kind in ("uniform", "plane-wave"):
        return uniform_density(cs, grid)
    if kind == "eigenmode":
        ell = int(spec.get("l", 1))
        if cs.chart.name != "sphere" or cs.num_particles != 1:
            raise ConfigError("eigenmode initial condition needs one particle on a sphere",
                              field="initial.kind")
        th = grid.mesh()[0]
        from numpy.polynomial.legendre import legval
        coeffs = np.zeros(ell + 1)
        coeffs[ell] = 1.0
        vals = legval(np.cos(th), coeffs) ** 2
        return _normalized(cs, grid, vals)
    raise ConfigError(f"unknown initial preset '{kind}'", field="initial.kind")


def eigenmode_wave(cs: ConfigurationSpace, grid: GridSpec, ell: int):
    """Signed zonal harmonic P_l(cos theta) on the sphere, normalized in
    the invariant inner product; used by the wave driver, where the
    density/phase route cannot represent sign changes."""
    import numpy as np

    if cs.chart.name != "sphere" or cs.num_particles != 1:
        raise ConfigError("eigenmode initial condition needs one particle on a sphere",
                          field="initial.kind")
    from numpy.polynomial.legendre import legval

    th = grid.mesh()[0]
    coeffs = np.zeros(ell + 1)
    coeffs[ell] = 1.0
    vals = legval(np.cos(th), coeffs).astype(complex)
    w = volume_weights(cs, grid)
    vals /= np.sqrt(np.sum(w * np.abs(vals) ** 2))
    return vals


def initial_phase(cs: ConfigurationSpace, grid: GridSpec, spec: dict, hbar: float) -> GridField:
    kind = spec.get("phase", "zero")
    pts = grid.points()
    if kind == "zero":
        vals = np.zeros(grid.shape)
    elif kind == "plane-wave":
        p_vec = np.asarray(spec.get("p", np.zeros(cs.dim)), dtype=float)
        if p_vec.shape != (cs.dim,):
            raise ConfigError(f"plane-wave momentum needs {cs.dim} components", field="initial.p")
        for idx, (_, _, ax) in enumerate(cs.axis_specs):
            if ax.periodic and p_vec[idx] != 0.0:
                winding = p_vec[idx] * ax.period / (2 * math.pi * hbar)
                if abs(winding - round(winding)) > 1e-9:
                    raise ConfigError(
                        f"momentum component {idx} is not an integer winding on its periodic axis",
                        field="initial.p",
                    )
        vals = pts @ p_vec
    elif kind == "sine":
        amp = float(spec.get("amplitude", 0.3))
        mode = np.asarray(spec.get("mode", np.ones(cs.dim)), dtype=float)
        vals = amp * np.sin(pts @ mode)
    else:
        raise ConfigError(f"unknown phase preset '{kind}'", field="initial.phase")
    return GridField(grid, vals, role="phase")


def potential_field(cs: ConfigurationSpace, grid: GridSpec, spec: dict,
                    role: str = "potential") -> Optional[GridField]:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return None
    pts = grid.points()
    if kind == "harmonic":
        omega = float(spec.get("omega", 1.0))
        center = np.asarray(spec.get("center", np.zeros(cs.dim)), dtype=float)
        vals = np.zeros(grid.shape)
        for idx, (i, _, axspec) in enumerate(cs.axis_specs):
            delta = pts[..., idx] - center[idx]
            if axspec.periodic:
                half = 0.5 * axspec.period
                delta = np.mod(delta + half, axspec.period) - half
            vals += 0.5 * cs.masses[i] * omega**2 * delta**2
        return GridField(grid, vals, role=role)
    if kind == "scalar-curvature":
        xi_r = float(spec.get("xi_r", 1.0))
        vals = xi_r * cs.scalar_curvature(pts)
        return GridField(grid, vals, role="curvature_potential")
    raise ConfigError(f"unknown potential preset '{kind}'", field="potential.kind")


def sample_ensemble_from_density(
    rho: GridField, cs: ConfigurationSpace, walkers: int, seed: int
) -> WalkerEnsemble:
    """Draw walkers from a grid density: cells by inverse CDF on the
    invariant cell masses, positions uniform within each cell.

    Deterministic given the seed; uses reserved Philox streams so step
    draws are unaffected.
    """
    grid = rho.grid
    w = volume_weights(cs, grid)
    probs = (w * rho.values).ravel()
    probs = probs / probs.sum()
    cdf = np.cumsum(probs)
    u = philox_uniforms(seed, _STREAM_INIT_CELL, (walkers,))
    cells = np.searchsorted(cdf, u)
    idx = np.unravel_index(cells, grid.shape)
    jitter = philox_uniforms(seed, _STREAM_INIT_JITTER, (walkers, grid.ndim))
    pos = np.stack(
        [
            grid.axes[a].lo + (idx[a] + jitter[:, a]) * grid.axes[a].spacing
            for a in range(grid.ndim)
        ],
        axis=-1,
    )
    return WalkerEnsemble(positions=pos, t=rho.time, step_index=0)
