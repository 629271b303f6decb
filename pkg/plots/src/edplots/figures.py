"""The four figure kinds.

All figures use a fixed size, the viridis colormap, labeled axes with
units, and no timestamps, so re-rendering a manifest reproduces the
same bytes. Inputs are never modified.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .snapshots import ManifestError, SnapshotSet

FIGSIZE = (9.0, 4.0)
DPI = 120
CMAP = "viridis"

FIGURE_KINDS = ("density-compare", "dispersion", "energy", "convergence")


def _save(fig, out_dir: Path, name: str) -> Path:
    out = out_dir / name
    fig.savefig(out, dpi=DPI, metadata={"Software": "edplots"})
    plt.close(fig)
    return out


def _pair_panels(ax, snap, title):
    if len(snap.grid_shape()) == 1:
        x = snap.grid_centers()[0]
        ax.plot(x, snap.field_values())
        ax.set_xlabel("coordinate [rad]")
        ax.set_ylabel("density [1/volume]")
    else:
        c0, c1 = snap.grid_centers()
        vals = snap.field_values()
        mesh = ax.pcolormesh(c1, c0, vals, cmap=CMAP, shading="nearest")
        ax.set_xlabel("axis 1 [rad]")
        ax.set_ylabel("axis 0 [rad]")
        plt.colorbar(mesh, ax=ax, label="density [1/volume]")
    ax.set_title(title)


def render_density_compare(snapset: SnapshotSet, out_dir: Path) -> list[Path]:
    """Side-by-side walker vs density-solver heatmaps, one file per
    snapshot time, plus the L1 distance curve."""
    # gather and validate every input before writing any file
    sde_snaps = snapset.fields("sde_rho")
    fp_snaps = snapset.fields("fp_rho")
    if not sde_snaps or not fp_snaps:
        raise ManifestError(
            "density-compare needs both sde_rho and fp_rho fields; "
            f"available: {snapset._available()}"
        )
    series = snapset.series("l1")
    fp_by_time = {round(s.time, 9): s for s in fp_snaps}
    pairs = [
        (snap, fp_by_time[round(snap.time, 9)], f"t = {snap.time:g}")
        for snap in sde_snaps
        if round(snap.time, 9) in fp_by_time
    ]
    avg_sde = snapset.field_by_name("sde_rho_avg_final.bin")
    avg_fp = snapset.field_by_name("fp_rho_avg_final.bin")
    if avg_sde is not None and avg_fp is not None:
        pairs.append((avg_sde, avg_fp, f"trailing average, t = {avg_sde.time:g}"))
    if not pairs:
        raise ManifestError("no time-matched sde_rho / fp_rho snapshot pairs")

    written = []
    for i, (snap, partner, label) in enumerate(pairs):
        fig, axes = plt.subplots(1, 2, figsize=FIGSIZE, constrained_layout=True)
        _pair_panels(axes[0], snap, f"walker histogram, {label}")
        _pair_panels(axes[1], partner, f"density solver, {label}")
        written.append(_save(fig, out_dir, f"density_compare_{i:03d}.png"))
    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    ax.plot(series["t"], series["l1"], marker="o")
    ax.set_xlabel("time [time units]")
    ax.set_ylabel("L1 distance [dimensionless]")
    ax.set_title("walker vs density-solver L1 distance")
    ax.grid(True, alpha=0.3)
    written.append(_save(fig, out_dir, "l1_curve.png"))
    return written


def render_dispersion(snapset: SnapshotSet, out_dir: Path) -> list[Path]:
    """Measured packet variance against the analytic free-packet curve,
    recomputed from the config echo in the manifest."""
    series = snapset.series("moments")
    if "var_0" not in series:
        raise ManifestError(
            f"dispersion needs a moments series with variances; available: {snapset._available()}"
        )
    sigma0 = snapset.config_float("initial", "sigma")
    eta = snapset.config_float("sim", "eta", 1.0)
    k = snapset.config_float("sim", "k", 1.0)
    masses = snapset.config_floats("particles", "masses")
    hbar = eta / k
    t = series["t"]

    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    for axis in range(len([c for c in series if c.startswith("var_")])):
        m = masses[min(axis, len(masses) - 1)]
        analytic = sigma0**2 * (1.0 + (hbar * t / (2.0 * m * sigma0**2)) ** 2)
        ax.plot(t, series[f"var_{axis}"], label=f"measured, axis {axis}")
        ax.plot(t, analytic, "--", label=f"analytic, axis {axis}")
    ax.set_xlabel("time [time units]")
    ax.set_ylabel("packet variance [length^2]")
    ax.set_title("free-packet dispersion")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, "dispersion.png")]


def render_energy(snapset: SnapshotSet, out_dir: Path) -> list[Path]:
    """Relative drift of the conserved energy functional."""
    series = snapset.series("energy")
    t, H = series["t"], series["H"]
    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    ax.plot(t, (H - H[0]) / abs(H[0]))
    ax.set_xlabel("time [time units]")
    ax.set_ylabel("relative energy drift [dimensionless]")
    ax.set_title(f"energy conservation: H(0) = {H[0]:.6g}")
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, "energy.png")]


def render_convergence(snapset: SnapshotSet, out_dir: Path) -> list[Path]:
    """Log-log error against step or spacing with the fitted order."""
    series_entries = [
        e for e in snapset.entries
        if e.get("kind") == "series" and e.get("role") == "convergence"
    ]
    if not series_entries:
        raise ManifestError(
            f"convergence needs converge_* series; available: {snapset._available()}"
        )
    from .snapshots import read_series

    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    for entry in series_entries:
        data = read_series(snapset.root / entry["path"])
        err = data["error"]
        # the refined quantity is whichever column actually varies
        h = data["dt"] if np.ptp(data["dt"]) > 0 else data["spacing"]
        slope = np.polyfit(np.log(h), np.log(err), 1)[0]
        label = Path(entry["path"]).stem.replace("converge_", "")
        ax.loglog(h, err, marker="o", label=f"{label}: order {slope:.2f}")
    ax.set_xlabel("step or spacing [refined quantity]")
    ax.set_ylabel("error [solver units]")
    ax.set_title("convergence under halving")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return [_save(fig, out_dir, "convergence.png")]


RENDERERS = {
    "density-compare": render_density_compare,
    "dispersion": render_dispersion,
    "energy": render_energy,
    "convergence": render_convergence,
}


def render(manifest: Path | str, kind: str, out_dir: Path | str) -> list[Path]:
    """Render one figure kind from a manifest into ``out_dir``."""
    if kind not in RENDERERS:
        raise ValueError(f"unknown figure kind '{kind}'; choose from {FIGURE_KINDS}")
    snapset = SnapshotSet.load(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return RENDERERS[kind](snapset, out_dir)
