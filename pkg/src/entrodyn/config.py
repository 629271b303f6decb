"""Run configuration: a sectioned key = value text format.

One UTF-8 file describes chart, particles, physical parameters, grid,
initial condition, potentials, solver selection and output policy,
plus an ``[acceptance]`` block of named tolerances that the drivers
enforce (nonzero exit status on violation). Parsing and serialization
round-trip losslessly through :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import io as _io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .geometry import ConfigurationSpace, GridSpec, make_chart, make_space
from .params import SimParams

SOLVERS = ("sde", "fp", "coupled", "schrodinger", "crosscheck")

_CHART_PARAM_TYPES = {
    "dim": int,
    "extent": float,
    "radius": float,
    "margin": float,
    "big_radius": float,
    "small_radius": float,
    "table": str,
}


def load_table_chart(path: str):
    """User chart from a JSON table: per-axis specs, sample points, and
    metric components sampled per node (interpolated bilinearly)."""
    import numpy as np

    from .geometry import AxisSpec, table_chart

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        axes = [
            AxisSpec(
                lo=float(a["lo"]),
                hi=float(a["hi"]),
                periodic=bool(a.get("periodic", False)),
                margin=float(a.get("margin", 0.0)),
            )
            for a in doc["axes"]
        ]
        return table_chart(
            axes=axes,
            sample_points=[np.asarray(p, dtype=float) for p in doc["sample_points"]],
            metric_samples=np.asarray(doc["metric"], dtype=float),
        )
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot load table chart from {path}: {exc}",
                          field="chart.table") from exc


@dataclass(frozen=True)
class RunConfig:
    solver: str = "fp"
    steps: int = 100
    snapshot_every: int = 0
    out: Optional[str] = None
    chart: dict = field(default_factory=lambda: {"name": "flat"})
    masses: tuple = (1.0,)
    eta: float = 1.0
    dt: float = 1.0e-3
    k: float = 1.0
    xi: float = 0.0
    seed: int = 0
    walkers: int = 10000
    grid_shape: tuple = (64,)
    initial: dict = field(default_factory=lambda: {"kind": "uniform", "phase": "zero"})
    potential_v: dict = field(default_factory=lambda: {"kind": "zero"})
    potential_vc: dict = field(default_factory=lambda: {"kind": "zero"})
    drive: dict = field(default_factory=lambda: {"kind": "zero"})
    average_window: float = 0.0
    acceptance: dict = field(default_factory=dict)

    @property
    def sim(self) -> SimParams:
        return SimParams(
            eta=self.eta, dt=self.dt, k=self.k, xi=self.xi, seed=self.seed, steps=self.steps
        )

    @property
    def total_time(self) -> float:
        return self.steps * self.dt

    def build_space(self) -> ConfigurationSpace:
        if self.chart["name"] == "table":
            if "table" not in self.chart:
                raise ConfigError("table charts need a 'table' file path", field="chart.table")
            chart = load_table_chart(self.chart["table"])
        else:
            params = {k: v for k, v in self.chart.items() if k != "name"}
            chart = make_chart(self.chart["name"], **params)
        return make_space(chart, self.masses)

    def build_grid(self, cs: Optional[ConfigurationSpace] = None) -> GridSpec:
        cs = cs or self.build_space()
        return GridSpec.for_space(cs, self.grid_shape)

    def validate(self) -> None:
        """Build the space and grid, converting construction failures
        into config errors that name the offending area."""
        try:
            cs = self.build_space()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid chart/particle configuration: {exc}",
                              field="chart") from exc
        try:
            self.build_grid(cs)
        except ValueError as exc:
            raise ConfigError(f"invalid grid: {exc}", field="grid.shape") from exc

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _get(parser, section, key, cast, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing required option [{section}] {key}", field=f"{section}.{key}")
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"option [{section}] {key} = {raw!r} is not a valid {cast.__name__}",
            field=f"{section}.{key}",
        ) from exc


def _floats(raw: str) -> tuple:
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.replace(",", " ").split())


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    solver = _get(parser, "run", "solver", str, default="fp")
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver '{solver}'; choose from {SOLVERS}", field="run.solver")
    steps = _get(parser, "run", "steps", int, default=100)
    if steps <= 0:
        raise ConfigError("steps must be positive", field="run.steps")
    snapshot_every = _get(parser, "run", "snapshot_every", int, default=0)
    out = _get(parser, "run", "out", str, default=None)

    chart = {"name": _get(parser, "chart", "name", str, default="flat")}
    if parser.has_section("chart"):
        for key in parser.options("chart"):
            if key == "name":
                continue
            cast = _CHART_PARAM_TYPES.get(key, float)
            chart[key] = _get(parser, "chart", key, cast)

    masses = (1.0,)
    if parser.has_option("particles", "masses"):
        masses = _get(parser, "particles", "masses", _floats)
    count = _get(parser, "particles", "count", int, default=len(masses))
    if count != len(masses):
        raise ConfigError(
            f"particle count {count} does not match {len(masses)} masses",
            field="particles.count",
        )
    if any(m <= 0 for m in masses):
        raise ConfigError("masses must be positive", field="particles.masses")

    eta = _get(parser, "sim", "eta", float, default=1.0)
    dt = _get(parser, "sim", "dt", float, default=1e-3)
    kconst = _get(parser, "sim", "k", float, default=1.0)
    xi = _get(parser, "sim", "xi", float, default=0.0)
    seed = _get(parser, "sim", "seed", int, default=0)
    walkers = _get(parser, "sim", "walkers", int, default=10000)
    for name, val in (("eta", eta), ("dt", dt), ("k", kconst)):
        if val <= 0:
            raise ConfigError(f"{name} must be positive", field=f"sim.{name}")
    if xi < 0:
        raise ConfigError("xi must be nonnegative", field="sim.xi")
    if walkers <= 0:
        raise ConfigError("walkers must be positive", field="sim.walkers")

    grid_shape = _get(parser, "grid", "shape", _ints, default=(64,))

    initial = {"kind": _get(parser, "initial", "kind", str, default="uniform")}
    if initial["kind"] not in ("gaussian-blob", "uniform", "plane-wave", "eigenmode"):
        raise ConfigError(f"unknown initial preset '{initial['kind']}'", field="initial.kind")
    if parser.has_option("initial", "center"):
        initial["center"] = _get(parser, "initial", "center", _floats)
    if parser.has_option("initial", "sigma"):
        initial["sigma"] = _get(parser, "initial", "sigma", float)
    if parser.has_option("initial", "l"):
        initial["l"] = _get(parser, "initial", "l", int)
    initial["phase"] = _get(parser, "initial", "phase", str, default="zero")
    if parser.has_option("initial", "p"):
        initial["p"] = _get(parser, "initial", "p", _floats)
    if parser.has_option("initial", "amplitude"):
        initial["amplitude"] = _get(parser, "initial", "amplitude", float)
    if parser.has_option("initial", "mode"):
        initial["mode"] = _get(parser, "initial", "mode", _floats)

    potential_v = {"kind": _get(parser, "potential", "v", str, default="zero")}
    if potential_v["kind"] not in ("zero", "harmonic"):
        raise ConfigError(f"unknown potential preset '{potential_v['kind']}'", field="potential.v")
    if parser.has_option("potential", "omega"):
        potential_v["omega"] = _get(parser, "potential", "omega", float)
    if parser.has_option("potential", "v_center"):
        potential_v["center"] = _get(parser, "potential", "v_center", _floats)
    potential_vc = {"kind": _get(parser, "potential", "vc", str, default="zero")}
    if potential_vc["kind"] not in ("zero", "scalar-curvature"):
        raise ConfigError(
            f"unknown curvature-potential preset '{potential_vc['kind']}'", field="potential.vc"
        )
    if parser.has_option("potential", "xi_r"):
        potential_vc["xi_r"] = _get(parser, "potential", "xi_r", float)

    drive = {"kind": _get(parser, "drive", "kind", str, default="zero")}
    if drive["kind"] not in ("zero", "sine"):
        raise ConfigError(f"unknown drive preset '{drive['kind']}'", field="drive.kind")
    if parser.has_option("drive", "amplitude"):
        drive["amplitude"] = _get(parser, "drive", "amplitude", float)
    if parser.has_option("drive", "mode"):
        drive["mode"] = _get(parser, "drive", "mode", _floats)

    average_window = _get(parser, "crosscheck", "average_window", float, default=0.0)

    acceptance = {}
    if parser.has_section("acceptance"):
        for key in parser.options("acceptance"):
            acceptance[key] = _get(parser, "acceptance", key, float)

    return RunConfig(
        solver=solver,
        steps=steps,
        snapshot_every=snapshot_every,
        out=out,
        chart=chart,
        masses=masses,
        eta=eta,
        dt=dt,
        k=kconst,
        xi=xi,
        seed=seed,
        walkers=walkers,
        grid_shape=grid_shape,
        initial=initial,
        potential_v=potential_v,
        potential_vc=potential_vc,
        drive=drive,
        average_window=average_window,
        acceptance=acceptance,
    )


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def serialize_config(rc: RunConfig) -> str:
    out = _io.StringIO()

    def sec(name, pairs):
        pairs = [(k, v) for k, v in pairs if v is not None]
        if not pairs:
            return
        out.write(f"[{name}]\n")
        for k, v in pairs:
            out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")

    sec("run", [("solver", rc.solver), ("steps", rc.steps),
                ("snapshot_every", rc.snapshot_every), ("out", rc.out)])
    sec("chart", list(rc.chart.items()))
    sec("particles", [("count", len(rc.masses)), ("masses", rc.masses)])
    sec("sim", [("eta", rc.eta), ("dt", rc.dt), ("k", rc.k), ("xi", rc.xi),
                ("seed", rc.seed), ("walkers", rc.walkers)])
    sec("grid", [("shape", rc.grid_shape)])
    init_pairs = [("kind", rc.initial.get("kind"))]
    for key in ("center", "sigma", "l", "phase", "p", "amplitude", "mode"):
        if key in rc.initial:
            init_pairs.append((key, rc.initial[key]))
    sec("initial", init_pairs)
    pot_pairs = [("v", rc.potential_v.get("kind"))]
    if "omega" in rc.potential_v:
        pot_pairs.append(("omega", rc.potential_v["omega"]))
    if "center" in rc.potential_v:
        pot_pairs.append(("v_center", rc.potential_v["center"]))
    pot_pairs.append(("vc", rc.potential_vc.get("kind")))
    if "xi_r" in rc.potential_vc:
        pot_pairs.append(("xi_r", rc.potential_vc["xi_r"]))
    sec("potential", pot_pairs)
    drive_pairs = [("kind", rc.drive.get("kind"))]
    for key in ("amplitude", "mode"):
        if key in rc.drive:
            drive_pairs.append((key, rc.drive[key]))
    if rc.drive.get("kind", "zero") != "zero" or len(drive_pairs) > 1:
        sec("drive", drive_pairs)
    if rc.average_window:
        sec("crosscheck", [("average_window", rc.average_window)])
    sec("acceptance", sorted(rc.acceptance.items()))
    return out.getvalue()
