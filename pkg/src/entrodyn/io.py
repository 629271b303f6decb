"""Snapshot and manifest file formats.

Every snapshot is written twice: a portable binary file and a
comma-separated text file. The binary layout is

    bytes 0..7    magic ``EDSNAP01``
    byte  8       kind (1 = ensemble, 2 = field, 3 = wave)
    bytes 9..12   header length, little-endian uint32
    ...           header, UTF-8 JSON with sorted keys
    ...           payload, little-endian float64, row-major

Ensemble payloads are walker rows (W x n); field payloads are node
values in C order; wave payloads interleave (real, imaginary) per
node. The text twin carries the same header as ``# key = value`` lines
followed by one CSV row per walker or node, printed with %.17g so
values round-trip exactly.

A manifest is a JSON file listing the configuration echo, every
emitted file with its SHA-256 checksum, and the library versions. No
timestamps are embedded anywhere, so identical runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from .errors import SnapshotError
from .geometry import GridAxis, GridField, GridSpec, WaveField
from .sde import WalkerEnsemble

MAGIC = b"EDSNAP01"
KIND_ENSEMBLE, KIND_FIELD, KIND_WAVE = 1, 2, 3
_KIND_NAMES = {KIND_ENSEMBLE: "ensemble", KIND_FIELD: "field", KIND_WAVE: "wave"}


def _header_bytes(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_binary(path: Path, kind: int, header: dict, payload: np.ndarray) -> None:
    blob = _header_bytes(header)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", kind))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def _write_text(path: Path, header: dict, rows: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(header):
            fh.write(f"# {key} = {json.dumps(header[key], sort_keys=True)}\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _grid_header(grid: GridSpec) -> list:
    return [
        {"lo": ax.lo, "hi": ax.hi, "count": ax.count, "periodic": ax.periodic}
        for ax in grid.axes
    ]


def _grid_from_header(axes: list) -> GridSpec:
    return GridSpec(
        axes=tuple(
            GridAxis(lo=a["lo"], hi=a["hi"], count=a["count"], periodic=a["periodic"])
            for a in axes
        )
    )


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def write_ensemble(base: Path | str, ens: WalkerEnsemble, chart_name: str, seed: int) -> list[Path]:
    """Write walker positions as ``base.bin`` and ``base.csv``."""
    base = Path(base)
    header = {
        "dim": ens.dim,
        "walkers": ens.size,
        "time": ens.t,
        "chart": chart_name,
        "seed": int(seed),
        "step_index": int(ens.step_index),
    }
    bin_path = base.with_suffix(".bin")
    csv_path = base.with_suffix(".csv")
    _write_binary(bin_path, KIND_ENSEMBLE, header, ens.positions)
    _write_text(csv_path, header, ens.positions)
    return [bin_path, csv_path]


def write_field(base: Path | str, f: GridField) -> list[Path]:
    base = Path(base)
    header = {"grid": _grid_header(f.grid), "role": f.role, "time": f.time}
    bin_path = base.with_suffix(".bin")
    csv_path = base.with_suffix(".csv")
    _write_binary(bin_path, KIND_FIELD, header, f.values.ravel())
    _write_text(csv_path, header, f.values.reshape(-1, 1))
    return [bin_path, csv_path]


def write_wave(base: Path | str, f: WaveField) -> list[Path]:
    base = Path(base)
    header = {"grid": _grid_header(f.grid), "role": "wave", "time": f.time}
    interleaved = np.stack([f.values.real.ravel(), f.values.imag.ravel()], axis=1)
    bin_path = base.with_suffix(".bin")
    csv_path = base.with_suffix(".csv")
    _write_binary(bin_path, KIND_WAVE, header, interleaved)
    _write_text(csv_path, header, interleaved)
    return [bin_path, csv_path]


def write_series(path: Path | str, columns: dict[str, np.ndarray]) -> Path:
    """Plain CSV time series with a single ``# columns`` header line."""
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# columns = " + ",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return path


# ---------------------------------------------------------------------------
# readers
# ---------------------------------------------------------------------------


@dataclass
class Snapshot:
    kind: str
    header: dict
    payload: np.ndarray

    def as_field(self) -> GridField:
        if self.kind != "field":
            raise SnapshotError(f"snapshot is a {self.kind}, not a field")
        grid = _grid_from_header(self.header["grid"])
        return GridField(
            grid,
            self.payload.reshape(grid.shape),
            role=self.header.get("role", ""),
            time=self.header.get("time", 0.0),
        )

    def as_wave(self) -> WaveField:
        if self.kind != "wave":
            raise SnapshotError(f"snapshot is a {self.kind}, not a wave")
        grid = _grid_from_header(self.header["grid"])
        pair = self.payload.reshape(grid.size, 2)
        return WaveField(
            grid,
            (pair[:, 0] + 1j * pair[:, 1]).reshape(grid.shape),
            time=self.header.get("time", 0.0),
        )

    def as_ensemble(self) -> WalkerEnsemble:
        if self.kind != "ensemble":
            raise SnapshotError(f"snapshot is a {self.kind}, not an ensemble")
        pos = self.payload.reshape(self.header["walkers"], self.header["dim"])
        return WalkerEnsemble(
            positions=pos,
            t=self.header.get("time", 0.0),
            step_index=self.header.get("step_index", 0),
        )


def read_snapshot(path: Path | str) -> Snapshot:
    path = Path(path)
    if path.suffix == ".csv":
        return _read_text(path)
    return _read_binary(path)


def _read_binary(path: Path) -> Snapshot:
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise SnapshotError(f"{path} lacks the snapshot magic")
    kind = raw[8]
    (hlen,) = struct.unpack("<I", raw[9:13])
    header = json.loads(raw[13 : 13 + hlen].decode("utf-8"))
    payload = np.frombuffer(raw[13 + hlen :], dtype="<f8").astype(float)
    if kind not in _KIND_NAMES:
        raise SnapshotError(f"{path} has unknown snapshot kind {kind}")
    return Snapshot(kind=_KIND_NAMES[kind], header=header, payload=payload)


def _read_text(path: Path) -> Snapshot:
    header = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = json.loads(val.strip())
            else:
                rows.append([float(v) for v in line.split(",")])
    payload = np.asarray(rows, dtype=float)
    if "walkers" in header:
        kind = "ensemble"
    elif header.get("role") == "wave":
        kind = "wave"
    else:
        kind = "field"
    return Snapshot(kind=kind, header=header, payload=payload.ravel())


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def sha256_of(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Manifest:
    config_text: str
    entries: list = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    acceptance: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_file(self, path: Path, root: Path, kind: str, role: str = "", time: float = 0.0):
        self.entries.append(
            {
                "path": str(Path(path).relative_to(root)),
                "sha256": sha256_of(path),
                "kind": kind,
                "role": role,
                "time": time,
            }
        )

    def write(self, path: Path | str) -> Path:
        path = Path(path)
        doc = {
            "config": self.config_text,
            "files": sorted(self.entries, key=lambda e: e["path"]),
            "versions": self.versions,
            "acceptance": self.acceptance,
            "extra": self.extra,
        }
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path


def read_manifest(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def library_versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"entrodyn": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__}
