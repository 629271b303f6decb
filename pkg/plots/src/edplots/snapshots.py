"""Readers for the run output formats.

This package deliberately never imports the simulation library: it
consumes the documented on-disk formats only. Binary snapshots are

    bytes 0..7   magic "EDSNAP01"
    byte  8      kind: 1 = ensemble, 2 = field, 3 = wave
    bytes 9..12  header length, little-endian uint32
    ...          UTF-8 JSON header (sorted keys)
    ...          payload, little-endian float64, row-major

and the manifest is a JSON document listing the config echo plus every
emitted file with its SHA-256 checksum.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"EDSNAP01"
_KINDS = {1: "ensemble", 2: "field", 3: "wave"}


class SnapshotFormatError(RuntimeError):
    pass


class ManifestError(RuntimeError):
    pass


@dataclass
class Snapshot:
    path: Path
    kind: str
    header: dict
    payload: np.ndarray

    @property
    def time(self) -> float:
        return float(self.header.get("time", 0.0))

    @property
    def role(self) -> str:
        return self.header.get("role", "")

    def grid_axes(self) -> list[dict]:
        return self.header["grid"]

    def grid_shape(self) -> tuple[int, ...]:
        return tuple(ax["count"] for ax in self.header["grid"])

    def grid_centers(self) -> list[np.ndarray]:
        out = []
        for ax in self.header["grid"]:
            d = (ax["hi"] - ax["lo"]) / ax["count"]
            out.append(ax["lo"] + (np.arange(ax["count"]) + 0.5) * d)
        return out

    def field_values(self) -> np.ndarray:
        if self.kind != "field":
            raise SnapshotFormatError(f"{self.path} is a {self.kind}, not a field")
        return self.payload.reshape(self.grid_shape())


def read_snapshot(path: Path | str) -> Snapshot:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise SnapshotFormatError(f"{path} lacks the snapshot magic")
    kind = raw[8]
    if kind not in _KINDS:
        raise SnapshotFormatError(f"{path} has unknown kind byte {kind}")
    (hlen,) = struct.unpack("<I", raw[9:13])
    header = json.loads(raw[13 : 13 + hlen].decode("utf-8"))
    payload = np.frombuffer(raw[13 + hlen :], dtype="<f8").astype(float)
    return Snapshot(path=path, kind=_KINDS[kind], header=header, payload=payload)


def read_series(path: Path | str) -> dict[str, np.ndarray]:
    """Time-series CSV with a ``# columns = ...`` first line."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# columns"):
            raise SnapshotFormatError(f"{path} is not a series file")
        names = first.split("=", 1)[1].strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(names)}


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class SnapshotSet:
    """A manifest plus its verified, time-ordered snapshot files."""

    manifest_path: Path
    root: Path
    config: configparser.ConfigParser
    entries: list = field(default_factory=list)
    measured: dict = field(default_factory=dict)

    @classmethod
    def load(cls, manifest_path: Path | str, verify: bool = True) -> "SnapshotSet":
        manifest_path = Path(manifest_path)
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        root = manifest_path.parent
        entries = doc.get("files", [])
        if not entries:
            raise ManifestError(f"{manifest_path} lists no files")
        if verify:
            for entry in entries:
                target = root / entry["path"]
                if not target.exists():
                    raise ManifestError(f"manifest entry missing on disk: {entry['path']}")
                if sha256_of(target) != entry["sha256"]:
                    raise ManifestError(f"checksum mismatch for {entry['path']}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(doc.get("config", ""))
        measured = doc.get("extra", {}).get("measured", {})
        return cls(
            manifest_path=manifest_path,
            root=root,
            config=parser,
            entries=entries,
            measured=measured,
        )

    def series(self, role: str) -> dict[str, np.ndarray]:
        for entry in self.entries:
            if entry.get("kind") == "series" and entry.get("role") == role:
                return read_series(self.root / entry["path"])
        raise ManifestError(
            f"manifest has no '{role}' series; available: {self._available()}"
        )

    def fields(self, prefix: str) -> list[Snapshot]:
        """Numbered binary field snapshots ``<prefix>_NNN.bin``, ordered
        by time (strictly increasing within the group)."""
        import re

        pattern = re.compile(rf"^{re.escape(prefix)}_\d+\.bin$")
        snaps = []
        for entry in self.entries:
            name = Path(entry["path"]).name
            if entry.get("kind") == "field" and pattern.match(name):
                snaps.append(read_snapshot(self.root / entry["path"]))
        snaps.sort(key=lambda s: s.time)
        for a, b in zip(snaps, snaps[1:]):
            if not b.time > a.time:
                raise ManifestError(
                    f"snapshot times for '{prefix}' are not strictly increasing"
                )
        return snaps

    def field_by_name(self, name: str) -> Snapshot | None:
        for entry in self.entries:
            if Path(entry["path"]).name == name and entry.get("kind") == "field":
                return read_snapshot(self.root / entry["path"])
        return None

    def _available(self) -> str:
        kinds = sorted({(e.get("kind", "?"), e.get("role", "")) for e in self.entries})
        return ", ".join(f"{k}:{r}" if r else k for k, r in kinds)

    # -- config conveniences -------------------------------------------

    def config_float(self, section: str, key: str, default=None) -> float:
        if self.config.has_option(section, key):
            return float(self.config.get(section, key))
        if default is None:
            raise ManifestError(f"config echo lacks [{section}] {key}")
        return default

    def config_floats(self, section: str, key: str) -> list[float]:
        raw = self.config.get(section, key)
        return [float(v) for v in raw.replace(",", " ").split()]
