"""Fixture runs produced through the primary command line only."""

import subprocess
import sys
from pathlib import Path

import pytest

CROSSCHECK_CFG = """
[run]
solver = crosscheck
steps = 60
snapshot_every = 20

[chart]
name = sphere

[particles]
masses = 1.0

[sim]
dt = 1e-3
seed = 12
walkers = 4000

[grid]
shape = 16 32

[initial]
kind = gaussian-blob
center = 1.0 1.0
sigma = 0.35
"""

DISPERSION_CFG = """
[run]
solver = schrodinger
steps = 150
snapshot_every = 50

[chart]
name = flat
dim = 1
extent = 16.0

[particles]
masses = 1.0

[sim]
dt = 1e-2
seed = 4

[grid]
shape = 256

[initial]
kind = gaussian-blob
center = 0.0
sigma = 1.0
"""

ENERGY_CFG = """
[run]
solver = coupled
steps = 200

[chart]
name = flat
dim = 1
extent = 6.0

[particles]
masses = 1.0

[sim]
dt = 2e-4
xi = 0.125
seed = 6

[grid]
shape = 128

[initial]
kind = gaussian-blob
center = 0.0
sigma = 1.0
phase = sine
amplitude = 0.2
mode = 0.5
"""


def _run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "entrodyn.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return proc


def _make_run(tmp_root: Path, name: str, cfg_text: str, command: str = "run",
              extra=()) -> Path:
    cfg = tmp_root / f"{name}.cfg"
    cfg.write_text(cfg_text)
    out = tmp_root / name
    _run_cli([command, "--config", str(cfg), "--out", str(out), "--quiet", *extra])
    return out / "manifest.json"


@pytest.fixture(scope="session")
def crosscheck_manifest(tmp_path_factory) -> Path:
    return _make_run(tmp_path_factory.mktemp("cc"), "crosscheck", CROSSCHECK_CFG)


@pytest.fixture(scope="session")
def dispersion_manifest(tmp_path_factory) -> Path:
    return _make_run(tmp_path_factory.mktemp("disp"), "dispersion", DISPERSION_CFG)


@pytest.fixture(scope="session")
def energy_manifest(tmp_path_factory) -> Path:
    return _make_run(tmp_path_factory.mktemp("en"), "energy", ENERGY_CFG)


@pytest.fixture(scope="session")
def convergence_manifest(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("conv")
    cfg = root / "conv.cfg"
    cfg.write_text(DISPERSION_CFG)  # solver field is what converge uses
    out = root / "conv"
    _run_cli(
        ["converge", "--config", str(cfg), "--out", str(out), "--halvings", "2", "--quiet"]
    )
    return out / "manifest.json"
