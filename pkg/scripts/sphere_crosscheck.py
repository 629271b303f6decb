#!/usr/bin/env python3
"""Walker-vs-density-solver cross-check on the sphere.

Runs the packaged crosscheck config (pure diffusion from a cap blob,
T = 0.5, W = 1e5, 64 x 128 grid) and exits nonzero if the final L1
distance exceeds the configured tolerance.
"""

import sys
from pathlib import Path

from entrodyn.cli import main

HERE = Path(__file__).parent

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "crosscheck",
                "--config",
                str(HERE / "configs" / "sphere_crosscheck.cfg"),
                "--out",
                sys.argv[1] if len(sys.argv) > 1 else "runs/sphere_crosscheck",
            ]
        )
    )
