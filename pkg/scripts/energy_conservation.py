#!/usr/bin/env python3
"""Energy-conservation run of the coupled density/phase integrator."""

import sys
from pathlib import Path

from entrodyn.cli import main

HERE = Path(__file__).parent

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "run",
                "--config",
                str(HERE / "configs" / "energy_conservation.cfg"),
                "--out",
                sys.argv[1] if len(sys.argv) > 1 else "runs/energy_conservation",
            ]
        )
    )
