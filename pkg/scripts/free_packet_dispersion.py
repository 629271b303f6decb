#!/usr/bin/env python3
"""Free-packet dispersion run: sigma^2(t) against the analytic curve."""

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
                str(HERE / "configs" / "free_packet_dispersion.cfg"),
                "--out",
                sys.argv[1] if len(sys.argv) > 1 else "runs/free_packet_dispersion",
            ]
        )
    )
