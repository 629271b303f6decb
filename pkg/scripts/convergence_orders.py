#!/usr/bin/env python3
"""Halving studies for all three solver families.

Measures the spatial and temporal orders of the density solver, the
temporal order of the Crank-Nicolson wave stepper, and the weak order
of the walker scheme; exits nonzero if any measured order falls more
than 0.3 below its declared value.
"""

import sys
from pathlib import Path

from entrodyn.config import RunConfig
from entrodyn.drivers import convergence_study, write_convergence_outputs

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/convergence")

if __name__ == "__main__":
    status = 0
    for solver in ("fp", "schrodinger", "sde"):
        rc = RunConfig(solver=solver, steps=10)
        reports = convergence_study(rc, halvings=3)
        result = write_convergence_outputs(reports, rc, OUT / solver)
        status = max(status, result.exit_code)
    sys.exit(status)
