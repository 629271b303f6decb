"""entrodyn: entropic diffusion, density/phase transport, and wave
dynamics on curved N-particle configuration spaces.

Three levels of the same dynamics, built to cross-validate each other:
walker ensembles sampling the short-step transition kernel with the
connection-corrected drift, conservative Fokker-Planck and
Hamilton-Jacobi grid solvers for the density/phase pair, and a
Crank-Nicolson propagator for the wave field whose kinetic term is the
flux-form Laplace-Beltrami operator.
"""

__version__ = "0.1.0"

from .params import SimParams

__all__ = ["SimParams", "__version__"]
