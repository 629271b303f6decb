"""Run-level physical and numerical parameters."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SimParams:
    """Physical constants and stepping controls shared by all solvers.

    ``eta`` fixes the diffusion scale, ``dt`` the step duration, and
    ``k`` the phase-to-action conversion, so the effective Planck
    constant is ``hbar = eta / k``. ``xi`` couples the Fisher term in
    the energy functional; ``xi = hbar**2 / 8`` makes the wave-equation
    nonlinearity cancel identically.
    """

    eta: float = 1.0
    dt: float = 1.0e-3
    k: float = 1.0
    xi: float = 0.0
    seed: int = 0
    steps: int = 1

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")

    @property
    def hbar(self) -> float:
        return self.eta / self.k

    @property
    def cancellation_xi(self) -> float:
        """The Fisher coupling at which the nonlinear term vanishes."""
        return self.eta**2 / (8.0 * self.k**2)

    def with_(self, **kw) -> "SimParams":
        return replace(self, **kw)
