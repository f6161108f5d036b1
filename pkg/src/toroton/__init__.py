"""Self-trapped light filaments in saturable media and their closure into tori."""

from .medium import DomainError, MediumParams, WaveParams, delta_mu, epsilon_of_intensity, index
from .radial import RadialProfile, critical_power, solve_profile
from .bpm import ScalarField, propagate, step
from .torus import find_fixed_point, gamma_of_c, quantize, sweep_gamma

__version__ = "0.1.0"

__all__ = [
    "DomainError", "MediumParams", "WaveParams", "delta_mu", "epsilon_of_intensity", "index",
    "RadialProfile", "critical_power", "solve_profile",
    "ScalarField", "propagate", "step",
    "find_fixed_point", "gamma_of_c", "quantize", "sweep_gamma",
]
