"""Option pricing under Heston dynamics with self-exciting jumps.

Fourier-cosine pricing of European and Bermudan options where the jump
component is an ephemerally self-exciting (queue-type) process, an
exponential-kernel self-exciting process, or a constant-intensity
compound Poisson, validated against an exact thinning simulator.
"""

from .errors import (ConfigError, GridError, IntegrationError, JumpcosError,
                     OutOfBoundsError, ParameterError, StabilityError)
from .models import (BatesJumps, HawkesJumps, HestonParams, JumpParams,
                     JumpSizeDist, ModelSpec, OptionSpec, QHawkesJumps,
                     ScenarioModels, bates_matching_intensity, build_models,
                     load_config, scenario)

__version__ = "0.1.0"

__all__ = [
    "BatesJumps", "ConfigError", "GridError", "HawkesJumps", "HestonParams",
    "IntegrationError", "JumpParams", "JumpSizeDist", "JumpcosError",
    "ModelSpec", "OptionSpec", "OutOfBoundsError", "ParameterError",
    "QHawkesJumps", "ScenarioModels", "StabilityError",
    "bates_matching_intensity", "build_models", "load_config", "scenario",
]
