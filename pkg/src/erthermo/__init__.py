"""Forward simulation and thermometry of erbium emitters in silicon waveguides."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguityError,
    ArtifactIOError,
    ConfigError,
    ConvergenceError,
    DomainError,
    ErThermoError,
    FitDegeneracyError,
    FitError,
    InsufficientPointsError,
    NonphysicalPopulationError,
    NoPeakError,
    OutOfRangeError,
    SingularProbeError,
)
from .physics import CONSTANTS, SiteLevelStructure, ZeemanConfig, boltzmann_populations  # noqa: E402

__all__ = [
    "CONSTANTS",
    "AmbiguityError",
    "ArtifactIOError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "ErThermoError",
    "FitDegeneracyError",
    "FitError",
    "InsufficientPointsError",
    "NoPeakError",
    "NonphysicalPopulationError",
    "OutOfRangeError",
    "SingularProbeError",
    "SiteLevelStructure",
    "ZeemanConfig",
    "__version__",
    "boltzmann_populations",
]
