"""Exception hierarchy. Each class maps onto one CLI exit code."""


class ErThermoError(Exception):
    exit_code = 1


class DomainError(ErThermoError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(ErThermoError, ValueError):
    exit_code = 2


class FitError(ErThermoError):
    exit_code = 3


class NoPeakError(FitError):
    pass


class FitDegeneracyError(FitError):
    pass


class InsufficientPointsError(FitError):
    pass


class ConvergenceError(FitError):
    """Iteration cap reached. ``last`` carries the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class NonphysicalPopulationError(FitError):
    pass


class OutOfRangeError(ErThermoError):
    exit_code = 4


class AmbiguityError(ErThermoError):
    exit_code = 4

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = list(roots)


class SingularProbeError(ErThermoError):
    exit_code = 3


class ArtifactIOError(ErThermoError, OSError):
    exit_code = 5
