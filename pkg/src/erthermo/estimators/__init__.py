from .calibration import (
    METHODS,
    MODELS,
    ProbeCalibration,
    TemperatureEstimate,
    boltzmann_calibration,
    calibrate_probe,
    invert_calibration,
)
from .peaks import PeakFitResult, fit_peak_gaussian, fit_peak_lorentzian
from .ratiometric import optimal_range, ratiometric_temperature

__all__ = [
    "METHODS",
    "MODELS",
    "PeakFitResult",
    "ProbeCalibration",
    "TemperatureEstimate",
    "boltzmann_calibration",
    "calibrate_probe",
    "fit_peak_gaussian",
    "fit_peak_lorentzian",
    "invert_calibration",
    "optimal_range",
    "ratiometric_temperature",
]
