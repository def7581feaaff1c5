"""Calibration-free Boltzmann thermometry on a Zeeman-split Kramers doublet."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, NonphysicalPopulationError
from .calibration import TemperatureEstimate

_TWO_PLUS_SQRT2 = 2.0 + np.sqrt(2.0)


def optimal_range(delta_g: float) -> tuple[float, float]:
    """Temperature window of best relative sensitivity for a splitting ``delta_g`` (K)."""
    if delta_g < 0:
        raise DomainError("spin splitting must be >= 0")
    return delta_g / _TWO_PLUS_SQRT2, delta_g / 2.0


def ratiometric_temperature(
    A_up: float,
    A_down: float,
    sigma_up: float,
    sigma_down: float,
    delta_g: float,
    delta_g_sigma: float = 0.0,
    strength_ratio: float = 1.0,
    validity_flags: dict | None = None,
) -> TemperatureEstimate:
    """Spin temperature T = -delta_g / ln(A_up / A_down).

    ``A_up`` belongs to the energetically higher spin state. ``strength_ratio``
    divides out a known up/down transition-strength imbalance (1 = equal
    strengths). The uncertainty is first-order propagation of both amplitude
    sigmas and of ``delta_g_sigma``.
    """
    if A_up <= 0 or A_down <= 0:
        raise DomainError("peak amplitudes must be positive")
    if delta_g <= 0:
        raise DomainError("spin splitting must be positive")
    if strength_ratio <= 0:
        raise DomainError("strength ratio must be positive")
    ratio = A_up / (A_down * strength_ratio)
    if ratio >= 1.0:
        raise NonphysicalPopulationError(
            f"amplitude ratio {ratio:.4g} >= 1: inverted or equal spin populations"
        )
    L = np.log(ratio)
    T = -delta_g / L
    rel2 = (sigma_up / A_up) ** 2 + (sigma_down / A_down) ** 2
    sigma = np.sqrt((delta_g / L**2) ** 2 * rel2 + (delta_g_sigma / L) ** 2)
    lo, hi = optimal_range(delta_g)
    flags = dict(validity_flags or {})
    return TemperatureEstimate(float(T), float(sigma), "ratiometric", bool(lo < T < hi), flags)
