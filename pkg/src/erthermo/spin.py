"""Two-state rate model of the Z1 spin doublet under pulsed optical probing.

Between and during pulses the doublet relaxes towards its Boltzmann pair at the
spin-lattice rate R; during a pulse the probed state is additionally pumped
into the other state at rate W. Both segments are linear, so each is
propagated exactly with its exponential solution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConvergenceError, DomainError


@dataclass
class RelaxationParams:
    direct_coeff: float = 400.0  # 1/(s T^5)
    orbach_coeff: float = 1.5e9  # 1/s
    orbach_gap: float = 126.0  # K, Z2 of site A
    direct_thermal_factor: bool = True  # coth(delta/2T) on top of B^5

    def __post_init__(self):
        if self.direct_coeff < 0 or self.orbach_coeff < 0 or self.orbach_gap < 0:
            raise DomainError("relaxation coefficients must be >= 0")


@dataclass
class ProbeSequence:
    pulse_duration: float = 200e-6  # s
    repetition_period: float = 4e-3  # s
    pump_rate: float = 50.0  # 1/s while the pulse is on
    n_repetitions: int = 1_000_000

    def __post_init__(self):
        if not (0 < self.pulse_duration < self.repetition_period):
            raise DomainError("need 0 < pulse_duration < repetition_period")
        if self.pump_rate < 0 or self.n_repetitions < 1:
            raise DomainError("pump rate must be >= 0 and n_repetitions >= 1")


def _check_T(T):
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")


def direct_rate(rp: RelaxationParams, B: float, T: float, delta_g: float) -> float:
    if B == 0 or rp.direct_coeff == 0:
        return 0.0
    rate = rp.direct_coeff * B**5
    if rp.direct_thermal_factor and delta_g > 0:
        rate /= np.tanh(delta_g / (2.0 * T))
    return float(rate)


def orbach_rate(rp: RelaxationParams, T: float) -> float:
    return float(rp.orbach_coeff * np.exp(-rp.orbach_gap / T))


def relaxation_rate(rp: RelaxationParams, B: float, T: float, delta_g: float) -> float:
    """Spin-lattice rate in 1/s: direct (B^5) plus Orbach (via the Z2 level)."""
    _check_T(T)
    if B < 0:
        raise DomainError("magnetic field must be >= 0")
    return direct_rate(rp, B, T, delta_g) + orbach_rate(rp, T)


def boltzmann_spin_pair(delta_g: float, T: float) -> np.ndarray:
    """(p_up, p_down) of a doublet split by ``delta_g`` kelvin."""
    x = np.exp(-delta_g / T)
    return np.array([x / (1.0 + x), 1.0 / (1.0 + x)])


def _propagate(p, p_inf, rate, t):
    return p_inf + (p - p_inf) * np.exp(-rate * t)


def steady_spin_populations(
    rp: RelaxationParams,
    seq: ProbeSequence,
    B: float,
    T: float,
    delta_g: float,
    probed_state: Literal["up", "down"] = "down",
    tol: float = 1e-9,
    rate: float | None = None,
) -> np.ndarray:
    """(p_up, p_down) at the start of a pulse once the pulse train is periodic.

    The cycle map is iterated from the thermal pair until successive
    start-of-pulse populations differ by less than ``tol`` and the implied
    distance to the periodic state is below ``tol`` as well. ``rate`` overrides
    the relaxation rate computed from ``rp``.
    """
    _check_T(T)
    if probed_state not in ("up", "down"):
        raise DomainError(f"probed_state must be 'up' or 'down', got {probed_state!r}")
    R = relaxation_rate(rp, B, T, delta_g) if rate is None else float(rate)
    if R < 0:
        raise DomainError("relaxation rate must be >= 0")
    eq = boltzmann_spin_pair(delta_g, T)
    k = 0 if probed_state == "up" else 1
    p_eq = eq[k]
    W = seq.pump_rate
    tau, dark = seq.pulse_duration, seq.repetition_period - seq.pulse_duration
    p_pulse_inf = R * p_eq / (W + R) if W + R > 0 else p_eq
    # one cycle is the affine map p -> alpha p + const, so the distance left to
    # the periodic state is alpha / (1 - alpha) times the last step
    alpha = np.exp(-(W + R) * tau - R * dark)
    reach = alpha / (1.0 - alpha) if alpha < 1.0 else np.inf
    p = p_eq
    for _ in range(seq.n_repetitions):
        q = _propagate(p, p_pulse_inf, W + R, tau)
        q = _propagate(q, p_eq, R, dark)
        step = abs(q - p)
        done = step < tol and step * reach < tol
        p = q
        if done:
            break
    else:
        pair = np.empty(2)
        pair[k], pair[1 - k] = p, 1.0 - p
        raise ConvergenceError(f"spin populations not periodic after {seq.n_repetitions} pulses", last=pair)
    pair = np.empty(2)
    pair[k], pair[1 - k] = p, 1.0 - p
    return pair


def ratiometric_validity_flags(
    rp: RelaxationParams,
    seq: ProbeSequence,
    B: float,
    T: float,
    delta_g: float,
    optical_lifetime: float,
    slow_threshold: float = 10.0,
    orbach_threshold: float = 1.0,
) -> dict:
    """Conditions under which the Boltzmann ratio is not read out faithfully.

    ``slow_thermalization``: relaxation does not restore equilibrium between
    pulses (R x period below ``slow_threshold``). ``orbach_shortcut``: Orbach
    spin flips within one pulse (rate x pulse above ``orbach_threshold``).
    """
    R = relaxation_rate(rp, B, T, delta_g)
    orb = orbach_rate(rp, T)
    return {
        "slow_thermalization": bool(R * seq.repetition_period < slow_threshold),
        "orbach_shortcut": bool(orb * seq.pulse_duration > orbach_threshold),
        "orbach_faster_than_lifetime": bool(orb * optical_lifetime > orbach_threshold),
    }
