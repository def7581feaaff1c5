"""Level structures, Boltzmann statistics and Zeeman splittings of Er sites in Si.

Energies are carried in kelvin (E/k_B) throughout, wavelengths in vacuum nm and
frequencies in GHz. Level indices follow the spectroscopic labels, so Z1 and Y1
are index 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    h_over_kB: float = 6.62607015e-34 / 1.380649e-23  # s K
    c: float = 299792458.0  # m/s

    @property
    def kelvin_per_ghz(self) -> float:
        return self.h_over_kB * 1e9


CONSTANTS = PhysicalConstants()

WAVELENGTH_SPAN_NM = (1475.0, 1640.0)
GROUND_LINE_SPAN_NM = (1475.0, 1538.0)


def _freq_hz(wavelength_nm):
    return CONSTANTS.c / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def _wavelength_nm(freq_hz):
    return CONSTANTS.c / np.asarray(freq_hz, dtype=float) * 1e9


@dataclass
class SiteLevelStructure:
    """Crystal-field levels of one integration site.

    Parameters
    ----------
    site_label : {"A", "B"}
    z_energies : array of 8 ground-manifold energies in K, Z1 = 0.
    y_energies : array of 7 excited-manifold energies in K, Y1 = 0.
    z1y1_wavelength : vacuum wavelength of the Z1 -> Y1 line in nm.
    degeneracies : per-level degeneracy, shared by both manifolds (Kramers
        doublets by default).
    """

    site_label: str
    z_energies: np.ndarray
    y_energies: np.ndarray
    z1y1_wavelength: float
    degeneracies: np.ndarray = field(default_factory=lambda: np.full(8, 2))

    def __post_init__(self):
        self.z_energies = np.asarray(self.z_energies, dtype=float)
        self.y_energies = np.asarray(self.y_energies, dtype=float)
        self.degeneracies = np.asarray(self.degeneracies, dtype=int)
        self.validate()

    def validate(self):
        if self.site_label not in ("A", "B"):
            raise DomainError(f"unknown site label {self.site_label!r}")
        if self.z_energies.shape != (8,) or self.y_energies.shape != (7,):
            raise DomainError("a site needs exactly 8 ground and 7 excited levels")
        for name, e in (("z_energies", self.z_energies), ("y_energies", self.y_energies)):
            if e[0] != 0.0 or np.any(np.diff(e) <= 0) or not np.all(np.isfinite(e)):
                raise DomainError(f"{name} must start at 0 and increase strictly")
        if self.degeneracies.shape != (8,) or np.any(self.degeneracies < 1):
            raise DomainError("degeneracies must be 8 integers >= 1")
        ground = self.transition_table()[0]
        lo, hi = GROUND_LINE_SPAN_NM
        if ground.min() < lo or ground.max() > hi:
            raise DomainError(f"Z1 -> Y lines of site {self.site_label} leave [{lo}, {hi}] nm")
        table = self.transition_table()
        lo, hi = WAVELENGTH_SPAN_NM
        if table.min() < lo or table.max() > hi:
            raise DomainError(f"transitions of site {self.site_label} leave [{lo}, {hi}] nm")

    @property
    def z_degeneracies(self) -> np.ndarray:
        return self.degeneracies

    @property
    def y_degeneracies(self) -> np.ndarray:
        return self.degeneracies[:7]

    def transition_table(self) -> np.ndarray:
        """Wavelengths (nm) of all Z_i <-> Y_j lines, shape (8, 7)."""
        nu0 = _freq_hz(self.z1y1_wavelength)
        gap = self.y_energies[None, :] - self.z_energies[:, None]
        return _wavelength_nm(nu0 + gap / CONSTANTS.h_over_kB)

    def to_dict(self) -> dict:
        return {
            "site_label": self.site_label,
            "z_energies_K": self.z_energies.tolist(),
            "y_energies_K": self.y_energies.tolist(),
            "z1y1_wavelength_nm": float(self.z1y1_wavelength),
            "degeneracies": self.degeneracies.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SiteLevelStructure":
        return cls(
            site_label=d["site_label"],
            z_energies=d["z_energies_K"],
            y_energies=d["y_energies_K"],
            z1y1_wavelength=d["z1y1_wavelength_nm"],
            degeneracies=d.get("degeneracies", [2] * 8),
        )


# Published anchors: Z1Y1 wavelengths of both sites, the 126 K Z2 gap of site A,
# Z1Y6 of site A at 1490.6 nm and Z1Y2 of site A at 1519 nm. All other levels are
# placeholders spaced uniformly in frequency inside the allowed span.
SITE_A = SiteLevelStructure(
    site_label="A",
    z_energies=[0.0, 126.0, 198.33, 270.67, 343.0, 415.33, 487.67, 560.0],
    y_energies=[0.0, 115.55, 160.67, 205.79, 250.90, 296.02, 341.13],
    z1y1_wavelength=1537.76,
)

SITE_B = SiteLevelStructure(
    site_label="B",
    z_energies=[0.0, 70.0, 140.0, 210.0, 280.0, 350.0, 420.0, 490.0],
    y_energies=[0.0, 62.4, 124.8, 187.2, 249.6, 312.0, 374.4],
    z1y1_wavelength=1536.06,
)


def default_sites() -> list[SiteLevelStructure]:
    return [SiteLevelStructure.from_dict(SITE_A.to_dict()), SiteLevelStructure.from_dict(SITE_B.to_dict())]


def boltzmann_populations(levels, degeneracies, T: float) -> np.ndarray:
    """Thermal occupation p_i ~ g_i exp(-E_i/T) of a set of levels.

    Parameters
    ----------
    levels : array_like
        Level energies in kelvin.
    degeneracies : array_like
        Degeneracy of each level.
    T : float
        Temperature in kelvin.

    Returns
    -------
    numpy.ndarray
        Normalized populations.
    """
    levels = np.asarray(levels, dtype=float)
    g = np.asarray(degeneracies, dtype=float)
    if levels.size == 0:
        raise DomainError("empty level list")
    if not T > 0 or not np.isfinite(T):
        raise DomainError(f"temperature must be positive, got {T}")
    if g.shape != levels.shape or np.any(g < 1):
        raise DomainError("degeneracies must match levels and be >= 1")
    if not np.all(np.isfinite(levels)):
        raise DomainError("level energies must be finite")
    # shift to the lowest level so the exponentials never overflow
    w = g * np.exp(-(levels - levels.min()) / T)
    return w / w.sum()


@dataclass
class ZeemanConfig:
    field_T: float
    g_eff_ground: float = 116.0  # GHz/T
    g_eff_excited: float | None = None  # GHz/T, default 0.7 x ground
    g_eff_uncertainty: float = 13.0  # GHz/T

    def __post_init__(self):
        if self.g_eff_excited is None:
            self.g_eff_excited = 0.7 * self.g_eff_ground
        if self.field_T < 0:
            raise DomainError("magnetic field must be >= 0")
        if not 0 < self.g_eff_ground <= 230:
            raise DomainError("g_eff_ground must lie in (0, 230] GHz/T")
        if self.g_eff_excited < 0 or self.g_eff_uncertainty < 0:
            raise DomainError("g-factors and their uncertainty must be >= 0")


def zeeman_splitting(zc: ZeemanConfig, manifold: Literal["ground", "excited"] = "ground") -> float:
    """Spin splitting of a Kramers doublet in kelvin."""
    if zc.field_T < 0:
        raise DomainError("magnetic field must be >= 0")
    if manifold == "ground":
        g = zc.g_eff_ground
    elif manifold == "excited":
        g = zc.g_eff_excited
    else:
        raise DomainError(f"unknown manifold {manifold!r}")
    return g * zc.field_T * CONSTANTS.kelvin_per_ghz


def zeeman_splitting_sigma(zc: ZeemanConfig) -> float:
    return zc.g_eff_uncertainty * zc.field_T * CONSTANTS.kelvin_per_ghz


def transition_wavelength(site: SiteLevelStructure, zi: int, yj: int) -> float:
    """Vacuum wavelength of Z_zi <-> Y_yj in nm (1-based level labels)."""
    if not (1 <= zi <= len(site.z_energies)) or not (1 <= yj <= len(site.y_energies)):
        raise IndexError(f"no transition Z{zi} -> Y{yj} at site {site.site_label}")
    nu0 = _freq_hz(site.z1y1_wavelength)
    gap = site.y_energies[yj - 1] - site.z_energies[zi - 1]
    return float(_wavelength_nm(nu0 + gap / CONSTANTS.h_over_kB))


def kelvin_to_nm_offset(wavelength_nm: float, delta_K: float) -> float:
    """Wavelength displacement produced by raising the photon energy by ``delta_K``."""
    nu = _freq_hz(wavelength_nm) + delta_K / CONSTANTS.h_over_kB
    return float(_wavelength_nm(nu) - wavelength_nm)


def ghz_to_nm_width(wavelength_nm: float, width_ghz: float) -> float:
    return float(wavelength_nm**2 * width_ghz * 1e9 / CONSTANTS.c * 1e-9)
