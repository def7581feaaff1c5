"""Forward model of photoluminescence-excitation (PLE) spectra.

Expected counts per repetition are built from thermally populated Z levels,
Lorentzian crystal-field lines that broaden and shift with temperature, a
thermally activated non-radiative quench and the fraction of the emission that
survives the detection filter. Sampled spectra add Poisson statistics of an
average over ``n_averages`` repetitions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError
from .physics import (
    CONSTANTS,
    SiteLevelStructure,
    ZeemanConfig,
    boltzmann_populations,
    default_sites,
    ghz_to_nm_width,
    zeeman_splitting,
)

GRID_SPAN_NM = (1475.0, 1570.0)
TEMPERATURE_SPAN_K = (1.0, 320.0)
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass
class LineShapeParams:
    fwhm0: float = 0.3  # nm
    fwhm_poly: tuple[float, float] = (1e-3, 4e-5)  # nm/K, nm/K^2
    center_shift_poly: tuple[float, float] = (1e-4, 2e-6)  # nm/K, nm/K^2

    def __post_init__(self):
        self.fwhm_poly = tuple(float(v) for v in self.fwhm_poly)
        self.center_shift_poly = tuple(float(v) for v in self.center_shift_poly)
        T = np.linspace(1.2, 295.0, 500)
        w = self.fwhm(T)
        if np.any(w <= 0):
            raise DomainError("line width must stay positive on 1.2-295 K")
        if np.any(np.diff(w) < 0) or np.any(np.diff(self.shift(T)) < 0):
            raise DomainError("width and center shift must not decrease with T")

    def fwhm(self, T):
        a1, a2 = self.fwhm_poly
        return self.fwhm0 + a1 * T + a2 * np.square(T)

    def shift(self, T):
        b1, b2 = self.center_shift_poly
        return b1 * T + b2 * np.square(T)


@dataclass
class QuenchModel:
    activation_energy: float = 2000.0  # K
    prefactor: float = 1e5
    radiative_rate: float = 5e3  # 1/s

    def __post_init__(self):
        if self.activation_energy < 0 or self.prefactor < 0 or self.radiative_rate <= 0:
            raise DomainError("quench parameters must be non-negative")


@dataclass
class DetectionFilter:
    kind: Literal["none", "longpass"] = "longpass"
    step_center: float = 1551.3  # nm
    step_width: float = 1.5  # nm

    def __post_init__(self):
        if self.kind not in ("none", "longpass"):
            raise DomainError(f"unknown filter kind {self.kind!r}")
        if self.step_width < 0:
            raise DomainError("filter step width must be >= 0")

    def transmission(self, wavelength_nm):
        lam = np.asarray(wavelength_nm, dtype=float)
        if self.kind == "none":
            return np.ones_like(lam)
        lo = self.step_center - self.step_width / 2
        if self.step_width == 0:
            return (lam >= self.step_center).astype(float)
        return np.clip((lam - lo) / self.step_width, 0.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "step_center_nm": self.step_center, "step_width_nm": self.step_width}


@dataclass
class ZeemanLineParams:
    """Inhomogeneous (Gaussian) profile of the resolved spin-preserving lines."""

    fwhm_ghz: float = 5.0

    def __post_init__(self):
        if not self.fwhm_ghz > 0:
            raise DomainError("spin-line width must be positive")


@dataclass
class SynthesisConfig:
    sites: list[SiteLevelStructure] = field(default_factory=default_sites)
    lineshape: LineShapeParams = field(default_factory=LineShapeParams)
    quench: QuenchModel = field(default_factory=QuenchModel)
    filter: DetectionFilter = field(default_factory=DetectionFilter)
    zeeman_line: ZeemanLineParams = field(default_factory=ZeemanLineParams)
    # per-site (8, 7) absorption strengths and (7, 8) emission branching, None = defaults
    strengths: list[np.ndarray] | None = None
    branching: list[np.ndarray] | None = None
    site_weights: Sequence[float] | None = None
    scale: float = 145.0  # counts per repetition at unit line height
    ion_density_scale: float = 1.0
    dark_counts: float = 0.5
    n_averages: int = 500

    def __post_init__(self):
        n = len(self.sites)
        if self.strengths is None:
            self.strengths = [np.ones((8, 7)) for _ in range(n)]
        if self.branching is None:
            self.branching = [np.full((7, 8), 1.0 / 8.0) for _ in range(n)]
        if self.site_weights is None:
            self.site_weights = [1.0] * n
        self.strengths = [np.asarray(s, dtype=float) for s in self.strengths]
        self.branching = [np.asarray(b, dtype=float) for b in self.branching]
        self.site_weights = [float(w) for w in self.site_weights]
        if not (len(self.strengths) == len(self.branching) == len(self.site_weights) == n):
            raise DomainError("strengths, branching and site weights need one entry per site")
        for s in self.strengths:
            if s.shape != (8, 7) or np.any(s < 0):
                raise DomainError("transition strengths must be a non-negative 8x7 matrix")
        for b in self.branching:
            _check_branching(b)
        if self.scale < 0 or self.ion_density_scale < 0 or self.dark_counts < 0:
            raise DomainError("scale, ion density and dark counts must be >= 0")
        if self.n_averages < 1:
            raise DomainError("n_averages must be >= 1")


@dataclass
class PleSpectrum:
    wavelengths: np.ndarray
    counts: np.ndarray
    uncertainties: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        self.uncertainties = np.asarray(self.uncertainties, dtype=float)
        if not (self.wavelengths.shape == self.counts.shape == self.uncertainties.shape):
            raise DomainError("wavelengths, counts and uncertainties must be congruent")
        if np.any(np.diff(self.wavelengths) <= 0):
            raise DomainError("wavelength grid must increase strictly")
        if np.any(self.counts < 0) or np.any(self.uncertainties < 0):
            raise DomainError("counts and uncertainties must be >= 0")

    @property
    def temperature(self) -> float:
        return float(self.meta["T_K"])

    @property
    def field(self) -> float:
        return float(self.meta.get("B_T", 0.0))

    def window(self, lo: float, hi: float) -> "PleSpectrum":
        m = (self.wavelengths >= lo) & (self.wavelengths <= hi)
        return PleSpectrum(self.wavelengths[m], self.counts[m], self.uncertainties[m], dict(self.meta))


def _check_branching(b):
    if b.ndim != 2 or b.shape[1] != 8 or b.shape[0] != 7:
        raise DomainError("branching matrix must be 7 x 8 (Y levels x Z levels)")
    if np.any(b < 0) or not np.allclose(b.sum(axis=1), 1.0, atol=1e-12):
        raise DomainError("branching rows must be non-negative and sum to 1")


def lorentzian(wl, center, fwhm, amplitude, bg_slope=0.0, bg_offset=0.0):
    """Lorentzian peak of height ``amplitude`` on a linear background."""
    if not np.all(np.asarray(fwhm) > 0):
        raise DomainError("fwhm must be positive")
    wl = np.asarray(wl, dtype=float)
    hw2 = (np.asarray(fwhm) / 2.0) ** 2
    x = wl - center
    return amplitude * hw2 / (x * x + hw2) + bg_offset + bg_slope * x


def gaussian(wl, center, fwhm, amplitude, bg_slope=0.0, bg_offset=0.0):
    if not np.all(np.asarray(fwhm) > 0):
        raise DomainError("fwhm must be positive")
    x = np.asarray(wl, dtype=float) - center
    s = fwhm * FWHM_TO_SIGMA
    return amplitude * np.exp(-0.5 * (x / s) ** 2) + bg_offset + bg_slope * x


def quench_factor(qm: QuenchModel, T: float) -> float:
    """Radiative fraction 1 / (1 + C exp(-E_a/T))."""
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")
    return 1.0 / (1.0 + qm.prefactor * np.exp(-qm.activation_energy / T))


def emission_detected_fraction(site: SiteLevelStructure, branching, T: float, filt: DetectionFilter) -> float:
    """Share of the emission from thermalized Y levels passing the detection filter."""
    b = np.asarray(branching, dtype=float)
    _check_branching(b)
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")
    if filt.kind == "none":
        return 1.0
    p_y = boltzmann_populations(site.y_energies, site.y_degeneracies, T)
    trans = filt.transmission(site.transition_table().T)  # (7, 8): Y_i -> Z_j
    return float(np.clip(p_y @ np.sum(b * trans, axis=1), 0.0, 1.0))


def _validate_inputs(T, grid):
    grid = np.asarray(grid, dtype=float)
    lo, hi = GRID_SPAN_NM
    if grid.size == 0 or grid.min() < lo or grid.max() > hi:
        raise DomainError(f"wavelength grid must lie within [{lo}, {hi}] nm")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("wavelength grid must increase strictly")
    tlo, thi = TEMPERATURE_SPAN_K
    if not (tlo <= T <= thi):
        raise DomainError(f"temperature {T} K outside [{tlo}, {thi}] K")
    return grid


def _site_lines(cfg: SynthesisConfig, k: int, T: float):
    """Centers (nm) and heights of all Z_i -> Y_j excitation lines of site k."""
    site = cfg.sites[k]
    p_z = boltzmann_populations(site.z_energies, site.z_degeneracies, T)
    centers = site.transition_table() + cfg.lineshape.shift(T)
    heights = p_z[:, None] * cfg.strengths[k]
    return centers, heights, p_z


def _amplitude_prefactor(cfg: SynthesisConfig, k: int, T: float) -> float:
    eta = quench_factor(cfg.quench, T)
    det = emission_detected_fraction(cfg.sites[k], cfg.branching[k], T, cfg.filter)
    return cfg.scale * cfg.ion_density_scale * cfg.site_weights[k] * eta * det


def expected_counts(cfg: SynthesisConfig, T: float, grid, replace_z1y1: dict | None = None) -> np.ndarray:
    """Noiseless counts per repetition on ``grid``.

    Line heights scale as fwhm0/fwhm(T), so each line keeps its integrated area
    while it broadens. ``replace_z1y1`` maps a site index to a list of
    (center_nm, height, fwhm_nm) Gaussians that stand in for its Z1 -> Y1 line.
    """
    grid = np.asarray(grid, dtype=float)
    fwhm = float(cfg.lineshape.fwhm(T))
    height_scale = cfg.lineshape.fwhm0 / fwhm
    total = np.zeros_like(grid)
    for k in range(len(cfg.sites)):
        pref = _amplitude_prefactor(cfg, k, T)
        if pref == 0.0:
            continue
        centers, heights, p_z = _site_lines(cfg, k, T)
        heights = heights * height_scale
        if replace_z1y1 and k in replace_z1y1:
            heights[0, 0] = 0.0
            for c, h, w in replace_z1y1[k]:
                total += pref * p_z[0] * gaussian(grid, c, w, h)
        c = centers.ravel()
        h = heights.ravel()
        keep = h > 0
        hw2 = (fwhm / 2.0) ** 2
        x = grid[:, None] - c[None, keep]
        total += pref * np.sum(h[keep] * hw2 / (x * x + hw2), axis=1)
    return total + cfg.dark_counts


def _finalize(cfg, T, B, grid, mu, rng_seed, extra=None) -> PleSpectrum:
    n = cfg.n_averages
    if rng_seed is None:
        counts = mu.copy()
    else:
        rng = np.random.default_rng(rng_seed)
        counts = rng.poisson(mu * n) / n
    sigma = np.sqrt(mu / n)
    meta = {"T_K": float(T), "B_T": float(B), "filter": cfg.filter.to_dict(), "seed": rng_seed, "n_averages": n}
    if extra:
        meta.update(extra)
    return PleSpectrum(grid.copy(), counts, sigma, meta)


def synthesize_ple_spectrum(cfg: SynthesisConfig, T: float, B: float, grid, rng_seed: int | None = None) -> PleSpectrum:
    """Zero-field PLE spectrum at temperature ``T``.

    ``B`` is recorded in the metadata; Zeeman structure is produced by
    :func:`spinsplit_ple_spectrum`. With ``rng_seed`` each grid point is the mean
    of ``n_averages`` Poisson repetitions, i.e. Poisson(n mu) / n.
    """
    grid = _validate_inputs(T, grid)
    if B < 0:
        raise DomainError("magnetic field must be >= 0")
    mu = expected_counts(cfg, T, grid)
    return _finalize(cfg, T, B, grid, mu, rng_seed)


def spin_line_positions(site: SiteLevelStructure, zc: ZeemanConfig) -> tuple[float, float]:
    """Wavelengths (nm) of the (up, down) spin-preserving Z1 -> Y1 lines.

    The pair sits symmetrically about the zero-field line at detunings
    -/+ (Delta_g - Delta_e)/2; the lower-frequency member starts from the
    upper ground spin state.
    """
    dg = zeeman_splitting(zc, "ground")
    de = zeeman_splitting(zc, "excited")
    nu0 = CONSTANTS.c / (site.z1y1_wavelength * 1e-9)
    half = 0.5 * (dg - de) / CONSTANTS.h_over_kB
    lam_up = CONSTANTS.c / (nu0 - half) * 1e9
    lam_down = CONSTANTS.c / (nu0 + half) * 1e9
    return float(lam_up), float(lam_down)


def spinsplit_ple_spectrum(
    cfg: SynthesisConfig,
    T: float,
    zc: ZeemanConfig,
    spin_populations,
    grid,
    rng_seed: int | None = None,
    site_index: int = 0,
    strength_ratio: float = 1.0,
) -> PleSpectrum:
    """PLE spectrum with the Z1 -> Y1 line of one site split by a magnetic field.

    ``spin_populations`` is the (up, down) ground-spin pair; line heights are
    proportional to it (times ``strength_ratio`` for the up line).
    """
    grid = _validate_inputs(T, grid)
    p = np.asarray(spin_populations, dtype=float)
    if p.shape != (2,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError("spin populations must be two non-negative numbers summing to 1")
    site = cfg.sites[site_index]
    lam_up, lam_down = spin_line_positions(site, zc)
    shift = float(cfg.lineshape.shift(T))
    zl = cfg.zeeman_line
    w0 = ghz_to_nm_width(site.z1y1_wavelength, zl.fwhm_ghz)
    w = w0 + float(cfg.lineshape.fwhm(T) - cfg.lineshape.fwhm0)
    h = w0 / w
    lines = [(lam_up + shift, h * p[0] * strength_ratio, w), (lam_down + shift, h * p[1], w)]
    mu = expected_counts(cfg, T, grid, replace_z1y1={site_index: lines})
    extra = {
        "g_eff_ground_GHz_per_T": zc.g_eff_ground,
        "g_eff_excited_GHz_per_T": zc.g_eff_excited,
        "g_eff_uncertainty_GHz_per_T": zc.g_eff_uncertainty,
        "spin_populations": [float(p[0]), float(p[1])],
        "line_up_nm": lam_up + shift,
        "line_down_nm": lam_down + shift,
    }
    return _finalize(cfg, T, zc.field_T, grid, mu, rng_seed, extra)
