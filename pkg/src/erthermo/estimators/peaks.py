"""Single-peak fits (Lorentzian or Gaussian on a linear background)."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError, NoPeakError
from ..synth import PleSpectrum
from .lm import levenberg_marquardt

PARAM_NAMES = ("amplitude", "fwhm", "center", "bg_offset", "bg_slope")
_FOUR_LN2 = 4.0 * np.log(2.0)


@dataclass
class PeakFitResult:
    amplitude: float
    fwhm: float
    center: float
    bg_offset: float
    bg_slope: float
    covariance: np.ndarray
    converged: bool = True
    residual_norm: float = 0.0
    shape: str = "lorentzian"

    @property
    def params(self) -> np.ndarray:
        return np.array([self.amplitude, self.fwhm, self.center, self.bg_offset, self.bg_slope])

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def sigma(self, name: str) -> float:
        return float(self.sigmas[PARAM_NAMES.index(name)])

    def shifted(self, delta_nm: float) -> "PeakFitResult":
        return replace(self, center=self.center + delta_nm)


def _lorentz_parts(x, w):
    den = 4.0 * x * x + w * w
    g = w * w / den
    dg_dw = 8.0 * w * x * x / den**2
    dg_dc = 8.0 * w * w * x / den**2
    return g, dg_dw, dg_dc


def _gauss_parts(x, w):
    g = np.exp(-_FOUR_LN2 * x * x / (w * w))
    dg_dw = g * 2.0 * _FOUR_LN2 * x * x / w**3
    dg_dc = g * 2.0 * _FOUR_LN2 * x / (w * w)
    return g, dg_dw, dg_dc


_SHAPES = {"lorentzian": _lorentz_parts, "gaussian": _gauss_parts}


def peak_model(shape: str, wl, params) -> np.ndarray:
    a, w, c, b0, b1 = params
    x = np.asarray(wl, dtype=float) - c
    g = _SHAPES[shape](x, w)[0]
    return a * g + b0 + b1 * x


def _peak_jacobian(shape, wl, params):
    a, w, c, b0, b1 = params
    x = wl - c
    g, dg_dw, dg_dc = _SHAPES[shape](x, w)
    return np.column_stack([g, a * dg_dw, a * dg_dc - b1, np.ones_like(x), x])


def initial_guess(wl, y, sigma) -> np.ndarray:
    """Self-seeding start point; raises NoPeakError on a featureless window."""
    med = float(np.median(y))
    i = int(np.argmax(y))  # first maximum = lowest wavelength on ties
    amp = float(y[i]) - med
    if amp < 3.0 * float(np.median(sigma)):
        raise NoPeakError("no peak above the noise in the fit window")
    half = med + amp / 2.0
    lo = i
    while lo > 0 and y[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi + 1] >= half:
        hi += 1
    step = float(np.min(np.diff(wl)))
    fwhm = max(float(wl[hi] - wl[lo]), step)
    k = max(1, len(wl) // 10)
    left, right = float(np.mean(y[:k])), float(np.mean(y[-k:]))
    wl_l, wl_r = float(np.mean(wl[:k])), float(np.mean(wl[-k:]))
    slope = (right - left) / (wl_r - wl_l)
    offset = left + slope * (wl[i] - wl_l)
    return np.array([amp, fwhm, float(wl[i]), offset, slope])


def _fit_peak(shape, spec: PleSpectrum, window, init: PeakFitResult | None, max_iter: int) -> PeakFitResult:
    lo, hi = window
    sub = spec.window(lo, hi)
    wl, y, s = sub.wavelengths, sub.counts, sub.uncertainties
    if wl.size < 8:
        raise DomainError(f"fit window [{lo}, {hi}] nm holds {wl.size} points, need >= 8")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
        raise DomainError("counts and uncertainties must be finite")
    s = np.where(s > 0, s, max(float(np.min(s[s > 0])) if np.any(s > 0) else 1.0, 1e-12))
    p0 = init.params if init is not None else initial_guess(wl, y, s)
    res = levenberg_marquardt(
        lambda p: peak_model(shape, wl, p),
        lambda p: _peak_jacobian(shape, wl, p),
        p0,
        y,
        s,
        max_iter=max_iter,
        feasible=lambda p: p[1] > 0,
    )
    resid = y - peak_model(shape, wl, res.params)
    return PeakFitResult(
        *map(float, res.params),
        covariance=res.covariance,
        converged=res.converged,
        residual_norm=float(np.linalg.norm(resid)),
        shape=shape,
    )


def fit_peak_lorentzian(spec: PleSpectrum, window, init: PeakFitResult | None = None, max_iter: int = 200) -> PeakFitResult:
    """Weighted Lorentzian-plus-linear-background fit inside ``window`` (nm).

    Parameter uncertainties are the square roots of the diagonal of
    (J^T W J)^-1 with W = 1/sigma^2, i.e. they rely on the supplied sigmas.
    """
    return _fit_peak("lorentzian", spec, window, init, max_iter)


def fit_peak_gaussian(spec: PleSpectrum, window, init: PeakFitResult | None = None, max_iter: int = 200) -> PeakFitResult:
    return _fit_peak("gaussian", spec, window, init, max_iter)
