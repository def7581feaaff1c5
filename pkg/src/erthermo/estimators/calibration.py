"""Calibration curves y(T) for amplitude-type probes and their inversion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.optimize import bisect

from ..errors import (
    AmbiguityError,
    DomainError,
    FitDegeneracyError,
    InsufficientPointsError,
    OutOfRangeError,
)
from .lm import levenberg_marquardt

MODELS = ("exponential_offset", "exponential_piecewise", "poly2", "cubic_spline", "boltzmann_ratio")
METHODS = ("quench", "filtered", "peak_amplitude", "peak_fwhm", "peak_center", "ratiometric")
FORMAT_VERSION = 1


@dataclass
class TemperatureEstimate:
    value: float
    sigma: float
    method: str
    in_optimal_range: bool = True
    validity_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "value_K": self.value,
            "sigma_K": self.sigma,
            "method": self.method,
            "in_optimal_range": self.in_optimal_range,
            "validity_flags": dict(self.validity_flags),
        }


@dataclass
class ProbeCalibration:
    """Fitted observable-vs-temperature curve.

    ``params`` by model:

    - exponential_offset: (a, T0, c) for y = a exp(-T/T0) + c
    - exponential_piecewise: (y_knot, k_low, k_high) for
      y = y_knot exp(-k (T - knot)) with k = k_low below the knot, k_high above
    - poly2: (c0, c1, c2)
    - cubic_spline: B-spline coefficients on ``knots``
    - boltzmann_ratio: (delta,) for y = exp(-delta/T)
    """

    model: str
    params: np.ndarray
    valid_range: tuple[float, float]
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    param_covariance: np.ndarray | None = None
    knots: np.ndarray | None = None
    knot_T: float | None = None
    gap: tuple[float, float] | None = None
    smoothing: float = 0.0
    method: str | None = None
    observable: dict | None = None  # how y is read off a spectrum, see pipeline

    def __post_init__(self):
        if self.model not in MODELS:
            raise DomainError(f"unknown calibration model {self.model!r}")
        self.params = np.asarray(self.params, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.param_covariance is None:
            self.param_covariance = np.zeros((self.params.size, self.params.size))
        self.param_covariance = np.asarray(self.param_covariance, dtype=float)
        if self.knots is not None:
            self.knots = np.asarray(self.knots, dtype=float)
        self.valid_range = (float(self.valid_range[0]), float(self.valid_range[1]))

    # evaluation -----------------------------------------------------------

    def predict(self, T, params=None):
        return _evaluate(self, np.asarray(T, dtype=float), self.params if params is None else params, 0)

    def derivative(self, T, params=None):
        return _evaluate(self, np.asarray(T, dtype=float), self.params if params is None else params, 1)

    def in_range(self, T) -> bool:
        lo, hi = self.valid_range
        return lo <= T <= hi

    def in_gap(self, T) -> bool:
        return self.gap is not None and self.gap[0] < T < self.gap[1]

    # persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "erthermo-calibration",
            "format_version": FORMAT_VERSION,
            "model": self.model,
            "method": self.method,
            "params": self.params.tolist(),
            "param_covariance": self.param_covariance.tolist(),
            "valid_range_K": list(self.valid_range),
            "residuals": self.residuals.tolist(),
            "knots": None if self.knots is None else self.knots.tolist(),
            "knot_T_K": self.knot_T,
            "gap_K": None if self.gap is None else list(self.gap),
            "smoothing": self.smoothing,
            "observable": self.observable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeCalibration":
        if d.get("format") != "erthermo-calibration":
            raise DomainError("not a calibration document")
        if d.get("format_version") != FORMAT_VERSION:
            raise DomainError(f"unsupported calibration format version {d.get('format_version')}")
        return cls(
            model=d["model"],
            params=d["params"],
            valid_range=tuple(d["valid_range_K"]),
            residuals=d.get("residuals", []),
            param_covariance=d.get("param_covariance"),
            knots=d.get("knots"),
            knot_T=d.get("knot_T_K"),
            gap=None if d.get("gap_K") is None else tuple(d["gap_K"]),
            smoothing=d.get("smoothing", 0.0),
            method=d.get("method"),
            observable=d.get("observable"),
        )


def _evaluate(cal: ProbeCalibration, T, p, order):
    m = cal.model
    if m == "exponential_offset":
        a, t0, c = p
        e = np.exp(-T / t0)
        return a * e + c if order == 0 else -a / t0 * e
    if m == "exponential_piecewise":
        yk, k1, k2 = p
        k = np.where(T <= cal.knot_T, k1, k2)
        y = yk * np.exp(-k * (T - cal.knot_T))
        return y if order == 0 else -k * y
    if m == "poly2":
        c0, c1, c2 = p
        return c0 + c1 * T + c2 * T * T if order == 0 else c1 + 2 * c2 * T
    if m == "cubic_spline":
        spl = BSpline(cal.knots, p, 3, extrapolate=True)
        return spl(T) if order == 0 else spl.derivative()(T)
    (delta,) = p
    y = np.exp(-delta / T)
    return y if order == 0 else delta / (T * T) * y


# fitting ----------------------------------------------------------------------


def _prepare(samples):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError("samples must be rows of (T, y, sigma_y)")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    T, y, s = arr.T
    if np.any(np.diff(T) <= 0):
        raise DomainError("sample temperatures must be distinct")
    if np.any(s <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("sample uncertainties must be positive and finite")
    return T, y, s


def _need(n, n_params, model):
    if n < n_params + 2:
        raise InsufficientPointsError(f"insufficient points: {model} needs >= {n_params + 2} samples, got {n}")


def _fit_exponential_offset(T, y, s):
    tref = T[0]
    span = T[-1] - T[0]

    def design(t0):
        return np.column_stack([np.exp(-(T - tref) / t0), np.ones_like(T)])

    # variable projection over the decay constant for a robust starting point
    best = None
    for t0 in np.concatenate([np.geomspace(0.02, 50, 120) * span, -np.geomspace(0.02, 50, 120) * span]):
        X = design(t0) / s[:, None]
        coef, *_ = np.linalg.lstsq(X, y / s, rcond=None)
        chi2 = float(np.sum((X @ coef - y / s) ** 2))
        if best is None or chi2 < best[0]:
            best = (chi2, coef[0], t0, coef[1])
    _, a_ref, t0, c = best

    def model(p):
        return p[0] * np.exp(-(T - tref) / p[1]) + p[2]

    def jac(p):
        e = np.exp(-(T - tref) / p[1])
        return np.column_stack([e, p[0] * e * (T - tref) / p[1] ** 2, np.ones_like(T)])

    res = levenberg_marquardt(model, jac, [a_ref, t0, c], y, s, feasible=lambda p: p[1] != 0)
    a_ref, t0, c = res.params
    a = a_ref * np.exp(tref / t0)
    # Jacobian of (a, T0, c) with respect to (a_ref, T0, c)
    J = np.array([[np.exp(tref / t0), -a * tref / t0**2, 0.0], [0, 1, 0], [0, 0, 1]])
    return np.array([a, t0, c]), J @ res.covariance @ J.T


def _fit_exponential_piecewise(T, y, s, split):
    if split is None:
        raise DomainError("exponential_piecewise needs split points (T_low_end, T_high_start)")
    split = np.atleast_1d(np.asarray(split, dtype=float))
    lo_end, hi_start = (split[0], split[0]) if split.size == 1 else (split[0], split[1])
    if hi_start < lo_end:
        raise DomainError("split points must be ordered")
    knot = 0.5 * (lo_end + hi_start)
    low = T <= knot
    if low.sum() < 2 or (~low).sum() < 2:
        raise InsufficientPointsError("insufficient points: each exponential segment needs >= 2 samples")
    if np.any(y <= 0):
        raise DomainError("exponential_piecewise needs positive observables")
    k0 = []
    lny_knot = []
    for m in (low, ~low):
        w = (y[m] / s[m]) ** 2
        X = np.column_stack([np.ones(m.sum()), T[m] - knot])
        coef = np.linalg.lstsq(X * np.sqrt(w)[:, None], np.log(y[m]) * np.sqrt(w), rcond=None)[0]
        lny_knot.append(coef[0])
        k0.append(-coef[1])
    p0 = [np.exp(np.mean(lny_knot)), k0[0], k0[1]]

    def model(p):
        k = np.where(low, p[1], p[2])
        return p[0] * np.exp(-k * (T - knot))

    def jac(p):
        k = np.where(low, p[1], p[2])
        e = np.exp(-k * (T - knot))
        d = -(T - knot) * p[0] * e
        return np.column_stack([e, np.where(low, d, 0.0), np.where(low, 0.0, d)])

    res = levenberg_marquardt(model, jac, p0, y, s)
    return res.params, res.covariance, knot, (float(lo_end), float(hi_start)) if hi_start > lo_end else None


def _fit_linear(X, y, s):
    Xw = X / s[:, None]
    normal = Xw.T @ Xw
    if np.linalg.matrix_rank(Xw) < X.shape[1] or np.linalg.cond(normal) > 1e14:
        raise FitDegeneracyError("singular normal equations (collinear data)")
    cov = np.linalg.inv(normal)
    return cov @ (Xw.T @ (y / s)), cov


def spline_knots(T) -> np.ndarray:
    """Clamped cubic knot vector with interior knots at every third sample."""
    interior = T[3:-1:3]
    interior = interior[(interior > T[0]) & (interior < T[-1])]
    return np.concatenate([[T[0]] * 4, interior, [T[-1]] * 4])


def _fit_spline(T, y, s, smoothing):
    t = spline_knots(T)
    nb = len(t) - 4
    _need(len(T), nb, "cubic_spline")
    B = BSpline.design_matrix(T, t, 3).toarray()
    Bw = B / s[:, None]
    D = np.diff(np.eye(nb), 2, axis=0)
    normal = Bw.T @ Bw
    A = normal + smoothing * D.T @ D
    if np.linalg.cond(A) > 1e14:
        raise FitDegeneracyError("singular normal equations in spline fit")
    Ainv = np.linalg.inv(A)
    coef = Ainv @ (Bw.T @ (y / s))
    cov = Ainv @ normal @ Ainv
    return coef, 0.5 * (cov + cov.T), t


def calibrate_probe(samples, model: str, *, split=None, smoothing: float = 0.0, method: str | None = None) -> ProbeCalibration:
    """Weighted fit of a calibration family to (T, y, sigma_y) samples.

    Parameters
    ----------
    samples : array_like, shape (n, 3)
        Temperature (K), observable and its one-sigma uncertainty.
    model : str
        One of ``exponential_offset``, ``exponential_piecewise``, ``poly2`` or
        ``cubic_spline``.
    split : float or (float, float), optional
        End of the low segment and start of the high segment for
        ``exponential_piecewise``. The segments meet continuously halfway
        between; queries falling between the two are flagged as in the gap.
    smoothing : float
        Second-difference penalty on the spline coefficients.
    """
    T, y, s = _prepare(samples)
    gap = knot_T = knots = None
    if model == "exponential_offset":
        _need(len(T), 3, model)
        params, cov = _fit_exponential_offset(T, y, s)
    elif model == "exponential_piecewise":
        _need(len(T), 3, model)
        params, cov, knot_T, gap = _fit_exponential_piecewise(T, y, s, split)
    elif model == "poly2":
        _need(len(T), 3, model)
        params, cov = _fit_linear(np.column_stack([np.ones_like(T), T, T * T]), y, s)
    elif model == "cubic_spline":
        params, cov, knots = _fit_spline(T, y, s, smoothing)
    else:
        raise DomainError(f"unknown calibration model {model!r}")
    cal = ProbeCalibration(
        model=model,
        params=params,
        valid_range=(T[0], T[-1]),
        param_covariance=cov,
        knots=knots,
        knot_T=knot_T,
        gap=gap,
        smoothing=smoothing,
        method=method,
    )
    cal.residuals = y - cal.predict(T)
    return cal


def boltzmann_calibration(delta_K: float, delta_sigma: float = 0.0, valid_range=(0.5, 50.0)) -> ProbeCalibration:
    """Calibration-free Boltzmann ratio y = exp(-delta/T) as a calibration object."""
    if delta_K <= 0:
        raise DomainError("spin splitting must be positive")
    return ProbeCalibration(
        "boltzmann_ratio", [delta_K], valid_range, param_covariance=[[delta_sigma**2]], method="ratiometric"
    )


# inversion --------------------------------------------------------------------


def _roots(f, grid):
    vals = f(grid)
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(bisect(f, grid[i], grid[i + 1], xtol=1e-7, rtol=4 * np.finfo(float).eps)))
    if vals[-1] == 0:
        roots.append(float(grid[-1]))
    return roots


def invert_calibration(cal: ProbeCalibration, y: float, sigma_y: float, method: str | None = None) -> TemperatureEstimate:
    """Temperature at which the calibration curve reaches ``y``.

    The root is bracketed on a 1000-point grid over the valid range and refined
    by bisection; sigma = sigma_y / |dy/dT| at the root.
    """
    lo, hi = cal.valid_range
    grid = np.linspace(lo, hi, 1000)
    vals = cal.predict(grid)
    d = np.diff(vals)
    monotone = np.all(d > 0) or np.all(d < 0)

    def f(T):
        return cal.predict(T) - y

    if not monotone:
        raise AmbiguityError("calibration is not monotone on its valid range", roots=_roots(f, grid))
    ymin, ymax = float(vals.min()), float(vals.max())
    if not (ymin <= y <= ymax):
        raise OutOfRangeError(f"observable {y:g} outside calibration range [{ymin:g}, {ymax:g}]")
    if f(lo) == 0:
        T = lo
    elif f(hi) == 0:
        T = hi
    else:
        T = float(bisect(f, lo, hi, xtol=1e-7, rtol=4 * np.finfo(float).eps))
    slope = abs(float(cal.derivative(T)))
    sigma = float(sigma_y) / slope if slope > 0 else float("inf")
    flags = {"in_gap": cal.in_gap(T)} if cal.gap is not None else {}
    return TemperatureEstimate(T, sigma, method or cal.method or "quench", True, flags)
