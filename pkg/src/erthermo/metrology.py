"""Relative sensitivity, temperature precision and cross-probe comparison."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OutOfRangeError, SingularProbeError
from .estimators.calibration import METHODS, ProbeCalibration


@dataclass
class SensitivityProfile:
    method: str
    T_grid: np.ndarray
    S_r: np.ndarray
    delta_T: np.ndarray
    integration_time: float = 0.0  # s per point
    S_r_sigma: np.ndarray | None = None
    delta_T_sigma: np.ndarray | None = None
    valid: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        self.T_grid = np.asarray(self.T_grid, dtype=float)
        n = self.T_grid.size
        self.S_r = np.asarray(self.S_r, dtype=float)
        self.delta_T = np.asarray(self.delta_T, dtype=float)
        self.S_r_sigma = np.zeros(n) if self.S_r_sigma is None else np.asarray(self.S_r_sigma, dtype=float)
        self.delta_T_sigma = np.zeros(n) if self.delta_T_sigma is None else np.asarray(self.delta_T_sigma, dtype=float)
        self.valid = np.ones(n, dtype=bool) if self.valid is None else np.asarray(self.valid, dtype=bool)
        for name in ("S_r", "delta_T", "S_r_sigma", "delta_T_sigma", "valid"):
            if getattr(self, name).shape != (n,):
                raise DomainError(f"{name} must match T_grid")
        if np.any(self.S_r < 0) or np.any(self.delta_T < 0):
            raise DomainError("sensitivities and precisions must be >= 0")
        if not self.label:
            self.label = self.method


def _param_steps(cal: ProbeCalibration):
    p = cal.params
    sd = np.sqrt(np.clip(np.diag(cal.param_covariance), 0, None))
    return 1e-6 * (np.abs(p) + sd) + 1e-12


def _s_r(cal, T, params=None):
    y = cal.predict(T, params)
    return abs(cal.derivative(T, params)) / abs(y)


def relative_sensitivity(cal: ProbeCalibration, T: float) -> tuple[float, float]:
    """S_r = |dy/dT| / |y| from the fitted curve, with its 1-sigma uncertainty.

    The uncertainty propagates the parameter covariance through a central
    difference gradient of S_r with respect to the parameters.
    """
    if not cal.in_range(T):
        raise OutOfRangeError(f"T = {T} K outside calibration range {cal.valid_range}")
    y = float(cal.predict(T))
    if y == 0.0:
        raise SingularProbeError(f"calibration vanishes at T = {T} K")
    s = float(_s_r(cal, T))
    h = _param_steps(cal)
    grad = np.empty(cal.params.size)
    for i in range(cal.params.size):
        up, dn = cal.params.copy(), cal.params.copy()
        up[i] += h[i]
        dn[i] -= h[i]
        grad[i] = (_s_r(cal, T, up) - _s_r(cal, T, dn)) / (2 * h[i])
    var = float(grad @ cal.param_covariance @ grad)
    return s, float(np.sqrt(max(var, 0.0)))


def temperature_precision(S_r: float, rel_noise: float) -> float:
    """delta_T = |delta_y / y| / S_r."""
    if not S_r > 0:
        raise DomainError("relative sensitivity must be positive")
    return abs(rel_noise) / S_r


def profile_from_calibration(
    cal: ProbeCalibration,
    T_grid,
    rel_noise,
    integration_time: float = 0.0,
    method: str | None = None,
    label: str = "",
    valid=None,
) -> SensitivityProfile:
    T_grid = np.asarray(T_grid, dtype=float)
    rel_noise = np.broadcast_to(np.asarray(rel_noise, dtype=float), T_grid.shape)
    s = np.zeros_like(T_grid)
    ss = np.zeros_like(T_grid)
    ok = np.ones(T_grid.size, dtype=bool) if valid is None else np.array(valid, dtype=bool)
    for i, T in enumerate(T_grid):
        if not cal.in_range(T):
            ok[i] = False
            continue
        s[i], ss[i] = relative_sensitivity(cal, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        dT = np.where(s > 0, np.abs(rel_noise) / s, np.inf)
        dTs = np.where(s > 0, dT * ss / s, np.inf)
    ok &= np.isfinite(dT)
    dT = np.where(ok, dT, 0.0)
    dTs = np.where(ok, dTs, 0.0)
    return SensitivityProfile(
        method or cal.method or "quench", T_grid, s, dT, integration_time, ss, dTs, ok, label
    )


@dataclass
class ComparisonResult:
    T_grid: np.ndarray
    best: list  # label of the winning profile per T, None where no probe is valid
    best_delta_T: np.ndarray
    regimes: list = field(default_factory=list)  # (label, T_start, T_end)

    def winner_at(self, T: float):
        i = int(np.argmin(np.abs(self.T_grid - T)))
        return self.best[i]


def _delta_T_at(p: SensitivityProfile, T: float) -> float | None:
    g, ok = p.T_grid, p.valid
    if not np.any(ok):
        return None
    gv, dv = g[ok], p.delta_T[ok]
    if T < gv.min() or T > gv.max():
        return None
    hit = np.isclose(gv, T, rtol=0, atol=1e-9)
    if np.any(hit):
        return float(dv[hit][0])
    # only interpolate between valid neighbours that are adjacent on the grid
    j = int(np.searchsorted(g, T))
    if not (ok[j - 1] and ok[j]):
        return None
    x0, x1 = g[j - 1], g[j]
    d0, d1 = p.delta_T[j - 1], p.delta_T[j]
    w = (T - x0) / (x1 - x0)
    if d0 > 0 and d1 > 0:
        return float(np.exp((1 - w) * np.log(d0) + w * np.log(d1)))
    return float((1 - w) * d0 + w * d1)


def compare_probes(profiles) -> ComparisonResult:
    """Best (smallest delta_T) valid probe per temperature and its regimes.

    Ties go to the earlier method in METHODS, then to the label in sort order.
    """
    profiles = list(profiles)
    if not profiles:
        raise DomainError("compare_probes needs at least one profile")
    grid = np.unique(np.concatenate([p.T_grid for p in profiles]))
    order = sorted(range(len(profiles)), key=lambda i: (METHODS.index(profiles[i].method), profiles[i].label))
    best, best_dt = [], np.full(grid.size, np.nan)
    for k, T in enumerate(grid):
        winner = None
        for i in order:
            d = _delta_T_at(profiles[i], T)
            if d is None:
                continue
            if winner is None or d < best_dt[k]:
                winner, best_dt[k] = profiles[i].label, d
        best.append(winner)
    regimes = []
    for k, lab in enumerate(best):
        if lab is None:
            continue
        if regimes and regimes[-1][0] == lab and best[k - 1] == lab:
            regimes[-1][2] = float(grid[k])
        else:
            regimes.append([lab, float(grid[k]), float(grid[k])])
    return ComparisonResult(grid, best, best_dt, [tuple(r) for r in regimes])
