"""Weighted nonlinear least squares by damped Gauss-Newton (Levenberg-Marquardt)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConvergenceError, FitDegeneracyError


@dataclass
class LeastSquaresResult:
    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    n_iter: int
    converged: bool


def weighted_covariance(jac: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Inverse of J^T W J with W = 1/sigma^2."""
    jw = jac / sigma[:, None]
    normal = jw.T @ jw
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise FitDegeneracyError("singular normal equations") from exc
    if not np.all(np.isfinite(cov)) or np.linalg.cond(normal) > 1e15:
        raise FitDegeneracyError("singular normal equations")
    return 0.5 * (cov + cov.T)


def levenberg_marquardt(
    model: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0,
    y,
    sigma,
    *,
    max_iter: int = 200,
    xtol: float = 1e-8,
    ftol: float = 1e-10,
    feasible: Callable[[np.ndarray], bool] | None = None,
) -> LeastSquaresResult:
    """Minimize sum(((y - model(p)) / sigma)**2).

    Converged when the relative parameter step drops below ``xtol`` or an
    accepted step changes chi^2 by less than ``ftol``. ``feasible`` may veto
    trial points (e.g. negative widths); vetoed steps raise the damping.
    """
    p = np.asarray(p0, dtype=float).copy()
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    r = (y - model(p)) / sigma
    chi2 = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jw = jacobian(p) / sigma[:, None]
        g = jw.T @ r
        a = jw.T @ jw
        d = np.diag(a).copy()
        d[d == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(a + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                if lam > 1e16:
                    raise FitDegeneracyError("singular normal equations")
                continue
            trial = p + step
            ok = np.all(np.isfinite(trial)) and (feasible is None or feasible(trial))
            if ok:
                r_t = (y - model(trial)) / sigma
                chi2_t = float(r_t @ r_t)
                ok = np.isfinite(chi2_t) and chi2_t <= chi2
            if ok:
                break
            lam *= 10.0
            if lam > 1e16:
                # no downhill step left: we sit at the minimum to machine precision
                return LeastSquaresResult(p, weighted_covariance(jacobian(p), sigma), chi2, it, True)
        rel_step = np.max(np.abs(step) / np.maximum(np.abs(trial), 1e-12))
        dchi2 = chi2 - chi2_t
        p, r, chi2 = trial, r_t, chi2_t
        heavily_damped = lam > 1.0
        lam = max(lam / 10.0, 1e-12)
        if dchi2 < ftol * max(1.0, chi2) or (rel_step < xtol and not heavily_damped):
            return LeastSquaresResult(p, weighted_covariance(jacobian(p), sigma), chi2, it, True)
    raise ConvergenceError(f"no convergence within {max_iter} iterations", last=p)
