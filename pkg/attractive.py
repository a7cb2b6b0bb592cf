"""
attractive.py
-------------
Attractive (k = -1) reduced system

    w' = -nu*w - (1 - c*s),    s' = w.

Around the saddle (0, 1/c) the Lyapunov coordinates
    L_s = w - lambda_s*(s - 1/c),   L_u = w - lambda_u*(s - 1/c)
evolve as L_s(t) = L_s(0)*exp(lambda_u*t) and L_u(t) = L_u(0)*exp(lambda_s*t),
which gives the exact constant-background solution and the variable-background
thresholds: {L_s^- >= 0} is subcritical, {L_s^+ < 0} supercritical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from core import (
    INDETERMINATE, SUBCRITICAL, SUPERCRITICAL,
    InvalidInput, Params, PhasePoint, Verdict, validate_params, validate_point,
)
from thresholds import DEFAULT_TOL, SweepGrid, sweep_with


@dataclass(frozen=True)
class EigenData:
    lambda_s: float
    lambda_u: float
    X_s: Tuple[float, float]
    X_u: Tuple[float, float]


def eigensystem(nu: float, c_bar: float) -> EigenData:
    if not (c_bar > 0 and nu >= 0):
        raise InvalidInput(f"eigensystem needs c_bar > 0 and nu >= 0 (got {c_bar}, {nu})")
    disc = math.sqrt(nu * nu + 4.0 * c_bar)
    lam_s = -(nu + disc) / 2.0
    lam_u = 2.0 * c_bar / (nu + disc)
    return EigenData(lam_s, lam_u, (lam_s, 1.0), (lam_u, 1.0))


def lyapunov_coordinates(w, s, eig: EigenData, c_bar: float):
    ds = np.asarray(s, dtype=float) - 1.0 / c_bar
    return w - eig.lambda_s * ds, w - eig.lambda_u * ds


def exact_attractive_path(point: PhasePoint, nu: float, c_bar: float, t):
    """Exact (w(t), s(t)) arrays for constant background."""
    eig = eigensystem(nu, c_bar)
    L_s0, L_u0 = lyapunov_coordinates(point.w, point.s, eig, c_bar)
    t = np.asarray(t, dtype=float)
    grow = L_s0 * np.exp(eig.lambda_u * t)
    decay = L_u0 * np.exp(eig.lambda_s * t)
    gap = eig.lambda_u - eig.lambda_s
    s = 1.0 / c_bar + (grow - decay) / gap
    w = (eig.lambda_u * grow - eig.lambda_s * decay) / gap
    return w, s


def exact_attractive_solution(point: PhasePoint, nu: float, c_bar: float, t: float) -> PhasePoint:
    w, s = exact_attractive_path(point, nu, c_bar, t)
    return PhasePoint(float(w), float(s))


def attractive_blowup_time(point: PhasePoint, nu: float, c_bar: float,
                           t_max: float = 1e3) -> Optional[float]:
    """First zero of the exact s(t), or None when L_s(0) >= 0 (s stays positive)."""
    validate_point(point)
    eig = eigensystem(nu, c_bar)
    L_s0, _ = lyapunov_coordinates(point.w, point.s, eig, c_bar)
    if L_s0 >= 0:
        return None
    s_of = lambda t: float(exact_attractive_path(point, nu, c_bar, t)[1])
    t_hi = 1.0
    while s_of(t_hi) > 0:
        t_hi *= 2.0
        if t_hi > t_max:
            return None
    grid = np.linspace(0.0, t_hi, 2001)
    values = exact_attractive_path(point, nu, c_bar, grid)[1]
    j = int(np.argmax(values <= 0))
    return brentq(s_of, grid[j - 1], grid[j], xtol=1e-14)


def classify_attractive_many(w, s, params: Params, tol: float = DEFAULT_TOL):
    validate_params(params)
    if params.k != -1:
        raise InvalidInput("attractive classification needs k=-1")
    w = np.atleast_1d(np.asarray(w, float))
    s = np.atleast_1d(np.asarray(s, float))
    if np.any(s <= 0):
        raise InvalidInput("reciprocal density must be positive")
    L_minus, _ = lyapunov_coordinates(w, s, eigensystem(params.nu, params.c_minus), params.c_minus)
    L_plus, _ = lyapunov_coordinates(w, s, eigensystem(params.nu, params.c_plus), params.c_plus)

    labels = np.full(w.shape, INDETERMINATE, dtype=object)
    tags = np.full(w.shape, "none", dtype=object)
    margins = np.where(np.abs(L_minus) < np.abs(L_plus), L_minus, L_plus)

    sub = L_minus >= 0
    sup = ~sub & (L_plus < -tol)
    labels[sub] = SUBCRITICAL
    tags[sub] = np.where(L_minus[sub] <= tol, "attractive-borderline", "attractive-sub")
    margins[sub] = L_minus[sub]
    labels[sup] = SUPERCRITICAL
    tags[sup] = "attractive-sup"
    margins[sup] = L_plus[sup]
    return labels, margins, tags


def classify_attractive(point: PhasePoint, params: Params, tol: float = DEFAULT_TOL) -> Verdict:
    validate_point(point)
    labels, margins, tags = classify_attractive_many([point.w], [point.s], params, tol)
    return Verdict(str(labels[0]), float(margins[0]), str(tags[0]))


def sweep_attractive(grid: SweepGrid, params: Params, tol: float = DEFAULT_TOL,
                     jobs: int = 1) -> pd.DataFrame:
    return sweep_with(partial(_classify_for_sweep, params=params), grid, tol, jobs)


def _classify_for_sweep(w, s, tol, params):
    return classify_attractive_many(w, s, params, tol)


@dataclass(frozen=True)
class BorderlineReport:
    is_borderline: bool
    max_residual: float

    def to_dict(self) -> dict:
        return {"is_borderline": self.is_borderline, "max_residual": self.max_residual}


def borderline_check(rho0_samples, du0_samples, nu: float, c_minus: float,
                     tol: float = 1e-10) -> BorderlineReport:
    """Residual of lambda_u^- * u0' = rho0 - c- over the sampled grid."""
    rho0 = np.asarray(rho0_samples, dtype=float)
    du0 = np.asarray(du0_samples, dtype=float)
    if rho0.shape != du0.shape:
        raise InvalidInput("mismatched grids")
    lam_u = eigensystem(nu, c_minus).lambda_u
    residual = float(np.max(np.abs(lam_u * du0 - (rho0 - c_minus)))) if rho0.size else 0.0
    return BorderlineReport(residual <= tol, residual)
