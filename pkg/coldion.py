"""
coldion.py
----------
Damped cold-ion Euler-Poisson with Maxwell-Boltzmann electrons:

    -phi_xx = rho - exp(phi),    (rho, u) -> (1, 0) as |x| -> infinity.

The total energy H = int(rho*u^2/2 + phi_x^2/2 + U(phi)) bounds the potential,
c- <= exp(phi) <= c+ with c(+/-) = exp(V(+/-)^{-1}(H)), which turns the ion
problem into a variable-background one that the threshold classifier handles.

Usage:
    setup = ColdIonSetup.gaussian(half_width=20, points=801, rho_amp=0.05, u_amp=0.05, nu=0.5)
    report = global_regularity_check(setup)
    print(report.verdict, report.c_minus, report.c_plus)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad, trapezoid
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from core import SUBCRITICAL, InvalidInput, NumericalFailure, Params
from thresholds import ClosingReport, classifier_for, closing_condition

logger = logging.getLogger(__name__)

FAR_FIELD_TOL = 1e-6
POISSON_TOL = 1e-10
NEWTON_MAX_ITER = 50
SERIES_RADIUS = 1e-2


@dataclass(frozen=True, eq=False)
class ColdIonSetup:
    x: np.ndarray
    rho0: np.ndarray
    u0: np.ndarray
    nu: float
    du0: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise InvalidInput("grid needs at least 3 points")
        if np.asarray(self.rho0).shape != x.shape or np.asarray(self.u0).shape != x.shape:
            raise InvalidInput("rho0 and u0 must be sampled on the grid")
        steps = np.diff(x)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise InvalidInput("grid must be uniform and increasing")
        if not self.nu >= 0:
            raise InvalidInput(f"damping must be nonnegative, got nu={self.nu}")
        rho0 = np.asarray(self.rho0, dtype=float)
        u0 = np.asarray(self.u0, dtype=float)
        if np.any(rho0 <= 0):
            raise InvalidInput("initial density must be positive")
        if max(abs(rho0[0] - 1), abs(rho0[-1] - 1), abs(u0[0]), abs(u0[-1])) >= FAR_FIELD_TOL:
            raise InvalidInput("datum does not reach the far-field state (1, 0) at the grid ends")

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def velocity_gradient(self) -> np.ndarray:
        if self.du0 is not None:
            return np.asarray(self.du0, dtype=float)
        return np.gradient(np.asarray(self.u0, dtype=float), self.h, edge_order=2)

    @classmethod
    def gaussian(cls, half_width: float, points: int, rho_amp: float, u_amp: float,
                 nu: float, width: float = 1.0) -> "ColdIonSetup":
        """rho0 = 1 + rho_amp*exp(-x^2/width^2), u0 = u_amp*exp(-x^2/width^2)."""
        x = np.linspace(-half_width, half_width, points)
        bump = np.exp(-np.square(x) / width ** 2)
        return cls(x=x, rho0=1.0 + rho_amp * bump, u0=u_amp * bump, nu=nu,
                   du0=-2.0 * x / width ** 2 * u_amp * bump)

    def to_dict(self) -> dict:
        return {"half_width": float(self.x[-1]), "points": int(self.x.size), "nu": self.nu,
                "rho0_max": float(np.max(self.rho0)), "rho0_min": float(np.min(self.rho0)),
                "u0_max_abs": float(np.max(np.abs(self.u0)))}


# --- U, V and their inverses ------------------------------------------------

def U_eval(r):
    """(r - 1)e^r + 1, with its Taylor series near 0 to avoid cancellation."""
    r = np.asarray(r, dtype=float)
    direct = (r - 1.0) * np.exp(r) + 1.0
    series = np.zeros_like(r)
    term = np.ones_like(r)
    for n in range(1, 8):
        term = term * r / n
        series = series + (n - 1) * term
    out = np.where(np.abs(r) < SERIES_RADIUS, series, direct)
    return float(out) if out.ndim == 0 else out


def _speed(r: float) -> float:
    return math.sqrt(2.0 * max(U_eval(r), 0.0))


def V_eval(z: float) -> float:
    """Integral of sqrt(2U) between 0 and z; nonnegative on both half-lines."""
    if z == 0.0:
        return 0.0
    value, _ = quad(_speed, min(0.0, z), max(0.0, z), epsabs=1e-14, epsrel=1e-12, limit=200)
    return value


def V_inverse(branch: str, x: float) -> float:
    """z with V(z) = x on the requested half-line (z >= 0 for plus, z <= 0 for minus)."""
    if branch not in ("plus", "minus"):
        raise InvalidInput(f"unknown branch: {branch}")
    if x < 0:
        raise InvalidInput("energy level must be nonnegative")
    if x == 0:
        return 0.0
    sign = 1.0 if branch == "plus" else -1.0
    hi = max(math.sqrt(2.0 * x), 1e-8)
    while V_eval(sign * hi) < x:
        hi *= 2.0
    z = sign * brentq(lambda a: V_eval(sign * a) - x, 0.0, hi, xtol=1e-15, rtol=1e-15)
    for _ in range(3):
        slope = sign * _speed(z)
        if slope == 0.0:
            break
        z -= (V_eval(z) - x) / slope
    return z


def potential_bounds(H0: float) -> Tuple[float, float]:
    if H0 < 0:
        raise InvalidInput("energy must be nonnegative")
    return math.exp(V_inverse("minus", H0)), math.exp(V_inverse("plus", H0))


# --- Poisson ----------------------------------------------------------------

def _poisson_residual(phi: np.ndarray, rho: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate(([0.0], phi, [0.0]))
    lap = (padded[:-2] - 2.0 * padded[1:-1] + padded[2:]) / (h * h)
    return -lap + np.exp(phi) - rho


def _tridiagonal(diag: np.ndarray, h: float) -> np.ndarray:
    ab = np.empty((3, diag.size))
    ab[0, :] = -1.0 / (h * h)
    ab[1, :] = diag
    ab[2, :] = -1.0 / (h * h)
    return ab


def solve_poisson_MB(rho, h: float, tol: float = POISSON_TOL) -> np.ndarray:
    """Potential phi with phi(+-L) = 0 solving -phi'' + e^phi = rho on a uniform grid.

    Damped Newton from phi = 0; each step halves until the residual max-norm decreases.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise InvalidInput("density must be positive")
    inner = rho[1:-1]
    phi = np.zeros_like(inner)
    res = _poisson_residual(phi, inner, h)
    norm = float(np.max(np.abs(res))) if res.size else 0.0

    for it in range(NEWTON_MAX_ITER):
        if norm <= tol:
            return np.concatenate(([0.0], phi, [0.0]))
        step = solve_banded((1, 1), _tridiagonal(2.0 / (h * h) + np.exp(phi), h), -res)
        lam = 1.0
        while True:
            trial = phi + lam * step
            trial_res = _poisson_residual(trial, inner, h)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < norm or lam < 1e-6:
                break
            lam *= 0.5
        phi, res, norm = trial, trial_res, trial_norm
        logger.debug(f"Newton iteration {it + 1}: residual {norm:.3e}, step {lam:g}")

    if norm <= tol:
        return np.concatenate(([0.0], phi, [0.0]))
    raise NumericalFailure(f"Newton stalled (residual {norm:.3e} after {NEWTON_MAX_ITER} iterations)")


def linearized_potential(rho, h: float) -> np.ndarray:
    """Solution of the linearized problem (-d^2/dx^2 + 1) phi = rho - 1."""
    rho = np.asarray(rho, dtype=float)
    inner = solve_banded((1, 1), _tridiagonal(np.full(rho.size - 2, 2.0 / (h * h) + 1.0), h),
                         rho[1:-1] - 1.0)
    return np.concatenate(([0.0], inner, [0.0]))


# --- energy and regularity ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnergyReport:
    H: float
    kinetic: float
    field: float
    internal: float
    c_minus: float
    c_plus: float
    phi: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {"H": self.H, "kinetic": self.kinetic, "field": self.field,
                "internal": self.internal, "c_minus": self.c_minus, "c_plus": self.c_plus}


def energy(setup: ColdIonSetup) -> EnergyReport:
    rho0 = np.asarray(setup.rho0, dtype=float)
    u0 = np.asarray(setup.u0, dtype=float)
    phi = solve_poisson_MB(rho0, setup.h)
    dphi = np.gradient(phi, setup.h, edge_order=2)
    kinetic = float(trapezoid(0.5 * rho0 * u0 ** 2, setup.x))
    field_part = float(trapezoid(0.5 * dphi ** 2, setup.x))
    internal = float(trapezoid(U_eval(phi), setup.x))
    H = kinetic + field_part + internal
    c_minus, c_plus = potential_bounds(H)
    logger.info(f"energy H={H:.6e} (kinetic {kinetic:.3e}, field {field_part:.3e}, "
                f"internal {internal:.3e}); potential bounds [{c_minus:.6f}, {c_plus:.6f}]")
    return EnergyReport(H, kinetic, field_part, internal, c_minus, c_plus, phi)


@dataclass(frozen=True)
class RegularityReport:
    verdict: str
    H0: float
    c_minus: float
    c_plus: float
    closing: ClosingReport
    points: int
    failing: List[dict]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "H0": self.H0, "c_minus": self.c_minus,
                "c_plus": self.c_plus, "closing": self.closing.to_dict(),
                "points": self.points, "failing": self.failing}


def global_regularity_check(setup: ColdIonSetup, tol: float = 1e-6) -> RegularityReport:
    """'global' when the closing condition holds and every (u0'/rho0, 1/rho0) is subcritical."""
    report = energy(setup)
    params = Params(nu=setup.nu, k=1, c_minus=report.c_minus, c_plus=report.c_plus)
    closing = closing_condition(params)
    rho0 = np.asarray(setup.rho0, dtype=float)
    w = setup.velocity_gradient() / rho0
    s = 1.0 / rho0

    failing: List[dict] = []
    if closing.holds:
        labels, margins, _ = classifier_for(params, float(s.max())).classify_many(w, s, tol)
        for i in np.flatnonzero(labels != SUBCRITICAL):
            failing.append({"x": float(setup.x[i]), "w": float(w[i]), "s": float(s[i]),
                            "verdict": str(labels[i]), "margin": float(margins[i])})
    else:
        logger.info(f"closing condition fails for nu={setup.nu}, c-={report.c_minus:.6f}, "
                    f"c+={report.c_plus:.6f}")
    verdict = "global" if closing.holds and not failing else "not guaranteed"
    return RegularityReport(verdict, report.H, report.c_minus, report.c_plus, closing,
                            int(rho0.size), failing)


def damping_requirement(H0: float) -> float:
    """Smallest nu with pi*nu/sqrt(4c+ - nu^2) >= 2(c+/c- - 1) for the bounds of H0."""
    c_minus, c_plus = potential_bounds(H0)
    delta = 2.0 * (c_plus / c_minus - 1.0)
    return 2.0 * math.sqrt(c_plus) * delta / math.sqrt(math.pi ** 2 + delta ** 2)


def breakdown_display_check(rho0, du0, c_minus: float, c_plus: float) -> np.ndarray:
    """True where -sqrt(2rho0 - c-) < u0' < sqrt(2rho0 - c+ + 4/c- (c+/c- - 1) rho0^2) fails."""
    rho0 = np.asarray(rho0, dtype=float)
    du0 = np.asarray(du0, dtype=float)
    low_arg = 2.0 * rho0 - c_minus
    high_arg = 2.0 * rho0 - c_plus + 4.0 / c_minus * (c_plus / c_minus - 1.0) * rho0 ** 2
    inside = ((low_arg > 0) & (high_arg > 0)
              & (du0 > -np.sqrt(np.maximum(low_arg, 0.0)))
              & (du0 < np.sqrt(np.maximum(high_arg, 0.0))))
    return ~inside


def potential_frame(setup: ColdIonSetup, report: EnergyReport) -> pd.DataFrame:
    return pd.DataFrame({"x": setup.x, "rho0": setup.rho0, "u0": setup.u0, "phi": report.phi})
