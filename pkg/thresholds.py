"""
thresholds.py
-------------
Threshold curves for the repulsive reduced system

    w' = -nu*w + 1 - c(t)*s,    s' = w,

and classification of phase points (w, s) into sub/super-critical regions.

A P-curve g = sqrt(2P) solves g*g' = nu*g + 1 - c1*s with P(0) = 0; an
N-curve g = sqrt(2N) solves g*g' = -nu*g + 1 - c2*s with N(s_star) = 0.
Both are traced as constant-background trajectories of the reduced system
run backward in time from their anchor, so ds = g*dtau along the curve and
the square-root behaviour at g = 0 never enters the integrator. The traced
points are tabulated as G = g**2 with a cubic Hermite spline whose slopes
come from the curve ODE; very close to the anchor a local series is used.

Regions:
    supercritical   outside  -g_{P-}(s) < w < g_{N+}(s),  s_star = s_tilde(c-)
    subcritical     inside   -g_{P+}(s) < w < g_{N-}(s),  s_star = s_plus
The subcritical region exists only when the closing condition holds.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from core import (
    INDETERMINATE, SUBCRITICAL, SUPERCRITICAL,
    InvalidInput, NumericalFailure, Params, PhasePoint, Verdict,
    validate_params, validate_point,
)
from odeint import EventSpec, IntegratorOptions, eval_dense, integrate

logger = logging.getLogger(__name__)

CURVE_OPTIONS = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-13)
CURVE_SAMPLES = 16384
DEFAULT_TOL = 1e-6
DEFAULT_S_LIMIT = 10.0
EXP_CAP = 700.0


# --- closed forms -----------------------------------------------------------

def gamma_exponent(c: float, nu: float) -> Optional[float]:
    """pi*nu/sqrt(4c - nu^2), defined only in the underdamped regime nu < 2*sqrt(c)."""
    if nu >= 2.0 * math.sqrt(c):
        return None
    return math.pi * nu / math.sqrt(4.0 * c - nu * nu)


def _exp(x: float) -> float:
    return math.inf if x > EXP_CAP else math.exp(x)


def s_tilde(c: float, nu: float) -> float:
    """Upper end of Dom(P) for the constant c; infinite when overdamped."""
    g = gamma_exponent(c, nu)
    return math.inf if g is None else (1.0 + _exp(g)) / c


def oscillation_rate(c: float, nu: float) -> float:
    """mu = sqrt(c - nu^2/4)."""
    return math.sqrt(c - nu * nu / 4.0)


def slow_rate(c: float, nu: float) -> float:
    """lambda = (nu - sqrt(nu^2 - 4c))/2 for nu >= 2*sqrt(c)."""
    return (nu - math.sqrt(max(nu * nu - 4.0 * c, 0.0))) / 2.0


def overdamped_integral_bound(s0: float, c_bar: float, nu: float) -> float:
    """Upper bound (log(lambda*s0) v 2)/lambda for the integral of 1/sqrt(2P) over [0, s0]."""
    if nu < 2.0 * math.sqrt(c_bar):
        raise InvalidInput("overdamped bound needs nu >= 2*sqrt(c_bar)")
    if s0 <= 0:
        raise InvalidInput(f"s0 must be positive, got {s0}")
    lam = slow_rate(c_bar, nu)
    return max(math.log(lam * s0), 2.0) / lam


def undamped_closed_forms(c_minus: float, c_plus: float) -> Tuple[Callable, Callable]:
    """nu = 0 boundary functions of the supercritical region.

    Returns (lower, upper): the region is w <= -lower(s) or w >= upper(s).
    """
    shift = 4.0 / c_minus * (c_plus / c_minus - 1.0)

    def lower(s):
        return np.sqrt(np.maximum(s * (2.0 - c_minus * s), 0.0))

    def upper(s):
        return np.sqrt(np.maximum(s * (2.0 - c_plus * s) + shift, 0.0))

    return lower, upper


def legacy_supercritical(point: PhasePoint, c_minus: float) -> bool:
    """Earlier undamped blow-up criteria: s >= 2/c- or w + sqrt(2s) <= 0."""
    return point.s >= 2.0 / c_minus or point.w + math.sqrt(2.0 * point.s) <= 0.0


# --- curves -----------------------------------------------------------------

def _anchor_series(dist, b: float, nu: float, c: float):
    """Two-term expansion of g at a zero where dP/d(dist) = b + nu*g - c*dist."""
    dist = np.maximum(dist, 0.0)
    root = np.sqrt(dist)
    return np.sqrt(2.0 * b * dist) * (
        1.0 + (math.sqrt(2.0) / 3.0) * nu / math.sqrt(b) * root
        + (nu * nu / 18.0 - c / 4.0) / b * dist
    )


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    branch: str
    c_param: float
    nu: float
    anchor: float
    domain: Tuple[float, float]
    s: np.ndarray
    g: np.ndarray
    tau: np.ndarray
    closed: bool
    spline: CubicHermiteSpline = field(repr=False, compare=False)
    switch_radius: float = 0.0

    @property
    def s_lo(self) -> float:
        return self.domain[0]

    @property
    def s_hi(self) -> float:
        return self.domain[1]

    @property
    def traversal_time(self) -> float:
        return float(self.tau[-1] if self.branch == "P" else self.tau[0])

    def contains(self, s) -> bool:
        s = np.asarray(s)
        return bool(np.all((s >= self.s_lo) & (s <= self.s_hi)))

    def rhs(self, s, g):
        """Right-hand side of g*g' for this branch."""
        sign = 1.0 if self.branch == "P" else -1.0
        return sign * self.nu * g + 1.0 - self.c_param * s

    def evaluate(self, s):
        """g(s) on the curve domain; scalar in, scalar out."""
        s_arr = np.asarray(s, dtype=float)
        if not self.contains(s_arr):
            raise InvalidInput(f"s outside curve domain [{self.s_lo}, {self.s_hi}]")
        g = np.sqrt(np.maximum(self.spline(s_arr), 0.0))
        if self.branch == "P":
            near = s_arr < self.switch_radius
            if np.any(near):
                g = np.where(near, _anchor_series(s_arr, 1.0, self.nu, self.c_param), g)
        else:
            near = s_arr > self.anchor - self.switch_radius
            if np.any(near):
                b = self.c_param * self.anchor - 1.0
                g = np.where(near, _anchor_series(self.anchor - s_arr, b, self.nu, self.c_param), g)
        return float(g) if g.ndim == 0 else g


def _reversed_field(c: float, nu: float):
    def f(t, y):
        return np.array([nu * y[0] - 1.0 + c * y[1], -y[0]])
    return f


def _trace_horizon(c: float, nu: float) -> float:
    if nu < 2.0 * math.sqrt(c):
        return 1.5 * math.pi / oscillation_rate(c, nu) + 1.0
    return 50.0 / slow_rate(c, nu) + 50.0


def _tabulate(branch, c, nu, anchor, traj, closed, lo_override=None) -> ThresholdCurve:
    T = traj.t_end
    k = np.arange(CURVE_SAMPLES + 1)
    tau = 0.5 * T * (1.0 - np.cos(np.pi * k / CURVE_SAMPLES))
    tau[-1] = T
    states = eval_dense(traj, tau)
    w, s = states[:, 0], states[:, 1]
    g = np.abs(w)
    g[0] = 0.0
    s[0] = anchor
    if closed:
        g[-1] = 0.0
    if lo_override is not None:
        s[-1] = lo_override
    if branch == "N":
        s, g, tau = s[::-1], g[::-1], tau[::-1]

    # kept samples strictly increase in s
    floor = 1e-14 * max(1.0, abs(s[-1]))
    keep = np.concatenate(([True], s[1:] > np.maximum.accumulate(s)[:-1] + floor))
    keep[:-1] &= s[:-1] < s[-1] - floor
    keep[-1] = True
    s, g, tau = s[keep], g[keep], tau[keep]
    sign = 1.0 if branch == "P" else -1.0
    dG = 2.0 * (sign * nu * g + 1.0 - c * s)
    spline = CubicHermiteSpline(s, g * g, dG)
    for arr in (s, g, tau):
        arr.setflags(write=False)
    return ThresholdCurve(
        branch=branch, c_param=c, nu=nu, anchor=anchor,
        domain=(float(s[0]), float(s[-1])), s=s, g=g, tau=tau, closed=closed,
        spline=spline, switch_radius=1e-6 * max(1.0, 1.0 / c),
    )


@lru_cache(maxsize=128)
def solve_P(c1: float, nu: float, s_max: float) -> ThresholdCurve:
    """P-curve on Dom(P) intersected with [0, s_max]."""
    if not (c1 > 0 and nu >= 0 and s_max > 0):
        raise InvalidInput(f"solve_P needs c1 > 0, nu >= 0, s_max > 0 (got {c1}, {nu}, {s_max})")
    events = [
        EventSpec("return", lambda t, y: y[0], "increasing"),
        EventSpec("cap", lambda t, y: y[1] - s_max, "increasing"),
    ]
    traj = integrate(_reversed_field(c1, nu), [0.0, 0.0], 0.0, _trace_horizon(c1, nu),
                     CURVE_OPTIONS, events)
    if traj.event is None:
        raise NumericalFailure("P-curve did not reach the end of its domain")
    closed = traj.event.id == "return"
    curve = _tabulate("P", c1, nu, 0.0, traj, closed,
                      lo_override=None if closed else s_max)
    logger.debug(f"P-curve c={c1:g} nu={nu:g} on [0, {curve.s_hi:.10g}] "
                 f"({'closed' if closed else 'capped'}, {len(curve.s)} samples)")
    return curve


@lru_cache(maxsize=128)
def solve_N(c2: float, nu: float, s_star: float) -> ThresholdCurve:
    """N-curve from s_star back down to max(s_star_star, 0)."""
    if not (c2 > 0 and nu >= 0):
        raise InvalidInput(f"solve_N needs c2 > 0 and nu >= 0 (got {c2}, {nu})")
    if not s_star > 1.0 / c2:
        raise InvalidInput(f"s_star must exceed 1/c2 = {1.0 / c2}, got {s_star}")
    events = [
        EventSpec("return", lambda t, y: y[0], "decreasing"),
        EventSpec("axis", lambda t, y: y[1], "decreasing"),
    ]
    traj = integrate(_reversed_field(c2, nu), [0.0, s_star], 0.0, _trace_horizon(c2, nu),
                     CURVE_OPTIONS, events)
    if traj.event is None:
        raise NumericalFailure("N-curve did not reach the end of its domain")
    closed = traj.event.id == "return"
    curve = _tabulate("N", c2, nu, s_star, traj, closed,
                      lo_override=None if closed else 0.0)
    logger.debug(f"N-curve c={c2:g} nu={nu:g} on [{curve.s_lo:.10g}, {s_star:.10g}]")
    return curve


def ode_residual(curve: ThresholdCurve) -> float:
    """Max |g*g' - rhs| over interior samples.

    Differences are taken along the trace parameter tau, where ds/dtau = +-g, so
    g*g' = +-dg/dtau. Differencing in s directly cancels digits next to a
    turning point, where neighbouring samples agree to ~1e-13. The second
    term checks the parametrization itself, |ds/dtau -+ g|.
    """
    if curve.s.size <= 2:
        return 0.0
    sign = 1.0 if curve.branch == "P" else -1.0
    gg = sign * np.gradient(curve.g, curve.tau)
    speed = sign * np.gradient(curve.s, curve.tau)
    res = np.maximum(np.abs(gg - curve.rhs(curve.s, curve.g)), np.abs(speed - curve.g))
    return float(res[1:-1].max())


def inverse_speed_integral(curve: ThresholdCurve, a: float, b: float) -> float:
    """Integral of ds/g(s) over [a, b] with square-root substitutions at both ends."""
    if not curve.contains([a, b]) or b < a:
        raise InvalidInput(f"[{a}, {b}] is not inside the curve domain")
    if b == a:
        return 0.0
    m = 0.5 * (a + b)

    def left(u):
        return 2.0 * u / curve.evaluate(a + u * u)

    def right(v):
        return 2.0 * v / curve.evaluate(b - v * v)

    opts = dict(limit=200, epsabs=1e-13, epsrel=1e-11)
    lval, _ = quad(left, 0.0, math.sqrt(m - a), **opts)
    rval, _ = quad(right, 0.0, math.sqrt(b - m), **opts)
    return lval + rval


# --- domains and closing condition ------------------------------------------

@dataclass(frozen=True)
class DomainReport:
    s_tilde: Optional[float]
    s_star: float
    s_star_star: Optional[float]
    gamma1: Optional[float]
    gamma2: Optional[float]
    regime_P: str
    regime_N: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def domain_endpoints(c1: float, c2: float, nu: float, s_star: float) -> DomainReport:
    if not (c1 > 0 and c2 > 0 and nu >= 0):
        raise InvalidInput("domain_endpoints needs c1, c2 > 0 and nu >= 0")
    if not s_star > 1.0 / c2:
        raise InvalidInput(f"s_star must exceed 1/c2 = {1.0 / c2}, got {s_star}")
    g1 = gamma_exponent(c1, nu)
    g2 = gamma_exponent(c2, nu)
    return DomainReport(
        s_tilde=None if g1 is None else (1.0 + _exp(g1)) / c1,
        s_star=s_star,
        s_star_star=None if g2 is None else 1.0 / c2 - (s_star - 1.0 / c2) * _exp(g2),
        gamma1=g1,
        gamma2=g2,
        regime_P="unbounded" if g1 is None else "bounded",
        regime_N="unbounded" if g2 is None else "bounded",
    )


@dataclass(frozen=True)
class ClosingReport:
    holds: bool
    case_tag: str
    s_plus: Optional[float]
    s_star_star: Optional[float]
    sign_test: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def closing_condition(params: Params) -> ClosingReport:
    """Case analysis for s** <= 0 with (c1, c2) = (c+, c-) and s_star = s_plus."""
    validate_params(params)
    if params.k != 1:
        raise InvalidInput("closing condition applies to the repulsive system (k=+1)")
    cm, cp, nu = params.c_minus, params.c_plus, params.nu

    if nu >= 2.0 * math.sqrt(cp):
        return ClosingReport(True, "rep-#1", None, None, True)

    s_plus = s_tilde(cp, nu)
    if nu >= 2.0 * math.sqrt(cm):
        holds = s_plus * cm > 1.0
        tag = "rep-#2.1"
    else:
        holds = _exp(gamma_exponent(cm, nu)) * (s_plus * cm - 1.0) >= 1.0
        tag = "rep-#2.2"

    if s_plus * cm > 1.0:
        s_ss = domain_endpoints(cp, cm, nu, s_plus).s_star_star
        sign_test = s_ss is None or s_ss <= 0.0
    else:
        s_ss, sign_test = None, False
    return ClosingReport(holds, tag if holds else "none", s_plus, s_ss, sign_test)


def lyapunov_eval(curve: ThresholdCurve, point: PhasePoint) -> float:
    """w + g(s) on a P-curve, w - g(s) on an N-curve."""
    g = curve.evaluate(point.s)
    return point.w + g if curve.branch == "P" else point.w - g


# --- classification ---------------------------------------------------------

class RegionClassifier:
    """Curves for both constructions built once and shared by many queries."""

    def __init__(self, params: Params, s_limit: float = DEFAULT_S_LIMIT):
        validate_params(params)
        if params.k != 1:
            raise InvalidInput("region classification by P/N curves needs k=+1")
        self.params = params
        self.s_limit = float(s_limit)
        cm, cp, nu = params.c_minus, params.c_plus, params.nu

        self.sup_star = s_tilde(cm, nu)
        self.sup_P = solve_P(cm, nu, self.s_limit)
        self.sup_N = solve_N(cp, nu, self.sup_star) if math.isfinite(self.sup_star) else None
        self.sup_tag = "rep-sup-#2" if self.sup_N is not None else "rep-sup-#1"

        self.closing = closing_condition(params)
        self.sub_P = self.sub_N = None
        self.sub_star = math.inf
        if self.closing.holds:
            self.sub_star = s_tilde(cp, nu)
            self.sub_P = solve_P(cp, nu, self.s_limit)
            if math.isfinite(self.sub_star):
                self.sub_N = solve_N(cm, nu, self.sub_star)

    def _band_margin(self, P, N, s_star, w, s):
        inside = s < s_star
        if not P.closed and np.any(inside & (s > P.s_hi)):
            raise InvalidInput(f"s beyond the tabulated range {P.s_hi}; raise s_limit")
        s_in = np.where(inside, np.minimum(s, P.s_hi), P.s_lo)
        m = w + P.evaluate(s_in)
        if N is not None:
            m = np.minimum(m, N.evaluate(np.clip(s_in, N.s_lo, N.s_hi)) - w)
        return np.where(inside, m, -np.hypot(w, s - s_star))

    def margin_sup(self, w, s):
        """Positive inside the band around equilibrium, nonpositive on the supercritical set."""
        return self._band_margin(self.sup_P, self.sup_N, self.sup_star,
                                 np.asarray(w, float), np.asarray(s, float))

    def margin_sub(self, w, s):
        if not self.closing.holds:
            raise InvalidInput("no subcritical region: the closing condition fails")
        return self._band_margin(self.sub_P, self.sub_N, self.sub_star,
                                 np.asarray(w, float), np.asarray(s, float))

    def classify_many(self, w, s, tol: float = DEFAULT_TOL):
        w = np.atleast_1d(np.asarray(w, float))
        s = np.atleast_1d(np.asarray(s, float))
        if np.any(s <= 0):
            raise InvalidInput("reciprocal density must be positive")
        m_sup = self.margin_sup(w, s)
        labels = np.full(w.shape, INDETERMINATE, dtype=object)
        tags = np.full(w.shape, "none", dtype=object)
        margins = m_sup.copy()

        sup = m_sup < -tol
        labels[sup] = SUPERCRITICAL
        tags[sup] = self.sup_tag
        if self.closing.holds:
            m_sub = self.margin_sub(w, s)
            sub = ~sup & (m_sub > tol)
            labels[sub] = SUBCRITICAL
            tags[sub] = self.closing.case_tag
            margins[sub] = m_sub[sub]
            rest = ~sup & ~sub
            margins[rest] = np.where(np.abs(m_sub[rest]) < np.abs(m_sup[rest]),
                                     m_sub[rest], m_sup[rest])
        return labels, margins, tags

    def classify(self, point: PhasePoint, tol: float = DEFAULT_TOL) -> Verdict:
        validate_point(point)
        labels, margins, tags = self.classify_many([point.w], [point.s], tol)
        return Verdict(str(labels[0]), float(margins[0]), str(tags[0]))


def classifier_for(params: Params, s: float = 0.0) -> RegionClassifier:
    return RegionClassifier(params, max(DEFAULT_S_LIMIT, 2.0 * s))


def classify_point(point: PhasePoint, params: Params, tol: float = DEFAULT_TOL) -> Verdict:
    validate_point(point)
    return classifier_for(params, point.s).classify(point, tol)


def breakdown_time_bound(point: PhasePoint, params: Params,
                         classifier: Optional[RegionClassifier] = None) -> Optional[float]:
    """Upper bound on the blow-up time of a supercritical start, None otherwise."""
    classifier = classifier or classifier_for(params, point.s)
    if classifier.classify(point).label != SUPERCRITICAL:
        return None
    cm, cp, nu = params.c_minus, params.c_plus, params.nu
    if nu >= 2.0 * math.sqrt(cm):
        return inverse_speed_integral(classifier.sup_P, 0.0, point.s)
    return (math.pi / oscillation_rate(cm, nu) + 0.5 * math.pi / math.sqrt(cm)
            + math.pi / oscillation_rate(cp, nu))


# --- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    w_min: float
    w_max: float
    s_min: float
    s_max: float
    nw: int
    ns: int

    def __post_init__(self):
        if self.nw < 0 or self.ns < 0:
            raise InvalidInput("grid resolution must be nonnegative")
        if not (self.w_max > self.w_min and self.s_max > self.s_min >= 0.0):
            raise InvalidInput("grid ranges must be ordered with s_min >= 0")

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell centres, rows ordered by s then w."""
        dw = (self.w_max - self.w_min) / max(self.nw, 1)
        ds = (self.s_max - self.s_min) / max(self.ns, 1)
        w = self.w_min + (np.arange(self.nw) + 0.5) * dw
        s = self.s_min + (np.arange(self.ns) + 0.5) * ds
        S, W = np.meshgrid(s, w, indexing="ij")
        return W.ravel(), S.ravel()


def sweep_classifier(grid: SweepGrid, params: Params) -> RegionClassifier:
    return RegionClassifier(params, max(DEFAULT_S_LIMIT, 1.05 * grid.s_max))


SWEEP_COLUMNS = ["w0", "s0", "verdict", "margin", "case_tag"]


def sweep_with(classify_many: Callable, grid: SweepGrid, tol: float, jobs: int = 1) -> pd.DataFrame:
    """Apply a vectorized classifier per row chunk on a worker pool, keeping row-major order."""
    w, s = grid.centers()
    if w.size == 0:
        return pd.DataFrame(columns=SWEEP_COLUMNS)
    chunks = np.array_split(np.arange(w.size), 4 * max(1, jobs))
    chunks = [c for c in chunks if c.size]

    def run(idx):
        return classify_many(w[idx], s[idx], tol)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        parts = list(pool.map(run, chunks))

    labels = np.concatenate([p[0] for p in parts])
    margins = np.concatenate([p[1] for p in parts])
    tags = np.concatenate([p[2] for p in parts])
    return pd.DataFrame({"w0": w, "s0": s, "verdict": labels.astype(str),
                         "margin": margins, "case_tag": tags.astype(str)})


def region_sweep(grid: SweepGrid, params: Params, tol: float = DEFAULT_TOL,
                 jobs: int = 1, classifier: Optional[RegionClassifier] = None) -> pd.DataFrame:
    classifier = classifier or sweep_classifier(grid, params)
    frame = sweep_with(classifier.classify_many, grid, tol, jobs)
    counts = frame["verdict"].value_counts().to_dict() if len(frame) else {}
    logger.info(f"sweep {grid.nw}x{grid.ns} nu={params.nu:g} c=[{params.c_minus:g}, "
                f"{params.c_plus:g}]: {counts}")
    return frame


# --- export -----------------------------------------------------------------

def curve_frame(curve: ThresholdCurve, name: str = "") -> pd.DataFrame:
    return pd.DataFrame({"curve": name or curve.branch, "s": curve.s, "g": curve.g})


def classifier_curves(classifier: RegionClassifier) -> dict:
    """Named curves of both constructions, for plotting and CSV export."""
    curves = {"P-": classifier.sup_P}
    if classifier.sup_N is not None:
        curves["N+"] = classifier.sup_N
    if classifier.sub_P is not None:
        curves["P+"] = classifier.sub_P
    if classifier.sub_N is not None:
        curves["N-"] = classifier.sub_N
    return curves
