"""
phaseplane.py
-------------
Simulation of the reduced system along one characteristic

    w' = -nu*w + k*(1 - c(t)*s),    s' = w,

with blow-up detection (s reaching 0), a posteriori checks of the comparison
principles on dense output, the resonance experiment c(t) = 1 + eps*sin(t),
and batch runners for the randomized breakdown-bound and invariance checks.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core import (
    SUBCRITICAL, SUPERCRITICAL,
    BackgroundSpec, InvalidInput, Params, PhasePoint,
    background_bounds_consistent, background_function, background_to_dict,
    random_sinusoid, validate_params, validate_point,
)
from odeint import EventSpec, IntegratorOptions, Trajectory, integrate
from thresholds import (
    DEFAULT_S_LIMIT, RegionClassifier, breakdown_time_bound, closing_condition,
    lyapunov_eval, s_tilde, solve_N, solve_P,
)

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-6
INVARIANCE_SLACK = 1e-7
CHECK_SAMPLES = 1000
TANGENT_W = 1e-3
TOUCH_S = 1e-8


@dataclass(frozen=True, eq=False)
class SimOutcome:
    trajectory: Trajectory
    blowup: Optional[Tuple[float, float]]
    horizon: float
    bound_check: Optional[dict] = None

    @property
    def blew_up(self) -> bool:
        return self.blowup is not None

    @property
    def t_star(self) -> Optional[float]:
        return None if self.blowup is None else self.blowup[0]

    def to_dict(self) -> dict:
        w_end, s_end = (float(v) for v in self.trajectory.y_end)
        return {
            "t_star": self.t_star,
            "w_star": None if self.blowup is None else self.blowup[1],
            "horizon": self.horizon,
            "t_end": self.trajectory.t_end,
            "final_state": {"w": w_end, "s": s_end},
            "steps": self.trajectory.steps,
            "bound_check": self.bound_check,
        }


def reduced_field(params: Params, bg: BackgroundSpec):
    c = background_function(bg)
    nu, k = params.nu, params.k

    def f(t, y):
        return np.array([-nu * y[0] + k * (1.0 - c(t) * y[1]), y[0]])

    return f


def blowup_events(field_fn) -> List[EventSpec]:
    """s reaching 0 transversally, or a minimum of s at (numerically) zero.

    A crossing with |w| below TANGENT_W while w is still turning upward is a
    grazing touch; it is reported at the minimum of s instead.
    """
    def transversal(t, y):
        return abs(y[0]) > TANGENT_W or field_fn(t, y)[0] <= 0.0

    return [
        EventSpec("blowup", lambda t, y: y[1], "decreasing", accept=transversal),
        EventSpec("touch", lambda t, y: y[0], "increasing", accept=lambda t, y: y[1] <= TOUCH_S),
    ]


def simulate_ws(point: PhasePoint, params: Params, bg: BackgroundSpec, horizon: float,
                opts: Optional[IntegratorOptions] = None, with_bound: bool = False,
                classifier: Optional[RegionClassifier] = None) -> SimOutcome:
    """Integrate the reduced system from `point` until s hits 0 or the horizon."""
    validate_params(params)
    validate_point(point)
    background_bounds_consistent(bg, params)
    if not horizon > 0:
        raise InvalidInput(f"horizon must be positive, got {horizon}")

    field_fn = reduced_field(params, bg)
    traj = integrate(field_fn, [point.w, point.s], 0.0, horizon, opts, blowup_events(field_fn))
    blowup = None
    if traj.event is not None:
        blowup = (traj.event.t, float(traj.event.state[0]))
        logger.debug(f"blow-up from ({point.w:.6g}, {point.s:.6g}) at t*={blowup[0]:.10g}")

    bound_check = None
    if with_bound and params.k == 1:
        bound = breakdown_time_bound(point, params, classifier)
        if bound is None:
            satisfied = None
        elif blowup is not None:
            satisfied = blowup[0] <= bound + BOUND_SLACK
        else:
            satisfied = False if horizon >= bound + BOUND_SLACK else None
        bound_check = {"bound": bound, "t_star": None if blowup is None else blowup[0],
                       "satisfied": satisfied}
    return SimOutcome(trajectory=traj, blowup=blowup, horizon=horizon, bound_check=bound_check)


def resonance_demo(epsilon: float, horizon: float = 200.0, phase: float = 0.0,
                   opts: Optional[IntegratorOptions] = None) -> SimOutcome:
    """Undamped start at equilibrium (0, 1) pumped by c(t) = 1 + eps*sin(t + phase)."""
    if not 0.0 <= epsilon < 1.0:
        raise InvalidInput(f"resonance amplitude must lie in [0, 1), got {epsilon}")
    params = Params(nu=0.0, k=1, c_minus=1.0 - epsilon, c_plus=1.0 + epsilon)
    bg = BackgroundSpec.sinusoid(1.0, epsilon, 1.0, phase)
    outcome = simulate_ws(PhasePoint(0.0, 1.0), params, bg, horizon, opts)
    if outcome.blew_up:
        logger.info(f"resonance eps={epsilon:g} phase={phase:g}: blow-up at t*={outcome.t_star:.8f}")
    else:
        logger.info(f"resonance eps={epsilon:g} phase={phase:g}: regular up to t={horizon:g}")
    return outcome


def exact_repulsive_solution(a: float, c_bar: float, nu: float, t):
    """Closed-form (w, s) for constant c_bar, underdamped, starting from (0, a)."""
    if nu >= 2.0 * math.sqrt(c_bar):
        raise InvalidInput("closed form needs nu < 2*sqrt(c_bar)")
    t = np.asarray(t, dtype=float)
    mu = math.sqrt(c_bar - nu * nu / 4.0)
    amp = (a - 1.0 / c_bar) * np.exp(-0.5 * nu * t)
    s = 1.0 / c_bar + amp * (np.cos(mu * t) + nu / (2.0 * mu) * np.sin(mu * t))
    w = -amp * (c_bar / mu) * np.sin(mu * t)
    return w, s


def theta_minus(point: PhasePoint, c_minus: float) -> float:
    """arctan(sqrt(c-)*(s - 1/c-)/w) in (-pi/2, pi/2)."""
    if point.w == 0:
        raise InvalidInput("angle undefined")
    return math.atan(math.sqrt(c_minus) * (point.s - 1.0 / c_minus) / point.w)


# --- comparison principles --------------------------------------------------

@dataclass
class LyapunovCheck:
    name: str
    expected: str
    status: str = "not checked"
    start_value: Optional[float] = None
    min_value: Optional[float] = None
    max_value: Optional[float] = None
    max_violation: float = 0.0
    first_violation_time: Optional[float] = None
    checked_until: Optional[float] = None
    domain_exit_time: Optional[float] = None


@dataclass
class ComparisonReport:
    mode: str
    checks: List[LyapunovCheck] = field(default_factory=list)

    @property
    def preserved(self) -> bool:
        done = [c for c in self.checks if c.status in ("preserved", "violated")]
        return bool(done) and all(c.status == "preserved" for c in done)

    def check(self, name: str) -> LyapunovCheck:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "checks": [c.__dict__ for c in self.checks]}


def _run_check(name, expected, curve, t, w, s, tol) -> LyapunovCheck:
    check = LyapunovCheck(name=name, expected=expected)
    if curve is None:
        check.status = "not constructed"
        return check
    start = lyapunov_eval(curve, PhasePoint(w[0], s[0])) if curve.contains(s[0]) else None
    check.start_value = start
    if start is None:
        check.status = "domain exited"
        check.domain_exit_time = float(t[0])
        return check
    met = {"<=0": start <= tol, ">=0": start >= -tol, ">0": start > 0, "<0": start < 0}[expected]
    if not met:
        check.status = "precondition not met"
        return check

    outside = (s < curve.s_lo) | (s > curve.s_hi)
    end = int(np.argmax(outside)) if outside.any() else len(t)
    if end < len(t):
        check.domain_exit_time = float(t[end])
        logger.warning(f"{name}: trajectory left the curve domain at t={t[end]:.6g}")
    g = curve.evaluate(s[:end])
    values = w[:end] + g if curve.branch == "P" else w[:end] - g
    # distance to the curve: |L| / |grad L| with |grad L| = sqrt(1 + (rhs/g)**2)
    norm = np.hypot(g, curve.rhs(s[:end], g))
    dist = np.divide(values * g, norm, out=np.zeros_like(values), where=norm > 0)
    if expected in ("<=0", "<0"):
        violation = np.maximum(dist, 0.0)
    else:
        violation = np.maximum(-dist, 0.0)
    check.min_value = float(values.min())
    check.max_value = float(values.max())
    check.max_violation = float(violation.max())
    check.checked_until = float(t[end - 1])
    bad = violation > tol
    if bad.any():
        check.status = "violated"
        check.first_violation_time = float(t[int(np.argmax(bad))])
    else:
        check.status = "preserved"
    return check


def check_comparison(outcome: SimOutcome, params: Params, mode: str = "weak",
                     tol: float = INVARIANCE_SLACK, samples: int = CHECK_SAMPLES) -> ComparisonReport:
    """Check along the trajectory that the Lyapunov signs of the chosen principle persist."""
    validate_params(params)
    if params.k != 1:
        raise InvalidInput("comparison principles apply to the repulsive system (k=+1)")
    if mode not in ("weak", "strong"):
        raise InvalidInput(f"unknown comparison mode: {mode}")
    cm, cp, nu = params.c_minus, params.c_plus, params.nu

    t, y = outcome.trajectory.sample(samples)
    w = y[:, 0]
    s = np.where((y[:, 1] < 0) & (y[:, 1] > -TANGENT_W ** 2), 0.0, y[:, 1])
    s_cap = max(DEFAULT_S_LIMIT, 1.1 * float(s.max()))

    report = ComparisonReport(mode=mode)
    if mode == "weak":
        star = s_tilde(cm, nu)
        P = solve_P(cm, nu, s_cap)
        N = solve_N(cp, nu, star) if math.isfinite(star) else None
        report.checks.append(_run_check("L_P-", "<=0", P, t, w, s, tol))
        report.checks.append(_run_check("L_N+", ">=0", N, t, w, s, tol))
    else:
        star = s_tilde(cp, nu)
        P = solve_P(cp, nu, s_cap)
        N = solve_N(cm, nu, star) if math.isfinite(star) and star * cm > 1.0 else None
        report.checks.append(_run_check("L_P+", ">0", P, t, w, s, tol))
        report.checks.append(_run_check("L_N-", "<0", N, t, w, s, tol))
    return report


# --- batch runners ----------------------------------------------------------

def simulate_batch(points: Sequence[PhasePoint], params: Params,
                   backgrounds: Sequence[BackgroundSpec], horizons: Sequence[float],
                   jobs: int = 1, opts: Optional[IntegratorOptions] = None) -> List[SimOutcome]:
    """Independent simulations on a worker pool, results in input order."""
    def run(args):
        point, bg, horizon = args
        return simulate_ws(point, params, bg, horizon, opts)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, zip(points, backgrounds, horizons)))


def sample_starts(rng: np.random.Generator, classifier: RegionClassifier, n: int, label: str,
                  box: Tuple[float, float, float, float], min_margin: float = 1e-3,
                  max_rounds: int = 200) -> List[PhasePoint]:
    """Rejection-sample n starts with the given verdict, away from the boundary."""
    w_lo, w_hi, s_lo, s_hi = box
    found: List[PhasePoint] = []
    for _ in range(max_rounds):
        w = rng.uniform(w_lo, w_hi, 4 * n)
        s = rng.uniform(s_lo, s_hi, 4 * n)
        labels, margins, _ = classifier.classify_many(w, s)
        ok = (labels == label) & (np.abs(margins) > min_margin)
        found.extend(PhasePoint(float(a), float(b)) for a, b in zip(w[ok], s[ok]))
        if len(found) >= n:
            return found[:n]
    raise InvalidInput(f"could not sample {n} {label} starts in box {box}")


def _default_box(params: Params, label: str) -> Tuple[float, float, float, float]:
    s_hi = 4.0 / params.c_minus
    if label == SUBCRITICAL:
        s_hi = min(s_hi, s_tilde(params.c_plus, params.nu))
    return (-3.0, 3.0, 0.01, s_hi)


def verify_breakdown_bounds(params: Params, n: int, rng: np.random.Generator,
                            jobs: int = 1, opts: Optional[IntegratorOptions] = None) -> pd.DataFrame:
    """Random supercritical starts under random admissible sinusoids; t* must not exceed the bound."""
    classifier = RegionClassifier(params, max(DEFAULT_S_LIMIT, 8.0 / params.c_minus))
    starts = sample_starts(rng, classifier, n, SUPERCRITICAL, _default_box(params, SUPERCRITICAL))
    backgrounds = [random_sinusoid(rng, params.c_minus, params.c_plus) for _ in starts]
    bounds = [breakdown_time_bound(p, params, classifier) for p in starts]
    outcomes = simulate_batch(starts, params, backgrounds, [b + 1.0 for b in bounds], jobs, opts)

    rows = []
    for p, bg, bound, out in zip(starts, backgrounds, bounds, outcomes):
        rows.append({"w0": p.w, "s0": p.s, "background": json.dumps(background_to_dict(bg)),
                     "bound": bound, "t_star": out.t_star,
                     "ok": out.blew_up and out.t_star <= bound + BOUND_SLACK})
    frame = pd.DataFrame(rows)
    logger.info(f"breakdown bounds nu={params.nu:g} c=[{params.c_minus:g}, {params.c_plus:g}]: "
                f"{int(frame['ok'].sum())}/{len(frame)} within bound")
    return frame


def verify_invariance(params: Params, n: int, rng: np.random.Generator, horizon: float = 100.0,
                      jobs: int = 1, opts: Optional[IntegratorOptions] = None) -> pd.DataFrame:
    """Random subcritical starts must stay inside the subcritical set and never blow up."""
    if not closing_condition(params).holds:
        raise InvalidInput("invariance check needs parameters satisfying the closing condition")
    star = s_tilde(params.c_plus, params.nu)
    s_limit = max(DEFAULT_S_LIMIT, 1.5 * star if math.isfinite(star) else 0.0)
    classifier = RegionClassifier(params, s_limit)
    starts = sample_starts(rng, classifier, n, SUBCRITICAL, _default_box(params, SUBCRITICAL))
    backgrounds = [random_sinusoid(rng, params.c_minus, params.c_plus) for _ in starts]
    outcomes = simulate_batch(starts, params, backgrounds, [horizon] * len(starts), jobs, opts)

    rows = []
    for p, bg, out in zip(starts, backgrounds, outcomes):
        _, y = out.trajectory.sample(CHECK_SAMPLES)
        margin = classifier.margin_sub(y[:, 0], y[:, 1])
        rows.append({"w0": p.w, "s0": p.s, "background": json.dumps(background_to_dict(bg)),
                     "min_margin": float(margin.min()), "blew_up": out.blew_up,
                     "ok": (not out.blew_up) and float(margin.min()) >= -INVARIANCE_SLACK})
    frame = pd.DataFrame(rows)
    logger.info(f"invariance nu={params.nu:g} c=[{params.c_minus:g}, {params.c_plus:g}]: "
                f"{int(frame['ok'].sum())}/{len(frame)} stayed subcritical")
    return frame


def trajectory_frame(outcome: SimOutcome) -> pd.DataFrame:
    traj = outcome.trajectory
    return pd.DataFrame({"t": traj.times, "w": traj.states[:, 0], "s": traj.states[:, 1]})
