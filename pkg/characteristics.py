"""
characteristics.py
------------------
Constant-background Euler-Poisson dynamics along particle paths.

Each Lagrangian label alpha carries
    x' = u,  u' = -nu*u + k*E,  E' = -c*u,
    w' = -nu*w + k*(1 - c*s),  s' = w,  Gamma' = Gamma * w / s,
with E = -d(phi)/dx = integral of (rho - c) from the left end, w = u_x/rho,
s = 1/rho and Gamma = dx/d(alpha). Labels are independent, so they are
integrated one by one on a worker pool; the earliest zero of Gamma is the
blow-up time of the whole solution.

The module also exposes the undamped closed forms of Gamma and the
neutrality / non-existence / anomalous-datum diagnostics.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from core import InvalidInput
from odeint import EventSpec, IntegratorOptions, Trajectory, eval_dense, integrate

logger = logging.getLogger(__name__)

LAGRANGIAN_OPTIONS = IntegratorOptions(rel_tol=1e-10, abs_tol=1e-12)
DECAY_TOL = 1e-6
NEUTRALITY_TOL = 1e-8


@dataclass(frozen=True)
class InitialDatum:
    rho0: Callable
    u0: Callable
    du0: Callable
    tag: str = "custom"

    @classmethod
    def constant(cls, c_bar: float) -> "InitialDatum":
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return cls(lambda x: c_bar + zero(x), zero, zero, "constant")

    @classmethod
    def gaussian(cls, c_bar: float, rho_amp: float, u_amp: float, width: float = 1.0) -> "InitialDatum":
        """Neutral density dip/bump (1 - 2x^2/w^2)exp(-x^2/w^2) and a Gaussian velocity."""
        def bump(x):
            return np.exp(-np.square(x) / width ** 2)

        return cls(
            rho0=lambda x: c_bar + rho_amp * (1.0 - 2.0 * np.square(x) / width ** 2) * bump(x),
            u0=lambda x: u_amp * bump(x),
            du0=lambda x: -2.0 * np.asarray(x) / width ** 2 * u_amp * bump(x),
            tag="gaussian",
        )

    @classmethod
    def anomalous(cls, c_bar: float) -> "InitialDatum":
        """u0 = sin x/(1 + x^2)^(3/8) with rho0 = c_bar; u0' is not integrable."""
        def u0(x):
            return np.sin(x) / np.power(1.0 + np.square(x), 0.375)

        def du0(x):
            x = np.asarray(x, dtype=float)
            q = 1.0 + x * x
            return np.cos(x) / np.power(q, 0.375) - 0.75 * x * np.sin(x) / np.power(q, 1.375)

        return cls(lambda x: c_bar + 0.0 * np.asarray(x, dtype=float), u0, du0, "anomalous")

    @classmethod
    def schwartz_control(cls, c_bar: float) -> "InitialDatum":
        """u0 = x*exp(-x^2), rho0 = c_bar."""
        return cls(
            rho0=lambda x: c_bar + 0.0 * np.asarray(x, dtype=float),
            u0=lambda x: np.asarray(x) * np.exp(-np.square(x)),
            du0=lambda x: (1.0 - 2.0 * np.square(x)) * np.exp(-np.square(x)),
            tag="schwartz",
        )

    @classmethod
    def nonexistence(cls, c_bar: float) -> "InitialDatum":
        """rho0 = c_bar + 1/(1 + x^2), u0 = 0: violates neutrality."""
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return cls(lambda x: c_bar + 1.0 / (1.0 + np.square(x)), zero, zero, "nonexistence")

    @classmethod
    def from_samples(cls, x, rho0, u0, du0=None) -> "InitialDatum":
        x = np.asarray(x, dtype=float)
        rho0 = np.asarray(rho0, dtype=float)
        u0 = np.asarray(u0, dtype=float)
        du0 = np.gradient(u0, x, edge_order=2) if du0 is None else np.asarray(du0, dtype=float)
        if not (x.shape == rho0.shape == u0.shape == du0.shape):
            raise InvalidInput("sampled datum arrays must share one grid")
        return cls(lambda a: np.interp(a, x, rho0), lambda a: np.interp(a, x, u0),
                   lambda a: np.interp(a, x, du0), "table")


@dataclass(frozen=True)
class LabelGrid:
    half_width: float
    labels: int

    def alpha(self) -> np.ndarray:
        if self.labels < 3 or not self.half_width > 0:
            raise InvalidInput("label grid needs at least 3 labels on a positive half-width")
        return np.linspace(-self.half_width, self.half_width, self.labels)


@dataclass(frozen=True, eq=False)
class FluidState:
    t: float
    alpha_grid: np.ndarray
    rho0: np.ndarray
    x: np.ndarray
    Gamma: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    E: np.ndarray
    dudx: np.ndarray


@dataclass(frozen=True, eq=False)
class CharacteristicRun:
    states: Tuple[FluidState, ...]
    blowup: Optional[Tuple[float, float]]
    label_blowup_times: np.ndarray


# --- closed forms (nu = 0) --------------------------------------------------

def gamma_exact(datum: InitialDatum, c_bar: float, k: int, t, alpha):
    """Undamped Gamma(t, alpha)."""
    r = datum.rho0(alpha) / c_bar
    du0 = datum.du0(alpha)
    om = math.sqrt(c_bar)
    if k == 1:
        return 1.0 + (r - 1.0) * (1.0 - np.cos(om * t)) + du0 * np.sin(om * t) / om
    if k == -1:
        return 1.0 + (1.0 - r) * (np.cosh(om * t) - 1.0) + du0 * np.sinh(om * t) / om
    raise InvalidInput(f"force sign must be -1 or +1, got k={k}")


def gamma_rate_exact(datum: InitialDatum, c_bar: float, k: int, t, alpha):
    """d(Gamma)/dt of the undamped closed form; equals du/d(alpha)."""
    r = datum.rho0(alpha) / c_bar
    du0 = datum.du0(alpha)
    om = math.sqrt(c_bar)
    if k == 1:
        return (r - 1.0) * om * np.sin(om * t) + du0 * np.cos(om * t)
    if k == -1:
        return (1.0 - r) * om * np.sinh(om * t) + du0 * np.cosh(om * t)
    raise InvalidInput(f"force sign must be -1 or +1, got k={k}")


def gamma_first_zero(datum: InitialDatum, c_bar: float, alpha) -> np.ndarray:
    """First positive root of the repulsive undamped Gamma per label (inf if none)."""
    om = math.sqrt(c_bar)
    r = np.asarray(datum.rho0(alpha) / c_bar, dtype=float)
    A = r - 1.0
    C = np.asarray(datum.du0(alpha), dtype=float) / om
    R = np.hypot(A, C)
    hits = R >= r
    beta = np.arccos(np.clip(np.where(hits, r / np.where(R > 0, R, 1.0), 1.0), -1.0, 1.0))
    phi = np.arctan2(C, A)
    two_pi = 2.0 * math.pi
    th1 = np.mod(beta - phi, two_pi)
    th2 = np.mod(-beta - phi, two_pi)
    th1 = np.where(th1 > 0, th1, two_pi)
    th2 = np.where(th2 > 0, th2, two_pi)
    theta = np.minimum(th1, th2)
    return np.where(hits, theta / om, np.inf)


# --- Lagrangian solver ------------------------------------------------------

def _label_field(c_bar: float, k: int, nu: float):
    def f(t, y):
        x, u, E, w, s, G = y
        return np.array([u, -nu * u + k * E, -c_bar * u,
                         -nu * w + k * (1.0 - c_bar * s), w, G * w / s])
    return f


def check_datum(datum: InitialDatum, c_bar: float, alpha: np.ndarray,
                tol: float = NEUTRALITY_TOL) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rho0 = np.asarray(datum.rho0(alpha), dtype=float)
    u0 = np.asarray(datum.u0(alpha), dtype=float)
    du0 = np.asarray(datum.du0(alpha), dtype=float)
    if np.any(rho0 <= 0):
        raise InvalidInput("initial density must be positive on the label grid")
    edge = np.array([rho0[0] - c_bar, rho0[-1] - c_bar, u0[0], u0[-1]])
    if np.any(np.abs(edge) > DECAY_TOL):
        raise InvalidInput("datum does not decay on the truncation domain")
    L = 0.5 * (alpha[-1] - alpha[0])
    if abs(trapezoid(rho0 - c_bar, alpha)) > tol * L:
        raise InvalidInput("non-neutral initial field")
    return rho0, u0, du0


def solve_characteristics(datum: InitialDatum, c_bar: float, k: int, nu: float,
                          grid: LabelGrid, horizon: float,
                          opts: Optional[IntegratorOptions] = None,
                          snapshots: int = 11, jobs: int = 1) -> CharacteristicRun:
    """Integrate every label up to the horizon or the first zero of Gamma."""
    if not (c_bar > 0 and nu >= 0 and horizon > 0):
        raise InvalidInput("need c_bar > 0, nu >= 0 and a positive horizon")
    if k not in (-1, 1):
        raise InvalidInput(f"force sign must be -1 or +1, got k={k}")
    opts = opts or LAGRANGIAN_OPTIONS
    alpha = grid.alpha()
    rho0, u0, du0 = check_datum(datum, c_bar, alpha)
    E0 = cumulative_trapezoid(rho0 - c_bar, alpha, initial=0.0)
    f = _label_field(c_bar, k, nu)
    collapse = EventSpec("collapse", lambda t, y: y[5], "decreasing")

    def run(i: int) -> Trajectory:
        y0 = [alpha[i], u0[i], E0[i], du0[i] / rho0[i], 1.0 / rho0[i], 1.0]
        return integrate(f, y0, 0.0, horizon, opts, [collapse])

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        trajectories = list(pool.map(run, range(alpha.size)))

    t_blow = np.array([tr.event.t if tr.event is not None else np.inf for tr in trajectories])
    blowup = None
    t_end = horizon
    if np.isfinite(t_blow).any():
        j = int(np.argmin(t_blow))
        blowup = (float(t_blow[j]), float(alpha[j]))
        t_end = blowup[0]
        logger.info(f"characteristics: Gamma vanishes at t={t_end:.8g}, alpha={alpha[j]:.6g}")

    times = np.linspace(0.0, t_end, max(2, snapshots))
    per_label = np.stack([eval_dense(tr, times) for tr in trajectories], axis=1)
    states = []
    for n, t in enumerate(times):
        y = per_label[n]
        G = y[:, 5]
        states.append(FluidState(
            t=float(t), alpha_grid=alpha, rho0=rho0, x=y[:, 0], Gamma=G,
            rho=np.divide(rho0, G, out=np.full_like(G, np.inf), where=G > 0),
            u=y[:, 1], E=y[:, 2], dudx=y[:, 3] / y[:, 4],
        ))
    return CharacteristicRun(states=tuple(states), blowup=blowup, label_blowup_times=t_blow)


def fluid_state_frame(state: FluidState) -> pd.DataFrame:
    return pd.DataFrame({"alpha": state.alpha_grid, "x": state.x, "rho": state.rho,
                         "u": state.u, "Gamma": state.Gamma, "E": state.E})


# --- diagnostics ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NeutralityReport:
    frame: pd.DataFrame
    du0_integral: float
    velocity_neutral: bool

    def to_dict(self) -> dict:
        return {"per_time": self.frame.to_dict(orient="records"),
                "du0_integral": self.du0_integral,
                "velocity_neutral": self.velocity_neutral}


def neutrality_report(states: Sequence[FluidState], c_bar: float,
                      tol: float = NEUTRALITY_TOL) -> NeutralityReport:
    """I(t) = integral of (rho0 - c*Gamma) d(alpha), its L1 size and TV(u) per snapshot."""
    rows = []
    for st in states:
        dev = st.rho0 - c_bar * st.Gamma
        rows.append({"t": st.t,
                     "I": float(trapezoid(dev, st.alpha_grid)),
                     "L1": float(trapezoid(np.abs(dev), st.alpha_grid)),
                     "TV_u": float(np.sum(np.abs(np.diff(st.u))))})
    first = states[0]
    du0_integral = float(first.u[-1] - first.u[0])
    return NeutralityReport(pd.DataFrame(rows), du0_integral, abs(du0_integral) <= tol)


def _segment_integrals(fn, a: float, b: float, h: float, chunk: int = 200_000) -> Tuple[float, float]:
    """Trapezoid integrals of fn and |fn| on [a, b] with spacing about h."""
    n = max(2, int(math.ceil((b - a) / h)) + 1)
    edges = np.linspace(a, b, n)
    signed = absolute = 0.0
    for start in range(0, n - 1, chunk):
        x = edges[start:min(start + chunk + 1, n)]
        y = fn(x)
        signed += float(trapezoid(y, x))
        absolute += float(trapezoid(np.abs(y), x))
    return signed, absolute


def _truncated_integrals(datum, c_bar, t, R_list, h) -> pd.DataFrame:
    fn = lambda a: gamma_exact(datum, c_bar, 1, t, a) - 1.0
    rows = []
    J = J_abs = 0.0
    prev = 0.0
    for R in sorted(float(r) for r in R_list):
        for lo, hi in ((prev, R), (-R, -prev)):
            if hi > lo:
                s_val, a_val = _segment_integrals(fn, lo, hi, h)
                J += s_val
                J_abs += a_val
        prev = R
        rows.append({"R": R, "J": J, "J_abs": J_abs})
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class AnomalousReport:
    frame: pd.DataFrame
    control: pd.DataFrame
    spread: float
    control_spread: float
    slope: float
    divergent: bool

    def to_dict(self) -> dict:
        return {"values": self.frame.to_dict(orient="records"),
                "control": self.control.to_dict(orient="records"),
                "spread": self.spread, "control_spread": self.control_spread,
                "slope": self.slope, "divergent": self.divergent}


def anomalous_demo(R_list: Sequence[float], t: float = 0.1, c_bar: float = 1.0,
                   h: float = 0.05) -> AnomalousReport:
    """Truncated integrals of Gamma - 1 for the anomalous datum and a Schwartz control.

    The signed integral J(R) telescopes and stays bounded; the L1 integral
    J_abs(R), i.e. the size of rho - c, keeps growing like R^(1/4).
    """
    frame = _truncated_integrals(InitialDatum.anomalous(c_bar), c_bar, t, R_list, h)
    control = _truncated_integrals(InitialDatum.schwartz_control(c_bar), c_bar, t, R_list, h)
    tail = frame["J_abs"].to_numpy()[-3:]
    ctail = control["J_abs"].to_numpy()[-3:]
    spread = float(tail.max() - tail.min())
    control_spread = float(ctail.max() - ctail.min())
    positive = frame["J_abs"] > 0
    slope = float("nan")
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(frame["R"][positive]), np.log(frame["J_abs"][positive]), 1)[0])
    divergent = spread > 0 and spread > 10.0 * control_spread
    return AnomalousReport(frame, control, spread, control_spread, slope, divergent)


@dataclass(frozen=True, eq=False)
class NonexistenceReport:
    frame: pd.DataFrame
    limit: float
    limit_numeric: float
    nonzero: bool

    def to_dict(self) -> dict:
        return {"values": self.frame.to_dict(orient="records"), "limit": self.limit,
                "limit_numeric": self.limit_numeric, "nonzero": self.nonzero}


def nonexistence_demo(c_bar: float, t: float, R_list: Sequence[float]) -> NonexistenceReport:
    """Far-field velocity jump u(t, x(t,R)) - u(t, x(t,-R)) for rho0 = c + 1/(1+x^2), u0 = 0."""
    datum = InitialDatum.nonexistence(c_bar)
    rate = lambda a: float(gamma_rate_exact(datum, c_bar, 1, t, a))
    rows = [{"R": float(R), "delta": quad(rate, -R, R, limit=400)[0]} for R in R_list]
    limit = math.pi * math.sin(math.sqrt(c_bar) * t) / math.sqrt(c_bar)
    limit_numeric = quad(rate, -np.inf, np.inf, limit=400)[0]
    return NonexistenceReport(pd.DataFrame(rows), limit, limit_numeric, abs(limit_numeric) > 1e-12)
