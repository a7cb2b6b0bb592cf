"""
odeint.py
---------
Adaptive Runge-Kutta integration with dense output and event detection.

Every simulation in the toolkit (phase-plane trajectories, threshold curves,
Lagrangian characteristics) goes through `integrate`. Steps are taken by
scipy's Dormand-Prince 5(4) stepper; each accepted step keeps its dense
interpolant so the trajectory can be evaluated anywhere in range, and event
functions are located on that interpolant with a bracketing root finder.

Usage:
    traj = integrate(f, y0, 0.0, 10.0, IntegratorOptions(),
                     [EventSpec("blowup", lambda t, y: y[1], "decreasing")])
    if traj.event is not None:
        print(traj.event.t)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from core import InvalidInput, NumericalFailure

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]

EVENT_XTOL = 1e-12
UNDERFLOW_FRACTION = 1e-14


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidInput("integrator tolerances must be positive")
        if self.max_steps <= 0:
            raise InvalidInput("max_steps must be positive")
        if not self.max_step > 0:
            raise InvalidInput("max_step must be positive")


@dataclass(frozen=True)
class EventSpec:
    """Sign change of `test(t, y)` in the given direction triggers the event.

    When `accept` is given, a located crossing only counts if accept(t, y) is true there.
    """
    id: str
    test: Callable[[float, np.ndarray], float]
    direction: str = "any"
    terminal: bool = True
    accept: Optional[Callable[[float, np.ndarray], bool]] = None

    def __post_init__(self):
        if self.direction not in ("any", "increasing", "decreasing"):
            raise InvalidInput(f"unknown event direction: {self.direction}")


@dataclass(frozen=True, eq=False)
class EventRecord:
    id: str
    t: float
    state: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dense: Tuple
    event: Optional[EventRecord] = None
    crossings: Tuple[EventRecord, ...] = ()
    steps: int = 0

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.states[-1]

    def sample(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """n uniformly spaced times over the whole range and the states there."""
        t = np.linspace(self.t_start, self.t_end, n)
        return t, eval_dense(self, t)


def _crossed(g_old: float, g_new: float, direction: str) -> bool:
    up = g_old < 0.0 <= g_new
    down = g_old > 0.0 >= g_new
    if direction == "increasing":
        return up
    if direction == "decreasing":
        return down
    return up or down


def _locate(event: EventSpec, interp, t_old: float, t_new: float, g_new: float) -> float:
    if g_new == 0.0:
        return t_new
    try:
        return brentq(lambda t: event.test(t, interp(t)), t_old, t_new, xtol=EVENT_XTOL)
    except ValueError:
        # interpolant endpoint disagrees with the stepper in the last bits
        return t_new


def integrate(f: VectorField, y0, t0: float, t1: float,
              opts: Optional[IntegratorOptions] = None,
              events: Sequence[EventSpec] = ()) -> Trajectory:
    """Integrate y' = f(t, y) from t0 towards t1, stopping at the first terminal event."""
    opts = opts or IntegratorOptions()
    if not t1 > t0:
        raise InvalidInput(f"integration interval must satisfy t1 > t0, got [{t0}, {t1}]")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if not np.all(np.isfinite(y0)) or not np.all(np.isfinite(f(t0, y0))):
        raise InvalidInput("vector field is not finite at the initial state")

    solver = RK45(f, t0, y0, t1, rtol=opts.rel_tol, atol=opts.abs_tol,
                  max_step=opts.max_step)
    min_step = UNDERFLOW_FRACTION * (t1 - t0)

    times: List[float] = [t0]
    states: List[np.ndarray] = [y0]
    dense: list = []
    crossings: List[EventRecord] = []
    event: Optional[EventRecord] = None
    g_prev = [ev.test(t0, y0) for ev in events]
    steps = 0

    while solver.status == "running":
        if steps >= opts.max_steps:
            raise NumericalFailure("max steps exceeded")
        message = solver.step()
        steps += 1
        if solver.status == "failed":
            raise NumericalFailure(f"step underflow ({message})")
        t_new = solver.t
        y_new = solver.y.copy()
        if not np.all(np.isfinite(y_new)):
            raise NumericalFailure("non-finite state")
        t_old = solver.t_old
        interp = solver.dense_output()

        g_new = [ev.test(t_new, y_new) for ev in events]
        hits = []
        for i, ev in enumerate(events):
            if _crossed(g_prev[i], g_new[i], ev.direction):
                t_ev = _locate(ev, interp, t_old, t_new, g_new[i])
                if ev.accept is None or ev.accept(t_ev, interp(t_ev)):
                    hits.append((t_ev, i))
        hits.sort()
        first_terminal = next((h for h in hits if events[h[1]].terminal), None)
        for t_ev, i in hits:
            if not events[i].terminal and (first_terminal is None or t_ev <= first_terminal[0]):
                crossings.append(EventRecord(events[i].id, t_ev, interp(t_ev)))

        if first_terminal is not None:
            t_ev, i = first_terminal
            if t_ev > times[-1]:
                y_ev = interp(t_ev)
                times.append(t_ev)
                states.append(y_ev)
                dense.append(interp)
            else:
                y_ev = states[-1]
            event = EventRecord(events[i].id, float(t_ev), y_ev)
            logger.debug(f"terminal event '{event.id}' at t={event.t:.12g} after {steps} steps")
            break

        times.append(t_new)
        states.append(y_new)
        dense.append(interp)
        g_prev = g_new
        if solver.status == "running" and solver.step_size < min_step:
            raise NumericalFailure("step underflow")

    times_arr = np.asarray(times)
    states_arr = np.vstack(states)
    times_arr.setflags(write=False)
    states_arr.setflags(write=False)
    return Trajectory(times=times_arr, states=states_arr, dense=tuple(dense),
                      event=event, crossings=tuple(crossings), steps=steps)


def eval_dense(traj: Trajectory, t):
    """State at time(s) t from the per-step interpolants.

    A scalar t returns a state vector; an array returns one row per time.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if t_arr.size and (t_arr.min() < traj.times[0] or t_arr.max() > traj.times[-1]):
        raise InvalidInput(
            f"t outside trajectory range [{traj.times[0]}, {traj.times[-1]}]"
        )
    if not traj.dense:
        out = np.repeat(traj.states[:1], t_arr.size, axis=0)
        return out[0] if scalar else out

    idx = np.searchsorted(traj.times, t_arr, side="right") - 1
    idx = np.clip(idx, 0, len(traj.dense) - 1)
    out = np.empty((t_arr.size, traj.states.shape[1]))
    for j in np.unique(idx):
        mask = idx == j
        out[mask] = np.asarray(traj.dense[j](t_arr[mask])).T
    return out[0] if scalar else out
