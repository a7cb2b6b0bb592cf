#!/usr/bin/env python3
"""
test_odeint.py
--------------
Integrator accuracy, event location and failure modes.
"""

import math
import sys

import numpy as np
import pytest

from core import InvalidInput, NumericalFailure
from odeint import EventSpec, IntegratorOptions, eval_dense, integrate


def oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_exponential_decay():
    traj = integrate(lambda t, y: -y, [1.0], 0.0, 1.0)
    assert traj.event is None
    assert traj.t_end == 1.0
    assert traj.y_end[0] == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_dense_output_between_steps():
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 6.0)
    t = np.linspace(0.0, 6.0, 301)
    y = eval_dense(traj, t)
    assert y.shape == (301, 2)
    assert np.max(np.abs(y[:, 0] - np.cos(t))) < 1e-7
    assert eval_dense(traj, 1.0).shape == (2,)


def test_dense_output_range_checked():
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 1.0)
    with pytest.raises(InvalidInput):
        eval_dense(traj, 1.5)


@pytest.mark.parametrize("direction, expected", [
    ("decreasing", 0.5 * math.pi),
    ("increasing", 1.5 * math.pi),
    ("any", 0.5 * math.pi),
])
def test_event_direction(direction, expected):
    event = EventSpec("zero", lambda t, y: y[0], direction)
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 10.0, events=[event])
    assert traj.event.id == "zero"
    assert traj.event.t == pytest.approx(expected, abs=1e-10)
    assert traj.t_end == traj.event.t
    assert abs(traj.event.state[0]) < 1e-9


def test_non_terminal_crossings_are_recorded():
    event = EventSpec("zero", lambda t, y: y[0], "any", terminal=False)
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 10.0, events=[event])
    assert traj.event is None
    times = [c.t for c in traj.crossings]
    assert times == pytest.approx([0.5 * math.pi, 1.5 * math.pi, 2.5 * math.pi], abs=1e-9)


def test_first_terminal_event_wins():
    events = [EventSpec("late", lambda t, y: t - 3.0, "increasing"),
              EventSpec("early", lambda t, y: t - 1.0, "increasing")]
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 10.0, events=events)
    assert traj.event.id == "early"
    assert traj.event.t == pytest.approx(1.0, abs=1e-12)


def test_rejected_crossing_is_skipped():
    # only crossings after t = 4 count
    event = EventSpec("zero", lambda t, y: y[0], "decreasing", accept=lambda t, y: t > 4.0)
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 10.0, events=[event])
    assert traj.event.t == pytest.approx(2.5 * math.pi, abs=1e-9)


def test_sample_covers_whole_range():
    traj = integrate(oscillator, [1.0, 0.0], 0.0, 2.0)
    t, y = traj.sample(11)
    assert t[0] == 0.0 and t[-1] == 2.0
    assert y.shape == (11, 2)


def test_empty_interval_rejected():
    with pytest.raises(InvalidInput):
        integrate(oscillator, [1.0, 0.0], 1.0, 1.0)


def test_singular_field_fails():
    with pytest.raises(NumericalFailure):
        integrate(lambda t, y: y * y, [1.0], 0.0, 2.0)


def test_step_limit():
    with pytest.raises(NumericalFailure, match="max steps exceeded"):
        integrate(oscillator, [1.0, 0.0], 0.0, 1000.0, IntegratorOptions(max_steps=5))


@pytest.mark.parametrize("kwargs", [{"rel_tol": 0.0}, {"abs_tol": -1.0},
                                    {"max_steps": 0}, {"max_step": 0.0}])
def test_invalid_options(kwargs):
    with pytest.raises(InvalidInput):
        IntegratorOptions(**kwargs)


def test_unknown_event_direction():
    with pytest.raises(InvalidInput):
        EventSpec("bad", lambda t, y: y[0], "sideways")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
