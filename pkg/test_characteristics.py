#!/usr/bin/env python3
"""
test_characteristics.py
-----------------------
Lagrangian solver against the undamped closed forms, datum checks and the
neutrality / anomalous / non-existence diagnostics.
"""

import math
import sys

import numpy as np
import pytest

from characteristics import (
    InitialDatum, LabelGrid, anomalous_demo, fluid_state_frame, gamma_exact, gamma_first_zero,
    gamma_rate_exact, neutrality_report, nonexistence_demo, solve_characteristics,
)
from core import InvalidInput

ALPHA = np.linspace(-8.0, 8.0, 201)


@pytest.fixture
def smooth_datum():
    return InitialDatum.gaussian(1.0, 0.2, 0.3)


@pytest.mark.parametrize("k", [1, -1])
def test_gamma_starts_at_one(smooth_datum, k):
    assert np.allclose(gamma_exact(smooth_datum, 1.0, k, 0.0, ALPHA), 1.0)


@pytest.mark.parametrize("k", [1, -1])
def test_gamma_rate_is_time_derivative(smooth_datum, k):
    h = 1e-5
    fd = (gamma_exact(smooth_datum, 2.0, k, 0.7 + h, ALPHA)
          - gamma_exact(smooth_datum, 2.0, k, 0.7 - h, ALPHA)) / (2.0 * h)
    assert np.max(np.abs(fd - gamma_rate_exact(smooth_datum, 2.0, k, 0.7, ALPHA))) < 1e-8


def test_gamma_needs_force_sign(smooth_datum):
    with pytest.raises(InvalidInput):
        gamma_exact(smooth_datum, 1.0, 0, 0.5, ALPHA)


def test_first_zero_is_first_root():
    datum = InitialDatum.gaussian(1.0, 0.2, 3.0)
    zeros = gamma_first_zero(datum, 1.0, ALPHA)
    finite = np.isfinite(zeros)
    assert finite.any()
    for a, t0 in zip(ALPHA[finite], zeros[finite]):
        assert float(gamma_exact(datum, 1.0, 1, t0, a)) == pytest.approx(0.0, abs=1e-10)
        before = gamma_exact(datum, 1.0, 1, np.linspace(0.0, t0, 50)[:-1], a)
        assert np.all(before > 0)
    # labels far out never collapse
    assert math.isinf(zeros[0]) and math.isinf(zeros[-1])


def test_numeric_gamma_matches_closed_form(smooth_datum):
    run = solve_characteristics(smooth_datum, 1.0, 1, 0.0, LabelGrid(8.0, 201), 1.0, jobs=2)
    assert run.blowup is None
    assert len(run.states) == 11
    assert run.states[-1].t == pytest.approx(1.0)
    for st in run.states:
        exact = gamma_exact(smooth_datum, 1.0, 1, st.t, st.alpha_grid)
        assert np.max(np.abs(st.Gamma - exact)) <= 1e-6
        assert np.allclose(st.rho, st.rho0 / st.Gamma)


def test_attractive_gamma_matches_closed_form():
    datum = InitialDatum.gaussian(1.0, 0.1, 0.1)
    run = solve_characteristics(datum, 1.0, -1, 0.0, LabelGrid(8.0, 101), 0.5, snapshots=3)
    for st in run.states:
        exact = gamma_exact(datum, 1.0, -1, st.t, st.alpha_grid)
        assert np.max(np.abs(st.Gamma - exact)) <= 1e-6


def test_blowup_time_matches_first_zero():
    datum = InitialDatum.gaussian(1.0, 0.2, 3.0)
    grid = LabelGrid(8.0, 201)
    run = solve_characteristics(datum, 1.0, 1, 0.0, grid, 2.0, jobs=4)
    expected = gamma_first_zero(datum, 1.0, grid.alpha())
    assert run.blowup is not None
    assert run.blowup[0] == pytest.approx(float(expected.min()), abs=1e-6)
    assert run.blowup[1] == grid.alpha()[int(np.argmin(expected))]
    assert run.states[-1].t == pytest.approx(run.blowup[0])
    hit = np.isfinite(run.label_blowup_times)
    assert np.max(np.abs(run.label_blowup_times[hit] - expected[hit])) <= 1e-6


def test_neutrality_is_kept(smooth_datum):
    for nu in (0.0, 0.5):
        run = solve_characteristics(smooth_datum, 1.0, 1, nu, LabelGrid(8.0, 201), 1.0)
        report = neutrality_report(run.states, 1.0)
        assert report.frame["I"].abs().max() <= 1e-7
        assert report.velocity_neutral
        assert list(report.frame.columns) == ["t", "I", "L1", "TV_u"]


@pytest.mark.parametrize("nu", [0.0, 0.5])
def test_far_field_stays_quiet(smooth_datum, nu):
    run = solve_characteristics(smooth_datum, 1.0, 1, nu, LabelGrid(8.0, 201), 2.0)
    for st in run.states:
        assert max(abs(st.E[0]), abs(st.E[-1])) <= 1e-6


def test_labels_stay_ordered_until_collapse():
    datum = InitialDatum.gaussian(1.0, 0.2, 3.0)
    run = solve_characteristics(datum, 1.0, 1, 0.0, LabelGrid(8.0, 201), 2.0, snapshots=21)
    assert run.blowup is not None
    for st in run.states[:-1]:
        assert st.Gamma.min() > 0
        assert np.all(np.diff(st.x) > 0)


@pytest.mark.parametrize("datum, message", [
    (InitialDatum(lambda x: 1.0 + np.exp(-np.square(x)), lambda x: 0.0 * x, lambda x: 0.0 * x),
     "non-neutral initial field"),
    (InitialDatum.nonexistence(1.0), "does not decay"),
    (InitialDatum.gaussian(1.0, -2.0, 0.0), "initial density must be positive"),
])
def test_rejected_data(datum, message):
    with pytest.raises(InvalidInput, match=message):
        solve_characteristics(datum, 1.0, 1, 0.0, LabelGrid(8.0, 201), 1.0)


@pytest.mark.parametrize("kwargs", [{"horizon": 0.0}, {"k": 0}, {"nu": -1.0}])
def test_invalid_solver_arguments(smooth_datum, kwargs):
    args = dict(datum=smooth_datum, c_bar=1.0, k=1, nu=0.0, grid=LabelGrid(8.0, 51), horizon=1.0)
    args.update(kwargs)
    with pytest.raises(InvalidInput):
        solve_characteristics(**args)


def test_label_grid_needs_three_labels():
    with pytest.raises(InvalidInput):
        LabelGrid(8.0, 2).alpha()


def test_sampled_datum():
    x = np.linspace(-8.0, 8.0, 401)
    datum = InitialDatum.from_samples(x, 1.0 + 0.0 * x, 0.1 * np.exp(-x * x))
    assert float(datum.du0(0.5)) == pytest.approx(-0.1 * np.exp(-0.25), abs=1e-3)
    with pytest.raises(InvalidInput, match="share one grid"):
        InitialDatum.from_samples(x, np.ones(3), np.zeros(3))


def test_fluid_state_frame(smooth_datum):
    run = solve_characteristics(smooth_datum, 1.0, 1, 0.0, LabelGrid(8.0, 51), 0.5, snapshots=2)
    frame = fluid_state_frame(run.states[-1])
    assert list(frame.columns) == ["alpha", "x", "rho", "u", "Gamma", "E"]
    assert len(frame) == 51


# --- diagnostics ----------------------------------------------------------------------

def test_anomalous_datum_diverges_in_L1():
    report = anomalous_demo([1e2, 1e3, 1e4], t=0.1)
    assert report.divergent
    assert 0.2 < report.slope < 0.35
    assert report.control_spread < 1e-6
    assert list(report.frame.columns) == ["R", "J", "J_abs"]


def test_nonexistence_jump():
    t = 0.5 * math.pi
    report = nonexistence_demo(1.0, t, [1e2, 1e3])
    assert report.limit == pytest.approx(math.pi)
    assert report.limit_numeric == pytest.approx(math.pi, abs=1e-6)
    assert report.nonzero
    deltas = report.frame["delta"].to_numpy()
    assert deltas == pytest.approx([2.0 * math.atan(1e2), 2.0 * math.atan(1e3)], rel=1e-7)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
