#!/usr/bin/env python3
"""
test_attractive.py
------------------
Saddle eigensystem, exact solution and threshold classification for k = -1.
"""

import math
import sys

import numpy as np
import pytest

from attractive import (
    attractive_blowup_time, borderline_check, classify_attractive, eigensystem,
    exact_attractive_path, exact_attractive_solution, lyapunov_coordinates, sweep_attractive,
)
from core import (
    INDETERMINATE, SUBCRITICAL, SUPERCRITICAL, BackgroundSpec, InvalidInput, Params, PhasePoint,
)
from odeint import IntegratorOptions
from phaseplane import simulate_ws
from thresholds import SWEEP_COLUMNS, SweepGrid

TIGHT = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-13)


@pytest.mark.parametrize("nu, c_bar", [(0.0, 1.0), (0.5, 2.0), (3.0, 0.7)])
def test_eigenvalues(nu, c_bar):
    eig = eigensystem(nu, c_bar)
    assert eig.lambda_s < 0 < eig.lambda_u
    assert eig.lambda_s + eig.lambda_u == pytest.approx(-nu)
    assert eig.lambda_s * eig.lambda_u == pytest.approx(-c_bar)


def test_eigensystem_rejects_bad_input():
    with pytest.raises(InvalidInput):
        eigensystem(0.0, 0.0)


def test_exact_path_starts_at_point():
    start = exact_attractive_solution(PhasePoint(0.3, 1.5), 0.5, 2.0, 0.0)
    assert start.w == pytest.approx(0.3)
    assert start.s == pytest.approx(1.5)


@pytest.mark.parametrize("nu, c_bar", [(0.0, 1.0), (1.0, 4.0)])
def test_exact_path_matches_integration(nu, c_bar):
    point = PhasePoint(0.3, 1.5)
    params = Params.constant(c_bar, nu=nu, k=-1)
    out = simulate_ws(point, params, BackgroundSpec.constant(c_bar), 3.0, TIGHT)
    t, y = out.trajectory.sample(200)
    w, s = exact_attractive_path(point, nu, c_bar, t)
    scale = max(1.0, float(np.max(np.abs(s))))
    assert np.max(np.abs(y[:, 0] - w)) <= 1e-7 * scale
    assert np.max(np.abs(y[:, 1] - s)) <= 1e-7 * scale


def test_lyapunov_coordinates_evolve_exponentially():
    point = PhasePoint(-0.2, 0.8)
    eig = eigensystem(0.5, 1.5)
    L_s0, L_u0 = lyapunov_coordinates(point.w, point.s, eig, 1.5)
    w, s = exact_attractive_path(point, 0.5, 1.5, 1.3)
    L_s, L_u = lyapunov_coordinates(w, s, eig, 1.5)
    assert L_s == pytest.approx(L_s0 * math.exp(eig.lambda_u * 1.3))
    assert L_u == pytest.approx(L_u0 * math.exp(eig.lambda_s * 1.3))


def test_blowup_time_closed_form():
    assert attractive_blowup_time(PhasePoint(-1.0, 1.0), 0.0, 1.0) == pytest.approx(math.asinh(1.0))


@pytest.mark.parametrize("point", [PhasePoint(-1.0, 1.0), PhasePoint(0.2, 0.3), PhasePoint(-3.0, 2.0)])
def test_blowup_time_matches_integration(point):
    params = Params.constant(2.0, nu=0.7, k=-1)
    expected = attractive_blowup_time(point, 0.7, 2.0)
    assert expected is not None
    out = simulate_ws(point, params, BackgroundSpec.constant(2.0), expected + 5.0, TIGHT)
    assert out.t_star == pytest.approx(expected, abs=1e-7)


def test_stable_manifold_start_never_blows_up():
    point = PhasePoint(-0.5, 1.5)
    assert attractive_blowup_time(point, 0.0, 1.0) is None
    verdict = classify_attractive(point, Params.constant(1.0, k=-1))
    assert verdict.label == SUBCRITICAL
    assert verdict.case_tag == "attractive-borderline"


@pytest.mark.parametrize("point, label, tag", [
    (PhasePoint(1.0, 0.5), SUBCRITICAL, "attractive-sub"),
    (PhasePoint(0.0, 1.0), SUBCRITICAL, "attractive-borderline"),
    (PhasePoint(-2.0, 0.5), SUPERCRITICAL, "attractive-sup"),
])
def test_variable_background_classification(point, label, tag):
    verdict = classify_attractive(point, Params(0.0, -1, 1.0, 4.0))
    assert verdict.label == label
    assert verdict.case_tag == tag


def test_gap_between_thresholds_is_indeterminate():
    # L_s^- < 0 but L_s^+ > 0
    verdict = classify_attractive(PhasePoint(-0.3, 1.0), Params(0.0, -1, 1.0, 4.0))
    assert verdict.label == INDETERMINATE


def test_classification_needs_attractive_force():
    with pytest.raises(InvalidInput):
        classify_attractive(PhasePoint(0.0, 1.0), Params.constant(1.0))


def test_sweep_attractive():
    grid = SweepGrid(-2.0, 2.0, 0.0, 2.0, 10, 10)
    frame = sweep_attractive(grid, Params.constant(1.0, k=-1), jobs=2)
    assert list(frame.columns) == SWEEP_COLUMNS
    assert len(frame) == 100
    assert {SUBCRITICAL, SUPERCRITICAL} <= set(frame["verdict"])
    sub = frame[frame["verdict"] == SUBCRITICAL]
    assert (sub["w0"] + (sub["s0"] - 1.0) >= 0).all()


def test_borderline_check():
    x = np.linspace(-5.0, 5.0, 101)
    du0 = np.sin(x) * np.exp(-x * x)
    lam_u = eigensystem(0.5, 1.0).lambda_u
    assert borderline_check(1.0 + lam_u * du0, du0, 0.5, 1.0).is_borderline
    report = borderline_check(1.0 + lam_u * du0 + 1e-3, du0, 0.5, 1.0)
    assert not report.is_borderline
    assert report.max_residual == pytest.approx(1e-3)
    with pytest.raises(InvalidInput):
        borderline_check(np.ones(3), np.ones(4), 0.5, 1.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
