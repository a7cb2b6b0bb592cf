#!/usr/bin/env python3
"""
test_coldion.py
---------------
Cold-ion energy machinery: U/V and inverses, the Maxwell-Boltzmann Poisson
solver, energy bounds and the global-regularity reduction.
"""

import math
import sys

import numpy as np
import pytest

import coldion
from coldion import (
    ColdIonSetup, U_eval, V_eval, V_inverse, breakdown_display_check, damping_requirement,
    energy, global_regularity_check, linearized_potential, potential_bounds, potential_frame,
    solve_poisson_MB,
)
from core import SUPERCRITICAL, InvalidInput, NumericalFailure, Params
from thresholds import RegionClassifier, closing_condition, gamma_exponent


def bump_profile(points, amp=0.5, half_width=10.0):
    x = np.linspace(-half_width, half_width, points)
    return x, 1.0 + amp * np.exp(-x ** 2)


# --- U and V ------------------------------------------------------------------------

def test_U_values():
    assert U_eval(0.0) == 0.0
    assert U_eval(1.0) == pytest.approx(1.0)
    assert U_eval(-1.0) == pytest.approx(1.0 - 2.0 / math.e)


def test_U_series_branch():
    r = 0.005
    assert U_eval(r) == pytest.approx(r ** 2 / 2 + r ** 3 / 3 + r ** 4 / 8 + r ** 5 / 30, rel=1e-9)
    edge = 0.0099
    assert U_eval(edge) == pytest.approx((edge - 1.0) * math.exp(edge) + 1.0, rel=1e-8)
    assert U_eval(np.array([-0.5, 0.0, 0.5])).shape == (3,)


@pytest.mark.parametrize("z", [0.1, -0.1])
def test_V_small_argument(z):
    assert V_eval(z) == pytest.approx(z * z / 2 + z ** 3 / 9, abs=5e-5)


@pytest.mark.parametrize("branch", ["plus", "minus"])
@pytest.mark.parametrize("level", [1e-4, 0.3, 2.0])
def test_V_inverse_round_trip(branch, level):
    z = V_inverse(branch, level)
    assert (z > 0) if branch == "plus" else (z < 0)
    assert V_eval(z) == pytest.approx(level, rel=1e-10)


def test_V_inverse_rejects_bad_input():
    assert V_inverse("plus", 0.0) == 0.0
    with pytest.raises(InvalidInput):
        V_inverse("sideways", 1.0)
    with pytest.raises(InvalidInput):
        V_inverse("plus", -1.0)


def test_potential_bounds():
    assert potential_bounds(0.0) == (1.0, 1.0)
    cm, cp = potential_bounds(1e-4)
    assert cm < 1.0 < cp
    assert cp / cm == pytest.approx(1.0 + 2.0 * math.sqrt(2e-4), abs=1e-3)
    assert potential_bounds(0.01) == pytest.approx((0.8661628, 1.1493962), rel=1e-6)
    with pytest.raises(InvalidInput):
        potential_bounds(-1.0)


# --- Poisson -------------------------------------------------------------------------

def test_flat_density_gives_zero_potential():
    assert not solve_poisson_MB(np.ones(101), 0.1).any()


def test_poisson_discrete_identity():
    x, rho = bump_profile(401)
    h = x[1] - x[0]
    phi = solve_poisson_MB(rho, h)
    assert phi[0] == 0.0 and phi[-1] == 0.0
    lap = (phi[:-2] - 2.0 * phi[1:-1] + phi[2:]) / h ** 2
    assert np.max(np.abs(-lap + np.exp(phi[1:-1]) - rho[1:-1])) <= 1e-10


def test_poisson_maximum_principle():
    x, rho = bump_profile(401, amp=2.0)
    phi = solve_poisson_MB(rho, x[1] - x[0])
    assert phi.min() >= -1e-10
    assert phi.max() <= math.log(rho.max()) + 1e-12


def test_linearization_for_small_bump():
    x, rho = bump_profile(401, amp=1e-4)
    h = x[1] - x[0]
    assert np.max(np.abs(solve_poisson_MB(rho, h) - linearized_potential(rho, h))) <= 1e-7


def test_second_order_convergence():
    def profile(points):
        x, rho = bump_profile(points)
        return solve_poisson_MB(rho, x[1] - x[0])

    ref = profile(3201)
    e1 = np.max(np.abs(profile(201) - ref[::16]))
    e2 = np.max(np.abs(profile(401) - ref[::8]))
    assert 3.5 <= e1 / e2 <= 4.5


def test_newton_stall_is_reported(monkeypatch):
    monkeypatch.setattr(coldion, "NEWTON_MAX_ITER", 1)
    x, rho = bump_profile(201, amp=50.0)
    with pytest.raises(NumericalFailure, match="Newton stalled"):
        solve_poisson_MB(rho, x[1] - x[0])


def test_poisson_rejects_nonpositive_density():
    with pytest.raises(InvalidInput):
        solve_poisson_MB(np.array([1.0, 0.0, 1.0]), 0.1)


# --- energy and regularity -----------------------------------------------------------

def test_kinetic_energy_of_flat_density():
    u_amp = 0.2 / (math.pi / 2.0) ** 0.25
    setup = ColdIonSetup.gaussian(10.0, 2001, 0.0, u_amp, 0.5)
    report = energy(setup)
    assert report.H == pytest.approx(0.02, rel=1e-8)
    assert report.field == 0.0 and report.internal == 0.0
    assert report.c_minus < 1.0 < report.c_plus


def test_energy_parts_are_nonnegative():
    report = energy(ColdIonSetup.gaussian(15.0, 601, 0.3, 0.1, 0.5))
    assert min(report.kinetic, report.field, report.internal) > 0
    assert report.H == pytest.approx(report.kinetic + report.field + report.internal)
    assert set(report.to_dict()) == {"H", "kinetic", "field", "internal", "c_minus", "c_plus"}


def test_small_damped_datum_is_global():
    report = global_regularity_check(ColdIonSetup.gaussian(20.0, 801, 0.001, 0.001, 0.5))
    assert report.closing.holds
    assert report.verdict == "global"
    assert report.failing == []
    assert report.points == 801


def test_undamped_datum_is_not_guaranteed():
    report = global_regularity_check(ColdIonSetup.gaussian(20.0, 801, 0.001, 0.001, 0.0))
    assert not report.closing.holds
    assert report.verdict == "not guaranteed"


def test_large_datum_is_not_guaranteed():
    report = global_regularity_check(ColdIonSetup.gaussian(20.0, 801, 0.5, 3.0, 0.5))
    assert report.verdict == "not guaranteed"
    assert report.to_dict()["verdict"] == "not guaranteed"


def test_damping_requirement_closes():
    H0 = 1e-3
    nu = damping_requirement(H0)
    cm, cp = potential_bounds(H0)
    assert gamma_exponent(cp, nu) == pytest.approx(2.0 * (cp / cm - 1.0), rel=1e-9)
    assert closing_condition(Params(nu * (1.0 + 1e-6), 1, cm, cp)).holds
    assert damping_requirement(0.0) == 0.0


def test_display_matches_undamped_classifier():
    cm, cp = 1.0, 1.2
    rho0, du0 = np.meshgrid(np.linspace(0.6, 1.5, 40), np.linspace(-2.0, 2.0, 40))
    rho0, du0 = rho0.ravel(), du0.ravel()
    fails = breakdown_display_check(rho0, du0, cm, cp)
    labels, margins, _ = RegionClassifier(Params(0.0, 1, cm, cp)).classify_many(du0 / rho0, 1.0 / rho0)
    clear = np.abs(margins) > 1e-6
    assert np.array_equal(fails[clear], (labels == SUPERCRITICAL)[clear])
    assert fails.any() and not fails.all()


# --- setup ----------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs, message", [
    ({"x": np.array([0.0, 1.0]), "rho0": np.ones(2), "u0": np.zeros(2)}, "at least 3"),
    ({"x": np.array([0.0, 1.0, 3.0]), "rho0": np.ones(3), "u0": np.zeros(3)}, "uniform"),
    ({"x": np.arange(3.0), "rho0": np.ones(4), "u0": np.zeros(3)}, "sampled on the grid"),
    ({"x": np.arange(3.0), "rho0": np.array([1.0, -1.0, 1.0]), "u0": np.zeros(3)}, "positive"),
    ({"x": np.arange(3.0), "rho0": np.array([1.1, 1.0, 1.0]), "u0": np.zeros(3)}, "far-field"),
])
def test_setup_validation(kwargs, message):
    with pytest.raises(InvalidInput, match=message):
        ColdIonSetup(nu=0.5, **kwargs)


def test_setup_rejects_negative_damping():
    with pytest.raises(InvalidInput):
        ColdIonSetup.gaussian(10.0, 101, 0.1, 0.1, -0.5)


def test_potential_frame():
    setup = ColdIonSetup.gaussian(10.0, 201, 0.1, 0.1, 0.5)
    frame = potential_frame(setup, energy(setup))
    assert list(frame.columns) == ["x", "rho0", "u0", "phi"]
    assert len(frame) == 201
    assert setup.to_dict()["points"] == 201


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
