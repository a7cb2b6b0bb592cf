#!/usr/bin/env python3
"""
test_core.py
------------
Parameter validation, background profiles and JSON codecs.
"""

import math
import sys

import numpy as np
import pytest

from core import (
    BackgroundSpec, InvalidInput, NumericalFailure, Params, PhasePoint, Verdict,
    background_bounds_consistent, background_eval, background_from_dict, background_function,
    background_to_dict, params_from_dict, params_to_dict, random_sinusoid,
    validate_params, validate_point,
)


def test_valid_params_pass_through():
    p = Params(nu=0.5, k=1, c_minus=1.0, c_plus=1.2)
    assert validate_params(p) is p
    assert not p.is_constant
    assert Params.constant(2.0).is_constant


@pytest.mark.parametrize("params, message", [
    (Params(0.0, 1, 1.2, 1.0), "bounds out of order"),
    (Params(-0.1, 1, 1.0, 1.0), "damping"),
    (Params(0.0, 1, 0.0, 1.0), "lower bound"),
    (Params(0.0, 0, 1.0, 1.0), "force sign"),
])
def test_invalid_params(params, message):
    with pytest.raises(InvalidInput, match=message):
        validate_params(params)


def test_error_hierarchy():
    assert issubclass(InvalidInput, ValueError)
    assert issubclass(NumericalFailure, RuntimeError)


@pytest.mark.parametrize("point", [PhasePoint(0.0, 0.0), PhasePoint(1.0, -1.0),
                                   PhasePoint(math.nan, 1.0)])
def test_invalid_points(point):
    with pytest.raises(InvalidInput):
        validate_point(point)


def test_sinusoid_evaluation():
    spec = BackgroundSpec.sinusoid(1.0, 0.05, omega=2.0, phase=0.3)
    for t in (0.0, 0.7, 12.5):
        expected = 1.0 + 0.05 * math.sin(2.0 * t + 0.3)
        assert background_eval(spec, t) == pytest.approx(expected, abs=1e-15)
        assert background_function(spec)(t) == pytest.approx(expected, abs=1e-15)
    assert spec.declared_bounds == pytest.approx((0.95, 1.05))


def test_table_interpolation_and_range():
    spec = BackgroundSpec.table([0.0, 1.0, 2.0], [1.0, 2.0, 1.5])
    assert background_eval(spec, 0.5) == pytest.approx(1.5)
    assert background_eval(spec, 1.5) == pytest.approx(1.75)
    assert spec.declared_bounds == (1.0, 2.0)
    with pytest.raises(InvalidInput, match="background out of range"):
        background_eval(spec, 2.5)


def test_table_rejects_unordered_times():
    with pytest.raises(InvalidInput):
        BackgroundSpec.table([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])


def test_negative_time_rejected():
    with pytest.raises(InvalidInput):
        background_eval(BackgroundSpec.constant(1.0), -1.0)


def test_bounds_consistency():
    params = Params(0.0, 1, 1.0, 1.2)
    background_bounds_consistent(BackgroundSpec.sinusoid(1.1, 0.1), params)
    with pytest.raises(InvalidInput):
        background_bounds_consistent(BackgroundSpec.sinusoid(1.1, 0.2), params)


def test_random_sinusoids_stay_inside_bounds():
    rng = np.random.default_rng(7)
    params = Params(0.0, 1, 0.8, 1.3)
    for _ in range(200):
        spec = random_sinusoid(rng, params.c_minus, params.c_plus)
        background_bounds_consistent(spec, params)
        assert 0.2 <= spec.omega <= 3.0
        assert 0.0 <= spec.phase < 2.0 * math.pi


@pytest.mark.parametrize("spec", [
    BackgroundSpec.constant(1.3),
    BackgroundSpec.sinusoid(1.0, 0.05, 1.0, 0.25),
    BackgroundSpec.table([0.0, 2.0], [1.0, 1.1]),
])
def test_background_codec(spec):
    assert background_from_dict(background_to_dict(spec)) == spec


def test_malformed_background():
    with pytest.raises(InvalidInput):
        background_from_dict({"kind": "sinusoid", "mean": 1.0})
    with pytest.raises(InvalidInput, match="unknown background kind"):
        background_from_dict({"kind": "square"})


def test_params_codec():
    p = Params(0.5, -1, 1.0, 4.0)
    assert params_from_dict(params_to_dict(p)) == p
    with pytest.raises(InvalidInput):
        params_from_dict({"nu": 0.0})
    with pytest.raises(InvalidInput, match="bounds out of order"):
        params_from_dict({"c_minus": 2.0, "c_plus": 1.0})


def test_verdict_dict():
    assert Verdict("subcritical", 0.25, "rep-#2.2").to_dict() == {
        "verdict": "subcritical", "margin": 0.25, "case_tag": "rep-#2.2"}


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
