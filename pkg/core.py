"""
core.py
-------
Shared domain types for the critical-threshold toolkit: damping/background
parameters, background profiles c(t), phase-plane points (w, s) and
classification verdicts, plus the error hierarchy used by every module.

The background is evaluated along one characteristic, so a profile is a
function of t only. Three kinds are supported:

    constant   c(t) = value
    sinusoid   c(t) = mean + amplitude * sin(omega * t + phase)
    table      piecewise-linear interpolation of sampled (t, c) pairs

JSON encoding of a background:

    {"kind": "constant", "value": 1.0}
    {"kind": "sinusoid", "mean": 1.0, "amplitude": 0.05, "omega": 1.0, "phase": 0.0}
    {"kind": "table", "t": [...], "c": [...]}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Tuple

import numpy as np


SUBCRITICAL = "subcritical"
SUPERCRITICAL = "supercritical"
INDETERMINATE = "indeterminate"

BOUND_SLACK = 1e-12


class CriticalThresholdError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInput(CriticalThresholdError, ValueError):
    """A precondition on parameters, points, profiles or configuration failed."""


class NumericalFailure(CriticalThresholdError, RuntimeError):
    """A solver could not deliver a result (step underflow, stalled Newton, ...)."""


@dataclass(frozen=True)
class Params:
    """Damping nu, force sign k (+1 repulsive, -1 attractive) and background bounds."""
    nu: float
    k: int
    c_minus: float
    c_plus: float

    @classmethod
    def constant(cls, c_bar: float, nu: float = 0.0, k: int = 1) -> "Params":
        return cls(nu=nu, k=k, c_minus=c_bar, c_plus=c_bar)

    @property
    def is_constant(self) -> bool:
        return self.c_minus == self.c_plus


@dataclass(frozen=True)
class PhasePoint:
    w: float
    s: float


@dataclass(frozen=True)
class Verdict:
    label: str
    margin: float
    case_tag: str = "none"

    def to_dict(self) -> dict:
        return {"verdict": self.label, "margin": self.margin, "case_tag": self.case_tag}


@dataclass(frozen=True)
class BackgroundSpec:
    kind: str
    value: float = 1.0
    mean: float = 1.0
    amplitude: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    t_table: Tuple[float, ...] = field(default_factory=tuple)
    c_table: Tuple[float, ...] = field(default_factory=tuple)
    declared_bounds: Tuple[float, float] = (0.0, 0.0)

    @classmethod
    def constant(cls, value: float) -> "BackgroundSpec":
        return cls(kind="constant", value=float(value),
                   declared_bounds=(float(value), float(value)))

    @classmethod
    def sinusoid(cls, mean: float, amplitude: float, omega: float = 1.0,
                 phase: float = 0.0) -> "BackgroundSpec":
        a = abs(float(amplitude))
        return cls(kind="sinusoid", mean=float(mean), amplitude=float(amplitude),
                   omega=float(omega), phase=float(phase),
                   declared_bounds=(float(mean) - a, float(mean) + a))

    @classmethod
    def table(cls, t, c) -> "BackgroundSpec":
        t = tuple(float(v) for v in t)
        c = tuple(float(v) for v in c)
        if len(t) != len(c) or len(t) < 2:
            raise InvalidInput("table background needs at least two (t, c) pairs of equal length")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise InvalidInput("table background times must be strictly increasing")
        return cls(kind="table", t_table=t, c_table=c,
                   declared_bounds=(min(c), max(c)))


def validate_params(raw: Params) -> Params:
    """Return `raw` unchanged when every parameter invariant holds."""
    if not math.isfinite(raw.nu) or raw.nu < 0:
        raise InvalidInput(f"damping must be nonnegative, got nu={raw.nu}")
    if not raw.c_minus > 0:
        raise InvalidInput(f"background lower bound must be positive, got c_minus={raw.c_minus}")
    if raw.c_plus < raw.c_minus:
        raise InvalidInput("bounds out of order")
    if raw.k not in (-1, 1):
        raise InvalidInput(f"force sign must be -1 or +1, got k={raw.k}")
    return raw


def validate_point(point: PhasePoint) -> PhasePoint:
    if not (math.isfinite(point.w) and math.isfinite(point.s)):
        raise InvalidInput(f"non-finite phase point {point}")
    if point.s <= 0:
        raise InvalidInput(f"reciprocal density must be positive, got s={point.s}")
    return point


def background_eval(spec: BackgroundSpec, t: float) -> float:
    """Value of the background profile at time t >= 0."""
    if t < 0:
        raise InvalidInput(f"background queried at negative time t={t}")
    if spec.kind == "constant":
        return spec.value
    if spec.kind == "sinusoid":
        return spec.mean + spec.amplitude * math.sin(spec.omega * t + spec.phase)
    if spec.kind == "table":
        if t < spec.t_table[0] or t > spec.t_table[-1]:
            raise InvalidInput("background out of range")
        return float(np.interp(t, spec.t_table, spec.c_table))
    raise InvalidInput(f"unknown background kind: {spec.kind}")


def background_function(spec: BackgroundSpec) -> Callable[[float], float]:
    """Specialized scalar callable c(t) for use inside vector fields."""
    if spec.kind == "constant":
        value = spec.value
        return lambda t: value
    if spec.kind == "sinusoid":
        mean, amp, omega, phase = spec.mean, spec.amplitude, spec.omega, spec.phase
        return lambda t: mean + amp * math.sin(omega * t + phase)
    return lambda t: background_eval(spec, t)


def background_bounds_consistent(spec: BackgroundSpec, params: Params) -> BackgroundSpec:
    lo, hi = spec.declared_bounds
    if lo < params.c_minus - BOUND_SLACK or hi > params.c_plus + BOUND_SLACK:
        raise InvalidInput(
            f"background bounds ({lo}, {hi}) exceed [{params.c_minus}, {params.c_plus}]"
        )
    return spec


def random_sinusoid(rng: np.random.Generator, c_minus: float, c_plus: float) -> BackgroundSpec:
    """Random sinusoid whose range stays inside [c_minus, c_plus]."""
    mean = float(rng.uniform(c_minus, c_plus))
    amplitude = float(rng.uniform(0.0, min(mean - c_minus, c_plus - mean)))
    omega = float(rng.uniform(0.2, 3.0))
    phase = float(rng.uniform(0.0, 2.0 * math.pi))
    return BackgroundSpec.sinusoid(mean, amplitude, omega, phase)


# --- JSON codecs -----------------------------------------------------------

def background_to_dict(spec: BackgroundSpec) -> dict:
    if spec.kind == "constant":
        return {"kind": "constant", "value": spec.value}
    if spec.kind == "sinusoid":
        return {"kind": "sinusoid", "mean": spec.mean, "amplitude": spec.amplitude,
                "omega": spec.omega, "phase": spec.phase}
    return {"kind": "table", "t": list(spec.t_table), "c": list(spec.c_table)}


def background_from_dict(data: dict) -> BackgroundSpec:
    try:
        kind = data["kind"]
        if kind == "constant":
            return BackgroundSpec.constant(data["value"])
        if kind == "sinusoid":
            return BackgroundSpec.sinusoid(data["mean"], data["amplitude"],
                                           data.get("omega", 1.0), data.get("phase", 0.0))
        if kind == "table":
            return BackgroundSpec.table(data["t"], data["c"])
    except (KeyError, TypeError) as e:
        raise InvalidInput(f"malformed background: {e}") from e
    raise InvalidInput(f"unknown background kind: {kind}")


def params_to_dict(params: Params) -> dict:
    return asdict(params)


def params_from_dict(data: dict) -> Params:
    try:
        k = data.get("k", 1)
        if k not in (-1, 1):
            raise InvalidInput(f"force sign must be -1 or +1, got k={k}")
        raw = Params(nu=float(data.get("nu", 0.0)), k=int(k),
                     c_minus=float(data["c_minus"]), c_plus=float(data["c_plus"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InvalidInput):
            raise
        raise InvalidInput(f"malformed params: {e}") from e
    return validate_params(raw)


def default_background(params: Params) -> BackgroundSpec:
    """Constant profile at c_minus when the config leaves the background out."""
    return BackgroundSpec.constant(params.c_minus)


def optional_float(value) -> Optional[float]:
    return None if value is None else float(value)
