#!/usr/bin/env python3
"""
ct.py
-----
Command-line front end of the critical-threshold toolkit.

Every run is described by one JSON config (see configs/); flags override the
config values. Results go to --out (default results/<command>.<ext>) as CSV,
JSON or SVG, written atomically. The RNG seed and the command are recorded in
every output.

Usage examples
--------------
# Verdict for one phase point
python ct.py classify --nu 0.5 --c-minus 1 --c-plus 1.2 --w0 -1 --s0 0.5

# 200 x 200 verdict map of the constant-background problem
python ct.py sweep --config configs/sweep_constant.json

# Same map as a figure with the threshold curves
python ct.py sweep --config configs/sweep_constant.json --format svg

# Resonant blow-up of the pumped equilibrium
python ct.py resonance --epsilon 0.05

# Cold-ion global regularity report
python ct.py coldion --config configs/coldion_small.json

# Seeded breakdown-bound check
python ct.py verify --config configs/verify_breakdown.json --seed 7 --jobs 4

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Failures also
print a one-line JSON object {"error", "message", "exit_code"} on stderr.
"""

import sys
import os
import json
import math
import logging
import argparse
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd

from core import (
    SUPERCRITICAL, BackgroundSpec, InvalidInput, NumericalFailure,
    Params, PhasePoint, background_from_dict, background_to_dict, default_background,
    optional_float, params_from_dict, params_to_dict, validate_point,
)
from odeint import IntegratorOptions
from thresholds import (
    DEFAULT_TOL, SweepGrid, breakdown_time_bound, classifier_curves, classifier_for,
    closing_condition, curve_frame, domain_endpoints, region_sweep, s_tilde, sweep_classifier,
)
from phaseplane import (
    check_comparison, resonance_demo, simulate_batch, simulate_ws, trajectory_frame,
    verify_breakdown_bounds, verify_invariance,
)
from attractive import attractive_blowup_time, classify_attractive, sweep_attractive
from characteristics import (
    InitialDatum, LabelGrid, anomalous_demo, fluid_state_frame, gamma_first_zero,
    neutrality_report, nonexistence_demo, solve_characteristics,
)
from coldion import (
    ColdIonSetup, damping_requirement, energy, global_regularity_check, potential_frame,
)
from plotting import emit_phase_svg, emit_profile_svg, emit_svg

logger = logging.getLogger("ct")

COMMANDS = ("classify", "sweep", "simulate", "thresholds", "resonance",
            "characteristics", "coldion", "verify")
DEFAULT_FORMATS = {
    "classify": "json", "sweep": "csv", "simulate": "json", "thresholds": "csv",
    "resonance": "json", "characteristics": "json", "coldion": "json", "verify": "csv",
}
DEFAULT_SEED = 20240101
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class RunConfig:
    command: str
    params: Params = field(default_factory=lambda: Params(nu=0.0, k=1, c_minus=1.0, c_plus=1.0))
    background: Optional[BackgroundSpec] = None
    options: dict = field(default_factory=dict)
    out: Optional[str] = None
    format: Optional[str] = None
    seed: int = DEFAULT_SEED
    jobs: int = 1

    RESERVED = ("command", "params", "background", "out", "format", "seed", "jobs")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        command = data.get("command")
        if command not in COMMANDS:
            raise InvalidInput(f"unknown command: {command}")
        params = params_from_dict(data.get("params", {"c_minus": 1.0, "c_plus": 1.0}))
        background = background_from_dict(data["background"]) if data.get("background") else None
        fmt = data.get("format")
        if fmt is not None and fmt not in ("csv", "json", "svg"):
            raise InvalidInput(f"unknown format: {fmt}")
        try:
            seed = int(data.get("seed", DEFAULT_SEED))
            jobs = int(data.get("jobs", 1))
        except (TypeError, ValueError) as e:
            raise InvalidInput(f"malformed config: {e}") from e
        if jobs < 1:
            raise InvalidInput("jobs must be at least 1")
        options = {k: v for k, v in data.items() if k not in cls.RESERVED}
        return cls(command=command, params=params, background=background, options=options,
                   out=data.get("out"), format=fmt, seed=seed, jobs=jobs)

    def to_dict(self) -> dict:
        data = {"command": self.command, "params": params_to_dict(self.params)}
        if self.background is not None:
            data["background"] = background_to_dict(self.background)
        data.update(self.options)
        data.update({"out": self.out, "format": self.format, "seed": self.seed, "jobs": self.jobs})
        return data

    def option(self, name: str, default=None):
        return self.options.get(name, default)

    def resolved_format(self) -> str:
        return self.format or DEFAULT_FORMATS[self.command]

    def resolved_out(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path("results") / f"{self.command}.{self.resolved_format()}"

    def point(self) -> PhasePoint:
        try:
            point = PhasePoint(float(self.options["w0"]), float(self.options["s0"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInput(f"command '{self.command}' needs numeric w0 and s0") from e
        return validate_point(point)

    def integrator(self) -> IntegratorOptions:
        base = IntegratorOptions()
        return IntegratorOptions(
            rel_tol=float(self.option("rel_tol", base.rel_tol)),
            abs_tol=float(self.option("abs_tol", base.abs_tol)),
        )

    def bg(self) -> BackgroundSpec:
        return self.background or default_background(self.params)


@dataclass
class CommandResult:
    data: dict
    frame: Optional[pd.DataFrame] = None
    figure: Optional[Callable[[str], str]] = None


# --- commands -----------------------------------------------------------------

def _classify(cfg: RunConfig) -> CommandResult:
    point = cfg.point()
    tol = float(cfg.option("tol", DEFAULT_TOL))
    params = cfg.params
    if params.k == -1:
        verdict = classify_attractive(point, params, tol)
        blowup = None
        if params.is_constant and verdict.label == SUPERCRITICAL:
            blowup = attractive_blowup_time(point, params.nu, params.c_minus)
        data = {**verdict.to_dict(), "blowup_time": blowup, "bound": None}
    else:
        classifier = classifier_for(params, point.s)
        verdict = classifier.classify(point, tol)
        data = {**verdict.to_dict(), "blowup_time": None,
                "bound": breakdown_time_bound(point, params, classifier)}
    data.update({"w0": point.w, "s0": point.s})
    return CommandResult(data, pd.DataFrame([data]))


def _sweep_grid(cfg: RunConfig) -> SweepGrid:
    raw = cfg.option("grid", {})
    try:
        return SweepGrid(float(raw.get("w_min", -3.0)), float(raw.get("w_max", 3.0)),
                         float(raw.get("s_min", 0.0)), float(raw.get("s_max", 3.0)),
                         int(raw.get("nw", 200)), int(raw.get("ns", 200)))
    except (TypeError, ValueError, AttributeError) as e:
        raise InvalidInput(f"malformed grid: {e}") from e


def _sweep(cfg: RunConfig) -> CommandResult:
    grid = _sweep_grid(cfg)
    tol = float(cfg.option("tol", DEFAULT_TOL))
    params = cfg.params
    classifier = sweep_classifier(grid, params) if params.k == 1 else None
    frame = (sweep_attractive(grid, params, tol, cfg.jobs) if params.k == -1
             else region_sweep(grid, params, tol, cfg.jobs, classifier))
    frame["blowup_time"] = np.nan
    frame["bound"] = np.nan
    sup = np.flatnonzero(frame["verdict"].to_numpy() == SUPERCRITICAL)
    curves = {}
    if params.k == 1:
        curves = classifier_curves(classifier)
        for i in sup:
            point = PhasePoint(frame.at[i, "w0"], frame.at[i, "s0"])
            frame.at[i, "bound"] = breakdown_time_bound(point, params, classifier)
        horizon = optional_float(cfg.option("blowup_horizon"))
        if horizon is not None and sup.size:
            starts = [PhasePoint(frame.at[i, "w0"], frame.at[i, "s0"]) for i in sup]
            outcomes = simulate_batch(starts, params, [cfg.bg()] * len(starts),
                                      [horizon] * len(starts), cfg.jobs, cfg.integrator())
            for i, out in zip(sup, outcomes):
                frame.at[i, "blowup_time"] = np.nan if out.t_star is None else out.t_star
    elif params.is_constant:
        for i in sup:
            t = attractive_blowup_time(PhasePoint(frame.at[i, "w0"], frame.at[i, "s0"]),
                                       params.nu, params.c_minus)
            frame.at[i, "blowup_time"] = np.nan if t is None else t

    counts = frame["verdict"].value_counts().to_dict() if len(frame) else {}
    title = f"Verdicts, nu={params.nu:g}, c in [{params.c_minus:g}, {params.c_plus:g}]"
    return CommandResult({"counts": counts, "cells": frame.to_dict(orient="records")}, frame,
                         lambda desc: emit_svg(frame, curves, title, desc))


def _simulate(cfg: RunConfig) -> CommandResult:
    point = cfg.point()
    params = cfg.params
    horizon = float(cfg.option("horizon", 50.0))
    outcome = simulate_ws(point, params, cfg.bg(), horizon, cfg.integrator(),
                          with_bound=params.k == 1)
    data = outcome.to_dict()
    mode = cfg.option("comparison")
    curves = {}
    if params.k == 1:
        if mode:
            data["comparison"] = check_comparison(outcome, params, mode).to_dict()
        curves = classifier_curves(classifier_for(params, point.s))
    frame = trajectory_frame(outcome)
    return CommandResult(data, frame, lambda desc: emit_phase_svg(
        {f"({point.w:g}, {point.s:g})": frame}, curves, "Reduced trajectory", desc))


def _thresholds(cfg: RunConfig) -> CommandResult:
    params = cfg.params
    if params.k != 1:
        raise InvalidInput("threshold curves belong to the repulsive system (k=+1)")
    s_max = float(cfg.option("s_max", 3.0))
    classifier = classifier_for(params, s_max)
    curves = classifier_curves(classifier)
    frame = pd.concat([curve_frame(c, name) for name, c in curves.items()], ignore_index=True)
    summary = {name: {"s_lo": c.s_lo, "s_hi": c.s_hi, "closed": c.closed,
                      "traversal_time": c.traversal_time} for name, c in curves.items()}
    cm, cp, nu = params.c_minus, params.c_plus, params.nu
    star = s_tilde(cp, nu)
    domain = (domain_endpoints(cp, cm, nu, star).to_dict()
              if math.isfinite(star) and star * cm > 1.0 else None)
    data = {"closing": closing_condition(params).to_dict(), "curves": summary, "domain": domain}
    empty = pd.DataFrame(columns=["w0", "s0", "verdict"])
    return CommandResult(data, frame, lambda desc: emit_svg(
        empty, curves, f"Threshold curves, nu={nu:g}, c in [{cm:g}, {cp:g}]", desc))


def _resonance(cfg: RunConfig) -> CommandResult:
    eps = float(cfg.option("epsilon", 0.05))
    outcome = resonance_demo(eps, float(cfg.option("horizon", 200.0)),
                             float(cfg.option("phase", 0.0)), cfg.integrator())
    data = {"epsilon": eps, **outcome.to_dict()}
    frame = trajectory_frame(outcome)
    return CommandResult(data, frame, lambda desc: emit_phase_svg(
        {f"eps={eps:g}": frame}, None, "Resonant background", desc))


def _datum(cfg: RunConfig, c_bar: float) -> InitialDatum:
    raw = cfg.option("datum", {"kind": "gaussian"})
    kind = raw.get("kind", "gaussian")
    if kind == "gaussian":
        return InitialDatum.gaussian(c_bar, float(raw.get("rho_amp", 0.2)),
                                     float(raw.get("u_amp", 0.3)), float(raw.get("width", 1.0)))
    if kind == "constant":
        return InitialDatum.constant(c_bar)
    raise InvalidInput(f"unknown datum kind: {kind}")


def _characteristics(cfg: RunConfig) -> CommandResult:
    params = cfg.params
    if not params.is_constant:
        raise InvalidInput("characteristic solver needs a constant background (c_minus == c_plus)")
    c_bar = params.c_minus
    demo = cfg.option("demo")
    if demo == "anomalous":
        report = anomalous_demo(cfg.option("R", [1e2, 1e3, 1e4, 1e5]),
                                float(cfg.option("t", 0.1)), c_bar)
        return CommandResult(report.to_dict(), report.frame)
    if demo == "nonexistence":
        report = nonexistence_demo(c_bar, float(cfg.option("t", math.pi / 2)),
                                   cfg.option("R", [1e1, 1e2, 1e3, 1e4]))
        return CommandResult(report.to_dict(), report.frame)
    if demo is not None:
        raise InvalidInput(f"unknown demo: {demo}")

    datum = _datum(cfg, c_bar)
    raw = cfg.option("labels", {})
    grid = LabelGrid(float(raw.get("half_width", 8.0)), int(raw.get("labels", 1001)))
    run = solve_characteristics(datum, c_bar, params.k, params.nu, grid,
                                float(cfg.option("horizon", 5.0)), cfg.integrator(),
                                int(cfg.option("snapshots", 11)), cfg.jobs)
    neutrality = neutrality_report(run.states, c_bar)
    data = {"blowup": None if run.blowup is None else {"t": run.blowup[0], "alpha": run.blowup[1]},
            "neutrality": neutrality.to_dict()}
    if params.k == 1 and params.nu == 0:
        first = gamma_first_zero(datum, c_bar, grid.alpha())
        data["closed_form_blowup"] = float(first.min()) if np.isfinite(first).any() else None
    frame = pd.concat([fluid_state_frame(st).assign(t=st.t) for st in run.states],
                      ignore_index=True)
    return CommandResult(data, frame, lambda desc: emit_profile_svg(
        frame, "x", ["rho", "u"], "Fluid state along characteristics", desc, group="t"))


def _coldion(cfg: RunConfig) -> CommandResult:
    raw = cfg.option("setup", {})
    setup = ColdIonSetup.gaussian(float(raw.get("half_width", 20.0)), int(raw.get("points", 801)),
                                  float(raw.get("rho_amp", 0.05)), float(raw.get("u_amp", 0.05)),
                                  cfg.params.nu, float(raw.get("width", 1.0)))
    report = global_regularity_check(setup, float(cfg.option("tol", DEFAULT_TOL)))
    data = {"setup": setup.to_dict(), **report.to_dict(),
            "damping_requirement": damping_requirement(report.H0)}
    frame = potential_frame(setup, energy(setup))
    return CommandResult(data, frame, lambda desc: emit_profile_svg(
        frame, "x", ["rho0", "u0", "phi"], "Cold-ion initial state", desc))


def _verify(cfg: RunConfig) -> CommandResult:
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.option("n", 200))
    check = cfg.option("check", "breakdown")
    if check == "breakdown":
        frame = verify_breakdown_bounds(cfg.params, n, rng, cfg.jobs, cfg.integrator())
    elif check == "invariance":
        frame = verify_invariance(cfg.params, n, rng, float(cfg.option("horizon", 100.0)),
                                  cfg.jobs, cfg.integrator())
    else:
        raise InvalidInput(f"unknown check: {check}")
    data = {"check": check, "n": n, "passed": int(frame["ok"].sum()),
            "all_ok": bool(frame["ok"].all())}
    return CommandResult(data, frame)


HANDLERS = {
    "classify": _classify, "sweep": _sweep, "simulate": _simulate,
    "thresholds": _thresholds, "resonance": _resonance,
    "characteristics": _characteristics, "coldion": _coldion, "verify": _verify,
}


# --- output -------------------------------------------------------------------

def _clean(value):
    """JSON-safe copy: numpy scalars to Python, NaN and inf to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(cfg: RunConfig, result: CommandResult) -> str:
    fmt = cfg.resolved_format()
    if fmt == "json":
        doc = {"command": cfg.command, "seed": cfg.seed, "config": cfg.to_dict(),
               "result": result.data}
        return json.dumps(_clean(doc), indent=2) + "\n"
    if fmt == "csv":
        if result.frame is None:
            raise InvalidInput(f"command '{cfg.command}' has no CSV output")
        header = f"# seed={cfg.seed} command={cfg.command}\n"
        return header + result.frame.to_csv(index=False, float_format="%.12g")
    if result.figure is None:
        raise InvalidInput(f"command '{cfg.command}' has no SVG output")
    return result.figure(f"seed={cfg.seed} command={cfg.command}")


def run(cfg: RunConfig) -> Path:
    """Execute one configured command and write its output; returns the output path."""
    logger.info(f"Running '{cfg.command}' (seed={cfg.seed}, jobs={cfg.jobs})")
    result = HANDLERS[cfg.command](cfg)
    text = render(cfg, result)
    out = cfg.resolved_out()
    write_atomic(out, text)
    logger.info(f"Saved {out}")
    return out


# --- argument parsing ---------------------------------------------------------

OVERRIDES = {
    "nu": ("params", float), "k": ("params", int),
    "c_minus": ("params", float), "c_plus": ("params", float),
    "w0": (None, float), "s0": (None, float), "horizon": (None, float),
    "epsilon": (None, float), "phase": (None, float), "tol": (None, float),
    "n": (None, int), "check": (None, str), "comparison": (None, str),
}


def parse_args(argv=None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="Output path (default results/<command>.<ext>)")
    common.add_argument("--format", choices=["csv", "json", "svg"], help="Output format")
    common.add_argument("--jobs", type=int, help="Worker threads")
    common.add_argument("--seed", type=int, help="RNG seed recorded in the output")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    for name, (_, kind) in OVERRIDES.items():
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)

    ap = argparse.ArgumentParser(description="Critical thresholds of damped Euler-Poisson dynamics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], help=f"Run '{command}'")
    return ap.parse_args(argv)


def load_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidInput(f"cannot read config {args.config}: {e}") from e
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        if data.get("command", args.command) != args.command:
            raise InvalidInput(f"config is for '{data['command']}', not '{args.command}'")
    data["command"] = args.command
    params = dict(data.get("params", {"c_minus": 1.0, "c_plus": 1.0}))
    for name, (section, _) in OVERRIDES.items():
        value = getattr(args, name)
        if value is None:
            continue
        if section == "params":
            params[name] = value
        else:
            data[name] = value
    data["params"] = params
    for name in ("out", "format", "jobs", "seed"):
        if getattr(args, name) is not None:
            data[name] = getattr(args, name)
    return RunConfig.from_dict(data)


def setup_logging(level: str = "INFO") -> None:
    log_dir = Path("logs")
    log_dir.mkdir(exist_ok=True)
    log_file = log_dir / f"ct_{datetime.now().strftime('%Y%m%d')}.log"
    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler(sys.stdout)
        ]
    )


def _fail(error: Exception, code: int) -> int:
    logger.error(f"{type(error).__name__}: {error}")
    print(json.dumps({"error": type(error).__name__, "message": str(error), "exit_code": code}),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(args.log_level)
    start_time = datetime.now()
    try:
        run(load_config(args))
    except InvalidInput as e:
        return _fail(e, EXIT_INVALID)
    except NumericalFailure as e:
        return _fail(e, EXIT_NUMERICAL)
    except (ValueError, TypeError, KeyError, AttributeError, OSError) as e:
        # malformed option values or an unwritable output path
        return _fail(e, EXIT_INVALID)
    logger.info(f"'{args.command}' completed in {datetime.now() - start_time}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
