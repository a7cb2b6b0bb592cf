#!/usr/bin/env python3
"""
acceptance.py
-------------
End-to-end acceptance run of the toolkit at full sample counts.
Run this to check:
1. Threshold curves against their closed forms and endpoint formulas
2. Blow-up times and breakdown bounds on random supercritical starts
3. Invariance of the subcritical region on random subcritical starts
4. Resonance, attractive, characteristic and cold-ion machinery
5. Agreement of the closing-condition sign test with its case analysis

Usage:
    python3 acceptance.py            # all criteria
    python3 acceptance.py 4 7 11     # selected criteria
"""

import sys
import math
import time
import logging
from datetime import datetime

import numpy as np

from core import Params, PhasePoint, BackgroundSpec
from odeint import IntegratorOptions
from thresholds import (
    closing_condition, domain_endpoints, gamma_exponent, inverse_speed_integral, oscillation_rate,
    s_tilde, solve_N, solve_P,
)
from phaseplane import resonance_demo, simulate_ws, verify_breakdown_bounds, verify_invariance
from attractive import exact_attractive_path
from characteristics import (
    InitialDatum, LabelGrid, anomalous_demo, gamma_exact, neutrality_report,
    nonexistence_demo, solve_characteristics,
)
from coldion import V_eval, potential_bounds, solve_poisson_MB

# Colors for output
GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
BLUE = '\033[94m'
RESET = '\033[0m'

# blow-up times of the pumped equilibrium at eps = 0.05, phase 0 and pi
RESONANCE_T_STAR = (40.62736, 43.53370)

SEED = 20240101


def print_status(status, message):
    """Print colored status messages."""
    if status == "success":
        print(f"{GREEN}✅ {message}{RESET}")
    elif status == "error":
        print(f"{RED}❌ {message}{RESET}")
    elif status == "warning":
        print(f"{YELLOW}⚠️  {message}{RESET}")
    elif status == "info":
        print(f"{BLUE}ℹ️  {message}{RESET}")


def criterion_constant_threshold():
    P = solve_P(1.0, 0.0, 3.0)
    s = np.linspace(0.01, 1.99, 2000)
    err = float(np.max(np.abs(P.evaluate(s) - np.sqrt(s * (2.0 - s)))))
    return err <= 1e-6, f"max |g - sqrt(s(2-s))| = {err:.2e}"


def criterion_endpoints():
    worst_p = worst_n = 0.0
    for c in (1.0, 2.0, 4.0):
        for nu in (0.3, 1.0):
            P = solve_P(c, nu, 10.0 / c)
            worst_p = max(worst_p, abs(P.s_hi / s_tilde(c, nu) - 1.0))
            star = 1.05 / c
            N = solve_N(c, nu, star)
            s_ss = domain_endpoints(c, c, nu, star).s_star_star
            worst_n = max(worst_n, abs(N.s_lo / s_ss - 1.0))
    return max(worst_p, worst_n) <= 1e-6, f"P rel err {worst_p:.2e}, N rel err {worst_n:.2e}"


def criterion_traversal_identity():
    worst = 0.0
    for c in (1.0, 2.0, 4.0):
        for nu in (0.0, 0.3, 1.0):
            P = solve_P(c, nu, 10.0 / c)
            period = inverse_speed_integral(P, 0.0, P.s_hi)
            worst = max(worst, abs(period * oscillation_rate(c, nu) / math.pi - 1.0))
    return worst <= 1e-5, f"worst relative error {worst:.2e} over 9 pairs"


def criterion_blowup_time():
    out = simulate_ws(PhasePoint(0.0, 2.0), Params.constant(1.0), BackgroundSpec.constant(1.0), 10.0)
    err = abs(out.t_star - math.pi) if out.blew_up else math.inf
    return err <= 1e-6, f"|t* - pi| = {err:.2e}"


def criterion_breakdown_bounds():
    rng = np.random.default_rng(SEED)
    failures, total = 0, 0
    for nu in (0.0, 0.5, 3.0):
        for cm, cp in ((1.0, 1.0), (1.0, 1.2)):
            frame = verify_breakdown_bounds(Params(nu, 1, cm, cp), 200, rng, jobs=4)
            failures += int((~frame["ok"]).sum())
            total += len(frame)
    return failures == 0, f"{total - failures}/{total} starts blew up within the bound"


def criterion_invariance():
    rng = np.random.default_rng(SEED)
    failures, total = 0, 0
    for params in (Params(0.5, 1, 1.0, 1.0), Params(0.5, 1, 1.0, 1.05), Params(3.0, 1, 1.0, 1.2)):
        frame = verify_invariance(params, 200, rng, horizon=100.0, jobs=4)
        failures += int((~frame["ok"]).sum())
        total += len(frame)
    return failures == 0, f"{total - failures}/{total} starts stayed subcritical"


def criterion_resonance():
    loose = resonance_demo(0.05, opts=IntegratorOptions(rel_tol=1e-8, abs_tol=1e-11))
    tight = resonance_demo(0.05, opts=IntegratorOptions(rel_tol=1e-10, abs_tol=1e-13))
    calm = resonance_demo(0.0)
    shifted = resonance_demo(0.05, horizon=400.0, phase=math.pi)
    ok = (loose.blew_up and tight.blew_up and not calm.blew_up and shifted.blew_up
          and abs(loose.t_star - tight.t_star) <= 1e-4
          and math.isclose(tight.t_star, RESONANCE_T_STAR[0], rel_tol=1e-5)
          and math.isclose(shifted.t_star, RESONANCE_T_STAR[1], rel_tol=1e-5))
    detail = (f"t* = {tight.t_star}, tolerance drift "
              f"{abs(loose.t_star - tight.t_star) if ok else float('nan'):.2e}")
    return ok, detail


def criterion_attractive():
    rng = np.random.default_rng(SEED)
    opts = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-13)
    worst = 0.0
    for nu in (0.0, 1.0):
        for c_bar in (1.0, 4.0):
            params = Params(nu, -1, c_bar, c_bar)
            for _ in range(50):
                point = PhasePoint(float(rng.uniform(-1.0, 1.0)), float(rng.uniform(0.5, 2.0)))
                out = simulate_ws(point, params, BackgroundSpec.constant(c_bar), 3.0, opts)
                t, y = out.trajectory.sample(200)
                w, s = exact_attractive_path(point, nu, c_bar, t)
                worst = max(worst, float(np.max(np.abs(y[:, 0] - w))), float(np.max(np.abs(y[:, 1] - s))))
    return worst <= 1e-7, f"max deviation {worst:.2e} over 200 runs"


def criterion_characteristics():
    datum = InitialDatum.gaussian(1.0, 0.2, 0.3)
    grid = LabelGrid(8.0, 1000)
    run = solve_characteristics(datum, 1.0, 1, 0.0, grid, 1.0, snapshots=11, jobs=4)
    err = max(float(np.max(np.abs(st.Gamma - gamma_exact(datum, 1.0, 1, st.t, st.alpha_grid))))
              for st in run.states)
    drift = float(neutrality_report(run.states, 1.0).frame["I"].abs().max())
    return err <= 1e-6 and drift <= 1e-8, f"Gamma error {err:.2e}, |I(t)| <= {drift:.2e}"


def criterion_demos():
    anomalous = anomalous_demo([1e2, 1e3, 1e4, 1e5], t=0.1)
    jump = nonexistence_demo(1.0, math.pi / 2, [1e2, 1e3])
    ok = anomalous.divergent and abs(jump.limit_numeric - jump.limit) <= 1e-4
    return ok, (f"L1 spread {anomalous.spread:.3g} vs control {anomalous.control_spread:.2e}, "
                f"slope {anomalous.slope:.3f}; jump {jump.limit_numeric:.6f} vs {jump.limit:.6f}")


def criterion_cold_ion():
    v_err = max(abs(V_eval(0.1) - (0.005 + 0.001 / 9.0)), abs(V_eval(-0.1) - (0.005 - 0.001 / 9.0)))
    cm, cp = potential_bounds(1e-4)
    ratio_err = abs(cp / cm - (1.0 + 2.0 * math.sqrt(2e-4)))

    def profile(points):
        x = np.linspace(-10.0, 10.0, points)
        return solve_poisson_MB(1.0 + 0.5 * np.exp(-x ** 2), x[1] - x[0])

    ref = profile(3201)
    e1 = float(np.max(np.abs(profile(201) - ref[::16])))
    e2 = float(np.max(np.abs(profile(401) - ref[::8])))
    flat = solve_poisson_MB(np.ones(101), 0.1)
    ok = v_err <= 5e-5 and ratio_err <= 1e-3 and 3.5 <= e1 / e2 <= 4.5 and not flat.any()
    return ok, f"V err {v_err:.1e}, ratio err {ratio_err:.1e}, refinement ratio {e1 / e2:.2f}"


def criterion_closing_equivalence():
    mismatches = checked = 0
    for cm in np.linspace(0.2, 2.0, 50):
        for cp in cm * np.linspace(1.0, 2.0, 50):
            for nu in np.linspace(0.0, 4.0, 20):
                report = closing_condition(Params(float(nu), 1, float(cm), float(cp)))
                if report.case_tag == "rep-#1" or report.s_plus is None:
                    continue
                margin = report.s_plus * cm - 1.0
                if nu < 2.0 * math.sqrt(cm):
                    margin = math.exp(gamma_exponent(cm, nu)) * margin - 1.0
                if abs(margin) < 1e-10:
                    continue
                checked += 1
                mismatches += report.holds != report.sign_test
    return mismatches == 0, f"{checked - mismatches}/{checked} grid points agree"


CRITERIA = [
    (1, "Constant-background sharp threshold", criterion_constant_threshold, 1.0),
    (2, "Curve endpoint formulas", criterion_endpoints, 5.0),
    (3, "Traversal-time identity", criterion_traversal_identity, 5.0),
    (4, "Blow-up time exactness", criterion_blowup_time, 1.0),
    (5, "Breakdown bounds", criterion_breakdown_bounds, 60.0),
    (6, "Subcritical invariance", criterion_invariance, 60.0),
    (7, "Resonance", criterion_resonance, 5.0),
    (8, "Attractive exact solution", criterion_attractive, 10.0),
    (9, "Characteristic solver", criterion_characteristics, 30.0),
    (10, "Anomalous and non-existence demos", criterion_demos, 30.0),
    (11, "Cold-ion machinery", criterion_cold_ion, 10.0),
    (12, "Closing-condition equivalence", criterion_closing_equivalence, 5.0),
]


def main(argv=None):
    """Run the selected criteria and exit 1 if any fails."""
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.WARNING, format='%(asctime)s - %(levelname)s - %(message)s')
    selected = {int(a) for a in argv} if argv else {c[0] for c in CRITERIA}

    print(f"\n{BLUE}{'=' * 60}{RESET}")
    print(f"{BLUE}CRITICAL-THRESHOLD ACCEPTANCE SUITE{RESET}")
    print(f"{BLUE}{'=' * 60}{RESET}")
    print(f"Run Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    failed = []
    for number, name, check, budget in CRITERIA:
        if number not in selected:
            continue
        start = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        if ok:
            print_status("success", f"[{number}] {name}: {detail} ({elapsed:.1f} s)")
        else:
            failed.append(number)
            print_status("error", f"[{number}] {name}: {detail} ({elapsed:.1f} s)")
        if elapsed > budget:
            print_status("warning", f"[{number}] took {elapsed:.1f} s, budget {budget:.0f} s")

    print(f"\n{BLUE}{'=' * 60}{RESET}")
    if failed:
        print_status("error", f"Failed criteria: {', '.join(map(str, failed))}")
        sys.exit(1)
    print_status("success", "All selected criteria passed")


if __name__ == "__main__":
    main()
