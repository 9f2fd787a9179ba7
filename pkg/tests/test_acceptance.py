"""End-to-end acceptance checks at full size.

Each test prints one ``[n] PASS|FAIL`` line (also echoed in the pytest
summary). Oracles are the independent ones in ``starcovert.verify``.
"""
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from starcovert.beamforming import build_coefficients, penalty_loop
from starcovert.detection import dep, min_dep, optimal_threshold
from starcovert.harness import SweepSpec, aggregate, run_trials
from starcovert.optimizer import (CONVERGED, INFEASIBLE_INSTANCE, NON_MONOTONE, audit, init_beamformer,
                                  optimize, power_inputs)
from starcovert.errors import InfeasibleInstance
from starcovert.power_alloc import allocate_power
from starcovert.system_model import NoiseModel, convert_db, default_noise, default_system, sample_channels, trial_seed
from starcovert.verify import (dep_grid_min, lambda_max_sdp, power_audit, power_grid_oracle, random_detection_instance,
                               random_hermitian, random_power_instance, sdr_vs_grid)

NOISE = default_noise()


def report(n, name, ok, detail):
    line = f"[{n}] {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def _detection_instances(count, seed):
    rng = np.random.default_rng(seed)
    return [random_detection_instance(rng) for _ in range(count)]


def test_1_threshold_optimality():
    t0 = time.perf_counter()
    worst_above = 0.0     # closed form minus grid minimum; must stay <= 1e-9
    worst_abs = 0.0
    for obs, noise in _detection_instances(10_000, 101):
        d = dep(optimal_threshold(obs, noise), obs, noise)
        g, _ = dep_grid_min(obs, noise, 100_000)
        worst_above = max(worst_above, d - g)
        worst_abs = max(worst_abs, abs(d - g))
    dt = time.perf_counter() - t0
    ok = worst_above <= 1e-9 and dt < 60.0
    report(1, "optimal threshold vs 1e5-point grid on 1e4 instances", ok,
           f"closed form exceeds grid min by at most {worst_above:.2e} (grid is coarser by up to "
           f"{worst_abs:.2e}), {dt:.1f}s")
    assert worst_above <= 1e-9
    assert dt < 60.0


def test_2_min_dep_identity():
    worst = 0.0
    for obs, noise in _detection_instances(10_000, 101):
        worst = max(worst, abs(min_dep(obs.phi, noise) - dep(optimal_threshold(obs, noise), obs, noise)))
    worst_eps = 0.0
    for s, rho in [(1e-11, 10 ** 0.3), (1e-9, 10 ** 0.1), (3e-8, 10 ** 0.8)]:
        noise = NoiseModel(bob=1e-11, carol=1e-11, nominal_warden=s, uncertainty=rho)
        for eps in np.arange(1, 10) / 10:
            phi = (rho ** (2 * eps) - 1) * s / rho
            worst_eps = max(worst_eps, abs(min_dep(phi, noise) - (1 - eps)))
    ok = worst <= 1e-12 and worst_eps <= 1e-12
    report(2, "min_dep identities", ok,
           f"|min_dep - dep(tau*)| <= {worst:.2e} on 1e4 instances, boundary values off by <= {worst_eps:.2e}")
    assert worst <= 1e-12
    assert worst_eps <= 1e-12


def test_3_power_allocation_optimality():
    rng = np.random.default_rng(303)
    worst_steps, worst_audit = 0.0, -math.inf
    for _ in range(1000):
        inp = random_power_instance(rng)
        split = allocate_power(inp)
        g, step = power_grid_oracle(inp, 1_000_000)
        assert g is not None
        # the closed form is the exact maximum, so it sits in [g, g + step)
        worst_steps = max(worst_steps, (g - split.p_b) / step, (split.p_b - g) / step - 1.0)
        worst_audit = max(worst_audit, max(power_audit(split, inp).values()))
    ok = worst_steps <= 1e-9 and worst_audit <= 1e-12
    report(3, "closed-form power vs 1e6-point grid on 1e3 instances", ok,
           f"offset beyond one grid step {worst_steps:.2e} steps, worst relative violation {worst_audit:.2e}")
    assert worst_steps <= 1e-9
    assert worst_audit <= 1e-12


def test_4_sdr_vs_exhaustive_grid():
    params = default_system(element_count=2, max_transmit_power=convert_db(30.0, "dBm"))
    recs, k = [], 0
    while len(recs) < 50:
        rec = sdr_vs_grid(sample_channels(params, trial_seed(404, k)), params, NOISE)
        k += 1
        if rec is not None:
            recs.append(rec)
    close = sum(r.extracted >= 0.98 * r.grid for r in recs)
    bounded = sum(r.relaxed >= r.grid for r in recs)
    ok = close >= 45 and bounded == 50
    report(4, "M=2 beamforming vs 16-phase x 11-amplitude grid, 50 instances", ok,
           f"{close}/50 within 2% of grid optimum, {bounded}/50 bounded by the relaxation "
           f"({k - 50} infeasible draws skipped)")
    assert close >= 45
    assert bounded == 50


def _feasible_m8(count, seed):
    params = default_system(element_count=8)
    out, k = [], 0
    while len(out) < count:
        ch = sample_channels(params, trial_seed(seed, k))
        try:
            beam = init_beamformer(params, ch, k, NOISE)
            out.append((k, ch, beam))
        except InfeasibleInstance:
            pass
        k += 1
    return params, out


def test_5_rank_one_penalty_convergence():
    params, draws = _feasible_m8(50, 505)
    hit = 0
    for _, ch, beam in draws:
        powers = allocate_power(power_inputs(ch, beam, params, NOISE))
        res = penalty_loop(build_coefficients(ch), powers, params, NOISE, beam, eps_hat=1e-5)
        hit += res.status == "converged" and max(res.state.eta_r, res.state.eta_t) <= 1e-5
    ok = hit >= 48
    report(5, "rank-one gap <= 1e-5 before the penalty cap, 50 M=8 instances", ok, f"{hit}/50")
    assert hit >= 48


def test_6_monotone_and_feasible():
    params, draws = _feasible_m8(50, 606)
    converged = non_mono = bad_trace = bad_audit = 0
    worst = {}
    for k, ch, _ in draws:
        sol = optimize(ch, params, NOISE, seed=k)
        non_mono += sol.status == NON_MONOTONE
        bad_trace += any(b < a - 1e-6 for a, b in zip(sol.trace, sol.trace[1:]))
        if sol.status != CONVERGED:
            continue
        converged += 1
        v = audit(sol, ch, params, NOISE)
        for key, val in v.items():
            worst[key] = max(worst.get(key, -math.inf), val)
        # powers: 1e-8 W absolute; rates and covertness: 1e-6 relative
        bad_audit += not (max(v["budget"], v["order"], v["nonneg"]) * params.max_transmit_power <= 1e-8
                          and max(v["sic"], v["qos"], v["covert"]) <= 1e-6 and v["split"] <= 1e-12)
    ok = non_mono == 0 and bad_trace == 0 and bad_audit == 0 and converged > 0
    report(6, "monotone trace and final feasibility, 50 M=8 runs", ok,
           f"{converged} converged, {non_mono} non-monotone, {bad_audit} audit failures, worst violations "
           + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert non_mono == 0 and bad_trace == 0
    assert bad_audit == 0 and converged > 0


# rates are only resolved to the optimizer's stopping tolerance; plateaus differ by float noise
RESOLUTION = 1e-4


def _worst_dip(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return max([a - b for a, b in zip(xs, xs[1:])], default=0.0)


def _rate(t):
    return t.rate if t.status == CONVERGED else 0.0 if t.status == INFEASIBLE_INSTANCE else None


def _sweep_checks(spec):
    trials = run_trials(spec)
    rows = aggregate(spec, trials)
    by = {(t.scheme, t.value, t.trial): t for t in trials}
    violations = 0
    for (scheme, value, k), b in by.items():
        if scheme != "baseline-ris" or _rate(b) is None:
            continue
        s = _rate(by[("star", value, k)])
        violations += s is None or s < _rate(b) - 1e-6
    # per-trial trend among draws converged at neighbouring values (information only);
    # the channel draw depends on M, so the element-count sweep has no such pairing
    pairs = drops = 0
    for scheme in spec.schemes if spec.param != "M" else ():
        for lo, hi in zip(spec.values, spec.values[1:]):
            for k in range(spec.trials):
                a, b = by[(scheme, float(lo), k)], by[(scheme, float(hi), k)]
                if a.status == b.status == CONVERGED:
                    pairs += 1
                    drops += b.rate < a.rate - RESOLUTION
    dip = max(_worst_dip([r.mean_rate for r in rows if r.scheme == s]) for s in spec.schemes)
    odip = max(_worst_dip([r.outage_mean_rate for r in rows if r.scheme == s]) for s in spec.schemes)
    empty = [f"{r.scheme}@{r.value:g}" for r in rows if r.converged == 0]
    return rows, dip, odip, violations, (pairs, drops), empty


def test_7_figure_trends():
    t0 = time.perf_counter()
    base = default_system(element_count=8)
    sweeps = []
    for q in (1.0, 3.0):
        for eps in (0.2, 0.3):
            fixed = dict(qos_rate=q, covertness_level=eps)
            sweeps.append(("P_tmax", SweepSpec("P_tmax_dbm", range(10, 21, 2), overrides=fixed,
                                               base_seed=2024, system=base)))
            sweeps.append(("M", SweepSpec("M", [4, 8, 12, 16], overrides=fixed, base_seed=2024, system=base)))
        sweeps.append(("epsilon", SweepSpec("epsilon", [0.05, 0.1, 0.2, 0.3, 0.4, 0.5], overrides=dict(qos_rate=q),
                                            base_seed=2024, system=base)))
    failures, notes = [], []
    warm = pairs = drops = 0
    worst_dip = worst_odip = 0.0
    for label, spec in sweeps:
        rows, dip, odip, violations, (n_pairs, n_drops), empty = _sweep_checks(spec)
        warm += sum(r.warm_starts for r in rows)
        pairs, drops = pairs + n_pairs, drops + n_drops
        worst_dip, worst_odip = max(worst_dip, dip), max(worst_odip, odip)
        tag = f"{label} R*={spec.overrides['qos_rate']:g}" + (
            f" eps={spec.overrides['covertness_level']:g}" if "covertness_level" in spec.overrides else "")
        if dip > RESOLUTION or odip > RESOLUTION or violations:
            failures.append(f"{tag}: mean dip {dip:.2e}, outage-mean dip {odip:.2e}, "
                            f"{violations} dominance violations")
        if empty:
            notes.append(f"{tag}: no converged trials at {', '.join(empty)}")
    dt = time.perf_counter() - t0
    ok = not failures and dt < 1800
    detail = (f"{len(sweeps)} sweeps x 100 trials in {dt:.0f}s; worst mean dip {worst_dip:.1e}, "
              f"outage-mean dip {worst_odip:.1e}; {warm} STAR runs warm-started from the baseline; "
              f"per-trial drops {drops}/{pairs}; "
              + ("; ".join(failures) if failures else "STAR >= baseline on every pair"))
    report(7, "figure trends at M=8 desk scale", ok, detail)
    for n in notes:
        print("    ", n)
    assert not failures, failures
    assert dt < 1800


def test_8_lambda_max_benchmark():
    rng = np.random.default_rng(808)
    worst, fails = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(1000):
        h = random_hermitian(rng, int(rng.integers(1, 33)))
        sol = lambda_max_sdp(h)
        if sol.status != "optimal":
            fails += 1
            continue
        worst = max(worst, abs(sol.objective - np.linalg.eigvalsh(h)[-1]))
    ok = fails == 0 and worst <= 1e-6
    report(8, "lambda_max by SDP vs dense eigensolver, 1e3 Hermitian matrices up to 32x32", ok,
           f"worst error {worst:.2e}, {fails} solver failures, {time.perf_counter() - t0:.1f}s")
    assert fails == 0
    assert worst <= 1e-6
