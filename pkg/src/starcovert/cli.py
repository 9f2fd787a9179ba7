"""Command line: ``starcovert sweep | single | verify``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .harness import SCHEMES, SWEEP_PARAMS, SweepSpec, _STRUCTURE, emit_csv, emit_plot, run_sweep
from .optimizer import AlgorithmConfig, audit, optimize
from .system_model import (CONFIG_KEYS, default_noise, default_system, load_config, parse_value,
                           sample_channels, to_db, trial_seed)
from .verify import SUITES, run_suites


def _base(args):
    system, noise = load_config(args.config) if args.config else (default_system(), default_noise())
    sys_up, noise_up = {}, {}
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        if key not in CONFIG_KEYS:
            raise SystemExit(f"unknown key {key!r}; known: {', '.join(CONFIG_KEYS)}")
        group, attr = CONFIG_KEYS[key]
        v = parse_value(val)
        (sys_up if group == "system" else noise_up)[attr] = int(v) if attr == "element_count" else v
    return replace(system, **sys_up), replace(noise, **noise_up)


def _values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated number list, got {text!r}") from None


def _common(p):
    p.add_argument("--config", help="config file of 'key = value [unit]' lines")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable), e.g. --set qos_rate=3")


def cmd_sweep(args) -> int:
    system, noise = _base(args)
    spec = SweepSpec(args.param, args.values, trials=args.trials, base_seed=args.seed,
                     schemes=tuple(args.schemes), system=system, noise=noise)
    rows = run_sweep(spec)
    print(f"{'scheme':<13}{args.param:>11}{'mean':>11}{'stderr':>10}{'conv':>6}{'infeas':>7}{'warm':>6}{'outage':>10}")
    for r in rows:
        print(f"{r.scheme:<13}{r.value:>11.4g}{r.mean_rate:>11.4f}{r.stderr:>10.4f}"
              f"{r.converged:>6d}{r.infeasible:>7d}{r.warm_starts:>6d}{r.outage_mean_rate:>10.4f}  {r.note}")
    if args.csv:
        emit_csv(rows, args.csv, timing=args.timing)
    if args.plot:
        emit_plot(rows, args.plot, outage=args.outage_plot)
    empty = [r for r in rows if r.converged == 0]
    for r in empty:
        print(f"warning: no converged trials for {r.scheme} at {r.param}={r.value:g}", file=sys.stderr)
    return 1 if empty else 0


def cmd_single(args) -> int:
    params, noise = _base(args)
    ch = sample_channels(params, trial_seed(args.seed, args.trial))
    sol = optimize(ch, params, noise, AlgorithmConfig(), structure=_STRUCTURE[args.scheme], seed=args.trial)
    print(f"scheme {args.scheme}  M={params.element_count}  P_tmax={to_db(params.max_transmit_power, 'dBm'):.2f} dBm"
          f"  epsilon={params.covertness_level:g}  R*={params.qos_rate:g}")
    print(f"status {sol.status}" + (f": {sol.message}" if sol.message else ""))
    for k, v in enumerate(sol.trace):
        inner = f"  inner {sol.inner_iterations[k - 1]}" if 0 < k <= len(sol.inner_iterations) else ""
        print(f"  iter {k:3d}  covert rate {v:.9f}{inner}")
    if sol.beamformer is not None:
        np.set_printoptions(precision=4, suppress=True)
        print(f"P_b {sol.powers.p_b:.6g} W  P_c {sol.powers.p_c:.6g} W")
        print("beta_r ", sol.beamformer.beta_r)
        print("phase_r", sol.beamformer.phase_r)
        print("phase_t", sol.beamformer.phase_t)
        print("constraint violations (<= 0 is satisfied):")
        for name, v in audit(sol, ch, params, noise).items():
            print(f"  {name:<7}{v: .3e}")
    return 0 if sol.ok else 1


def cmd_verify(args) -> int:
    results = run_suites(args.suite or None, instances=args.instances, seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12}{r.seconds:7.2f}s  {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="starcovert",
                                 description="Covert-rate optimization for STAR-RIS aided NOMA links.")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep over one parameter")
    _common(sw)
    sw.add_argument("--param", choices=SWEEP_PARAMS, default="P_tmax_dbm")
    sw.add_argument("--values", type=_values, default=[10, 12, 14, 16, 18, 20])
    sw.add_argument("--trials", type=int, default=100)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--schemes", nargs="+", choices=SCHEMES, default=list(SCHEMES))
    sw.add_argument("--csv", help="write results as CSV")
    sw.add_argument("--plot", help="write a figure (png, svg or pdf by suffix)")
    sw.add_argument("--timing", action="store_true", help="add a wall_time column to the CSV")
    sw.add_argument("--outage-plot", action="store_true",
                    help="plot the outage-inclusive mean (infeasible trials as zero)")
    sw.set_defaults(func=cmd_sweep)

    si = sub.add_parser("single", help="solve one channel draw and print the iteration trace")
    _common(si)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--trial", type=int, default=0)
    si.add_argument("--scheme", choices=SCHEMES, default="star")
    si.set_defaults(func=cmd_single)

    ve = sub.add_parser("verify", help="run the oracle self-checks")
    ve.add_argument("--suite", action="append", choices=list(SUITES))
    ve.add_argument("--instances", type=int, default=20)
    ve.add_argument("--seed", type=int, default=0)
    ve.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
