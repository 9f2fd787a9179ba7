"""One channel draw, end to end.

Draws a Rayleigh channel, builds the feasible start, then follows the
alternating loop: closed-form powers for the current surface, a penalized
semidefinite relaxation for the surface at those powers, repeat. The dual-RIS
baseline runs on the same draw for comparison.

    python3 demos/single_instance.py [--m 8] [--p-dbm 20] [--seed 0]
"""
import argparse

import numpy as np

from starcovert.beamforming import build_coefficients, penalty_loop
from starcovert.errors import InfeasibleInstance
from starcovert.optimizer import audit, init_beamformer, optimize, optimize_baseline, power_inputs
from starcovert.power_alloc import allocate_power, power_caps
from starcovert.system_model import convert_db, default_noise, default_system, sample_channels, trial_seed

ap = argparse.ArgumentParser()
ap.add_argument("--m", type=int, default=8)
ap.add_argument("--p-dbm", type=float, default=20.0)
ap.add_argument("--qos", type=float, default=1.0)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

params = default_system(element_count=args.m, max_transmit_power=convert_db(args.p_dbm, "dBm"),
                        qos_rate=args.qos)
noise = default_noise()

# find a draw the constraints admit; many are not at low power or high QoS
for k in range(200):
    ch = sample_channels(params, trial_seed(args.seed, k))
    try:
        start = init_beamformer(params, ch, k, noise)
        break
    except InfeasibleInstance as exc:
        print(f"draw {k}: {exc}")
else:
    raise SystemExit("no feasible draw in 200 tries")
print(f"using draw {k}")

# %% the power step at the starting surface
inp = power_inputs(ch, start, params, noise)
caps = power_caps(inp)
split = allocate_power(inp)
print("power caps (W):", {key: f"{v:.3e}" for key, v in caps.items()})
print(f"covert power {split.p_b:.3e} W, public power {split.p_c:.3e} W")

# %% one beamforming step: penalty weights grow until the lifted matrices are rank one
res = penalty_loop(build_coefficients(ch), split, params, noise, start)
print(f"inner loop: {res.status} after {res.iterations} solves")
for xi, gain, eta_r, eta_t in res.state.history:
    print(f"  xi {xi:9.3e}  relaxed gain {gain:.4e}  gaps {eta_r:.1e} {eta_t:.1e}")

# %% the full loop, and the baseline on the same draw
sol = optimize(ch, params, noise, seed=k)
base = optimize_baseline(ch, params, noise, seed=k)
print(f"\nSTAR: {sol.status}, trace " + " -> ".join(f"{r:.4f}" for r in sol.trace))
print(f"dual-RIS baseline: {base.status}, rate {base.covert_rate:.4f}")
if sol.beamformer is not None:
    np.set_printoptions(precision=3, suppress=True)
    print("reflect amplitudes", sol.beamformer.beta_r)
    print("worst constraint violation", max(audit(sol, ch, params, noise).values()))
