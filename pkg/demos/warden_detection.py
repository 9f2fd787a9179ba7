"""How well can the warden detect the covert signal?

Walks through the radiometer's detection error probability (DEP) under a
log-uniform noise-power uncertainty: the DEP against the threshold, where the
best threshold sits, and how large the covert exposure may get before the
minimum DEP drops below 1 - epsilon.

    python3 demos/warden_detection.py [--out dep.png]
"""
import argparse

import numpy as np

from starcovert.detection import (WardenObservables, covert_lambda_bound, dep, dep_boundary, min_dep,
                                  optimal_threshold, threshold_range)
from starcovert.system_model import default_noise, to_db

ap = argparse.ArgumentParser()
ap.add_argument("--out", default=None, help="save the DEP-vs-threshold figure here")
args = ap.parse_args()

noise = default_noise()
print(f"warden noise: nominal {to_db(noise.nominal_warden, 'dBm'):.1f} dBm, "
      f"uncertainty {to_db(noise.uncertainty):.1f} dB")

# %% DEP against the threshold for one observation pair
phi1 = 0.4 * noise.nominal_warden        # public signal only
phi = 0.3 * noise.nominal_warden         # extra power when the covert signal is on
obs = WardenObservables(phi1, phi1 + phi)
lo, hi = threshold_range(obs, noise)
taus = np.linspace(lo, hi, 400)
curve = np.array([dep(t, obs, noise) for t in taus])
tau_star = optimal_threshold(obs, noise)
print(f"best threshold {tau_star:.3e} W, DEP there {dep(tau_star, obs, noise):.4f}, "
      f"grid minimum {curve.min():.4f}")

# %% the minimum DEP as the covert term grows
print(f"\nzero-DEP boundary: phi > {dep_boundary(noise):.3e} W")
for frac in (0.0, 0.1, 0.3, 1.0, 2.0, 3.0):
    p = frac * noise.nominal_warden
    print(f"  phi = {frac:3.1f} sigma_w^2  ->  min DEP {min_dep(p, noise):.4f}")

# %% covertness budget: the exposure bound is exactly where min DEP hits 1 - epsilon
for eps in (0.05, 0.1, 0.2, 0.3, 0.5):
    lam = covert_lambda_bound(eps, noise)
    print(f"epsilon {eps:4.2f}: exposure bound {lam:.3e} W, min DEP at bound {min_dep(lam, noise):.4f}")

if args.out:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(taus / noise.nominal_warden, curve)
    ax.axvline(tau_star / noise.nominal_warden, ls="--", c="k", lw=0.8)
    ax.set_xlabel("threshold / nominal warden noise")
    ax.set_ylabel("detection error probability")
    fig.tight_layout()
    fig.savefig(args.out)
    print("wrote", args.out)
