"""Risk of one-pass noisy SGD against its deterministic Volterra path.

Run with ``python3 demos/risk_trajectories.py``. Prints, for a few privacy
noise levels, the Volterra risk next to a single SGD run and a 200-run
ensemble at a handful of times.
"""

# %% Problem: d=200 features, n=300 records, ridge 0.1
import numpy as np

from noisyhsgd import (Schedule, build_cache, generate_synthetic, initial_point, default_noise_std, run_ensemble,
                       run_sgd, solve_volterra)

d, n, delta = 200, 300, 0.1
inst = generate_synthetic(d, n, default_noise_std(d), delta, seed=7)
cache = build_cache(inst.covariance, delta)
schedule = Schedule.constant(50.0)  # step size 50/d per sample
x0 = initial_point(d, "normal", seed=11)

# %% Volterra curves, one SGD run and an ensemble for each noise scale
report_at = [0.0, 0.25, 0.5, 1.0, 1.5]
for sigma in (0.0, 1.0, 1.5):
    curve = solve_volterra(inst, cache, schedule, x0, sigma)
    run = run_sgd(inst, schedule, x0, sigma, seed=3, record_stride=1, shuffle=True, store_iterates=False,
                  cache=cache)
    ens = run_ensemble(inst, schedule, x0, sigma, base_seed=5, replicas=200, shuffle=True, record_stride=1,
                       cache=cache)
    print(f"\nsigma = {sigma}")
    print(f"{'t':>6} {'Volterra':>10} {'one run':>10} {'ensemble':>10} {'+/- se':>8}")
    for t in report_at:
        k = int(round(t * d))
        print(f"{t:6.2f} {curve.at(t):10.5f} {run.P[k]:10.5f} {ens.mean_P[k]:10.5f} {ens.stderr_P[k]:8.5f}")

# %% The single run wanders around the path; the ensemble mean sits on it up to a small finite-d offset.
