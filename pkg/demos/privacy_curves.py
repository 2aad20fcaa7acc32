"""Renyi-DP loss along one pass, for three ways of publishing the model.

For the five record pairs with the largest score, the order-2 loss is
computed when publishing the last iterate at time t, every iterate on a time
grid, or their average. The last column repeats the iterate release with the
exact joint law of all published iterates.
"""

import numpy as np

from noisyhsgd import (ReleaseSpec, Schedule, adversarial_pairs, build_cache, epsilon_curve, generate_synthetic,
                       initial_point, default_noise_std, rdp_release, solve_volterra)

d, n, alpha = 60, 90, 2.0
inst = generate_synthetic(d, n, default_noise_std(d), 0.1, seed=7)
cache = build_cache(inst.covariance, 0.1)
schedule = Schedule.constant(20.0)
x0 = initial_point(d, "zero")
T = n / d
pairs = [p for p, _ in adversarial_pairs(inst, 5)]
print("pairs:", [p.index for p in pairs])

times = np.linspace(0.1, 1.0, 10) * T
for sigma in (1.0, 1.25, 1.5):
    curve = solve_volterra(inst, cache, schedule, x0, sigma)
    last = [r.epsilon for r in epsilon_curve(inst, cache, schedule, curve, pairs, sigma, alpha, times)]
    print(f"\nsigma = {sigma}: last-iterate loss over t")
    print("  " + "  ".join(f"{t:4.2f}:{e:.3e}" for t, e in zip(times, last)))

    grid = [0.5, 1.0, 1.5]
    it = rdp_release(inst, cache, schedule, curve, pairs, sigma, alpha, ReleaseSpec.iterates(grid))
    av = rdp_release(inst, cache, schedule, curve, pairs, sigma, alpha, ReleaseSpec.average(grid))
    full = rdp_release(inst, cache, schedule, curve, pairs, sigma, alpha, ReleaseSpec.iterates(grid),
                       full_joint=True)
    print(f"  releases at {grid}: iterates {it.epsilon:.3e}  average {av.epsilon:.3e}  "
          f"iterates (exact joint) {full.epsilon:.3e}")
