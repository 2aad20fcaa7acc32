"""Is the last SGD iterate Gaussian with the predicted law?

Squared Mahalanobis distances of 2000 SGD end points under the predicted
Gaussian law are compared with chi-square quantiles. A straight line of
slope one means the law fits. Samples drawn from the law itself give the
reference slope.
"""

import numpy as np
from scipy import stats

from noisyhsgd import (Schedule, build_cache, generate_synthetic, hsgd_law, initial_point, default_noise_std,
                       run_ensemble, solve_volterra)
from noisyhsgd.cli import qq_slope

d, n, sigma = 100, 150, 1.5
inst = generate_synthetic(d, n, default_noise_std(d), 0.1, seed=7)
cache = build_cache(inst.covariance, 0.1)
schedule = Schedule.constant(50.0)
x0 = initial_point(d, "normal", seed=11)

curve = solve_volterra(inst, cache, schedule, x0, sigma)
law = hsgd_law(inst, cache, schedule, curve, x0, sigma, n / d)
ends = run_ensemble(inst, schedule, x0, sigma, base_seed=5, replicas=2000, shuffle=True, cache=cache).final_iterates

print("slope, SGD end points :", round(qq_slope(law, ends), 4))
print("slope, law samples    :", round(qq_slope(law, law.sample(np.random.default_rng(3), 2000)), 4))

# A few quantiles side by side
L = np.linalg.cholesky(law.cov)
z = np.linalg.solve(L, (ends - law.mean).T)
m2 = np.sort((z * z).sum(axis=0))
for p in (0.05, 0.25, 0.5, 0.75, 0.95):
    print(f"  {p:4.2f}: empirical {np.quantile(m2, p):7.2f}   chi2_{d} {stats.chi2.ppf(p, d):7.2f}")
