"""Deterministic risk trajectories from the second-kind Volterra equations.

``P_t = P(X^gf_t) + int_0^t G(t,s;Sigma) P_s ds + int_0^t G'(t,s;Sigma) ds``
and the analogous equation for ``R_t`` with kernels built on ``Sigma+delta*I``.
Both kernels are sums of decaying exponentials over the spectrum of ``A``, so
the history integrals are carried as per-eigenvalue accumulators and each time
step costs ``O(d)``. Each cell integrates the exponential exactly and treats
``gamma^2 P`` as linear, which stays accurate when ``gamma * lambda * step``
is not small.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnstableStep
from .problem import ProblemInstance, eigen_risk, gradient_flow_eigen
from .schedule import Schedule
from .spectral import SpectralCache, exp_trapezoid_weights


@dataclass(frozen=True, eq=False)
class RiskCurves:
    grid: np.ndarray
    P: np.ndarray
    R: np.ndarray
    sigma: float
    x0: np.ndarray
    inputs_hash: str

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    def at(self, t):
        """Linear interpolation of ``P_t`` on the solved grid."""
        return np.interp(t, self.grid, self.P)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with Path(path).open("w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "P", "R"])
            for t, p, r in zip(self.grid, self.P, self.R):
                w.writerow([f"{t:.17g}", f"{p:.17g}", f"{r:.17g}"])


def inputs_digest(instance: ProblemInstance, schedule: Schedule, sigma: float, x0) -> str:
    h = hashlib.sha256()
    for arr in (instance.design, instance.labels, instance.ground_truth, instance.covariance, np.asarray(x0, float)):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update(repr((instance.delta, instance.noise_second_moment, float(sigma), schedule.describe())).encode())
    return h.hexdigest()[:16]


def solve_volterra(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, x0, sigma: float,
                   T: float | None = None, grid_step: float | None = None) -> RiskCurves:
    """Forward stepping of the risk Volterra equations (implicit in ``P_j``).

    Defaults: horizon ``T = n/d`` (one pass), step ``1/d``. The grid is
    uniform; the step is shrunk slightly if needed so it divides ``T``.
    """
    d = cache.dim
    x0 = np.asarray(x0, dtype=float)
    if T is None:
        T = instance.n_samples / d
    if grid_step is None:
        grid_step = 1.0 / d
    if grid_step <= 0 or T < 0:
        raise ValueError("grid_step must be positive and T nonnegative")
    M = max(1, int(np.ceil(T / grid_step - 1e-9))) if T > 0 else 0
    grid = np.linspace(0.0, T, M + 1)
    h = T / M if M else 0.0

    big_gamma = np.atleast_1d(schedule.gamma_integral(grid))
    g2 = np.atleast_1d(schedule.gamma(grid)) ** 2
    lam = cache.eigvals
    sig = cache.sigma_eigvals
    sig_sq = sig * sig
    sig_lam = sig * lam

    gf = gradient_flow_eigen(instance, cache, schedule, x0, grid)
    p_gf = eigen_risk(cache, instance, gf)
    r_gf = p_gf + 0.5 * instance.delta * np.sum(gf**2, axis=1)

    P = np.empty(M + 1)
    R = np.empty(M + 1)
    P[0], R[0] = p_gf[0], r_gf[0]
    # full_p[i] = int_0^{t_j} exp(-2 lam_i (Gamma_j - Gamma(u))) gamma(u)^2 P_u du, by product
    # integration: the exponential exactly, gamma^2 P linear on each cell. full_1 drops P.
    full_p = np.zeros(d)
    full_1 = np.zeros(d)
    noise = sigma**2 / (2 * d)
    for j in range(1, M + 1):
        rate = 2.0 * lam * (big_gamma[j] - big_gamma[j - 1])
        decay = np.exp(-rate)
        w0, w1 = exp_trapezoid_weights(rate)
        known_p = decay * full_p + h * w0 * g2[j - 1] * P[j - 1]
        full_1 = decay * full_1 + h * (w0 * g2[j - 1] + w1 * g2[j])
        implicit = h * g2[j] * w1
        denom = 1.0 - float(sig_sq @ implicit) / d
        if denom <= 0:
            raise UnstableStep(f"Volterra diagonal factor {denom:.3e} <= 0 at t={grid[j]:.6g}; refine grid")
        P[j] = (p_gf[j] + float(sig_sq @ known_p) / d + noise * float(sig @ full_1)) / denom
        full_p = known_p + implicit * P[j]
        R[j] = r_gf[j] + float(sig_lam @ full_p) / d + noise * float(lam @ full_1)
    x0_frozen = x0.copy()
    for arr in (grid, P, R, x0_frozen):
        arr.setflags(write=False)
    return RiskCurves(grid=grid, P=P, R=R, sigma=float(sigma), x0=x0_frozen,
                      inputs_hash=inputs_digest(instance, schedule, sigma, x0))
