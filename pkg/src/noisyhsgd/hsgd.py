"""Law of noisy homogenized SGD and an Euler-Maruyama sampler of its SDE.

With the risk replaced by its deterministic trajectory ``P_t`` the SDE is
linear, so ``X_t ~ N(m(t), V(t))`` with

    m(t) = Phi(t) x0 + int_0^t Phi(t,u) gamma(u) Sigma x~ du
    V(t) = int_0^t Phi(t,u) gamma(u)^2 Q(u) Phi(t,u)^T du,
    Q(u) = (2 P_u Sigma + sigma^2 I) / d.

``Sigma`` and ``A`` share eigenvectors, so ``V(t)`` is diagonal in that basis
and is integrated eigenvalue-wise on the risk grid with the same rule the
Volterra solver uses, so ``P_t = P(m(t)) + tr(Sigma V(t))/2`` holds to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import replica_generator
from .errors import HorizonExceeded, TimeOrder
from .problem import ProblemInstance, eigen_risk, gradient_flow_eigen
from .schedule import Schedule
from .spectral import SpectralCache, exp_trapezoid_weights
from .volterra import RiskCurves

_TIME_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        vals, vecs = np.linalg.eigh(self.cov)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        return self.mean + rng.standard_normal((size, self.dim)) @ root.T

    def to_json(self, **meta) -> str:
        payload = {"format": "noisyhsgd/v1", "kind": "gaussian_law", **meta,
                   "mean": self.mean.tolist(), "cov": {"shape": list(self.cov.shape),
                                                        "data": self.cov.ravel().tolist()}}
        return json.dumps(payload)


class LinearizedHsgd:
    """Eigenbasis moments of the linearized HSGD driven by a solved risk curve."""

    def __init__(self, instance: ProblemInstance, cache: SpectralCache, schedule: Schedule,
                 risk_curve: RiskCurves, sigma: float, x0=None):
        self.instance = instance
        self.cache = cache
        self.schedule = schedule
        self.curve = risk_curve
        self.sigma = float(sigma)
        self.x0 = np.asarray(risk_curve.x0 if x0 is None else x0, dtype=float)
        self.x_true_e = cache.to_eigen(instance.ground_truth)
        self.target_e = cache.to_eigen(instance.covariance @ instance.ground_truth)
        self._grid_gamma = np.atleast_1d(schedule.gamma_integral(risk_curve.grid))
        self._grid_g2 = np.atleast_1d(schedule.gamma(risk_curve.grid)) ** 2
        self._cov_path = None

    # -- helpers ---------------------------------------------------------

    def _q(self, p):
        """Diagonal of ``Q`` (eigenbasis) for risk value(s) ``p``."""
        p = np.asarray(p, dtype=float)
        return (2.0 * p[..., None] * self.cache.sigma_eigvals + self.sigma**2) / self.cache.dim

    def _check_times(self, times: np.ndarray):
        if np.any(times < 0):
            raise TimeOrder("negative time")
        if np.any(times > self.curve.horizon * (1 + _TIME_SNAP) + _TIME_SNAP):
            raise HorizonExceeded(f"time {times.max():.6g} beyond risk-curve horizon {self.curve.horizon:.6g}")

    @property
    def cov_path(self) -> np.ndarray:
        """``diag V(t_j)`` (eigenbasis) on every risk-grid point, shape (M+1, d)."""
        if self._cov_path is None:
            grid = self.curve.grid
            lam = self.cache.eigvals
            out = np.zeros((grid.size, self.cache.dim))
            qg = self._q(self.curve.P) * self._grid_g2[:, None]
            for j in range(1, grid.size):
                h = grid[j] - grid[j - 1]
                rate = 2.0 * lam * (self._grid_gamma[j] - self._grid_gamma[j - 1])
                w0, w1 = exp_trapezoid_weights(rate)
                out[j] = np.exp(-rate) * out[j - 1] + h * (w0 * qg[j - 1] + w1 * qg[j])
            out.setflags(write=False)
            self._cov_path = out
        return self._cov_path

    def cov_diag(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        self._check_times(times)
        grid = self.curve.grid
        path = self.cov_path
        out = np.empty((times.size, self.cache.dim))
        step = self.curve.step
        for i, t in enumerate(times):
            pos = t / step if step > 0 else 0.0
            j = int(round(pos))
            if abs(pos - j) <= _TIME_SNAP * max(1.0, pos) and j < grid.size:
                out[i] = path[j]
                continue
            j = min(int(np.floor(pos)), grid.size - 1)
            tau = t - grid[j]
            rate = 2.0 * self.cache.eigvals * (self.schedule.gamma_integral(t) - self._grid_gamma[j])
            w0, w1 = exp_trapezoid_weights(rate)
            q_j = self._q(self.curve.P[j]) * self._grid_g2[j]
            q_t = self._q(self.curve.at(t)) * self.schedule.gamma(t) ** 2
            out[i] = np.exp(-rate) * path[j] + tau * (w0 * q_j + w1 * q_t)
        return out

    def mean_eigen(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        self._check_times(times)
        return gradient_flow_eigen(self.instance, self.cache, self.schedule, self.x0, times)

    def elapsed(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(t < s - _TIME_SNAP):
            raise TimeOrder("need t >= s")
        return np.maximum(np.asarray(self.schedule.gamma_integral(t)) - np.asarray(self.schedule.gamma_integral(s)), 0.0)

    def drift_increment(self, elapsed) -> np.ndarray:
        """``int_s^t Phi(t,u) gamma(u) Sigma x~ du`` in eigenbasis for given ``Gamma(t)-Gamma(s)``."""
        elapsed = np.asarray(elapsed, dtype=float)[..., None]
        lam = self.cache.eigvals
        safe = np.where(lam > 0, lam, 1.0)
        resp = np.where(lam > 0, -np.expm1(-lam * elapsed) / safe, elapsed)
        return resp * self.target_e

    def noise_cov(self, s, t) -> np.ndarray:
        """``int_s^t Phi gamma^2 Q Phi^T du`` (eigenbasis diagonal) as ``V(t) - Phi V(s) Phi``."""
        phi2 = np.exp(-2.0 * self.cache.eigvals * self.elapsed(t, s)[..., None])
        vt = self.cov_diag(t)
        vs = self.cov_diag(s)
        return np.clip(vt - phi2 * vs, 0.0, None)

    def law(self, t: float) -> GaussianLaw:
        mean = self.cache.from_eigen(self.mean_eigen([t])[0])
        cov = self.cache.matrix_function(self.cov_diag([t])[0])
        return GaussianLaw(mean, cov)


def hsgd_law(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, risk_curve: RiskCurves,
             x0, sigma: float, t: float) -> GaussianLaw:
    """Gaussian law ``N(m(t), V(t))`` of the linearized noisy HSGD."""
    return LinearizedHsgd(instance, cache, schedule, risk_curve, sigma, x0=x0).law(t)


@dataclass(frozen=True, eq=False)
class HsgdSamples:
    final: np.ndarray
    times: np.ndarray
    risk: Optional[np.ndarray]
    seed: int
    sigma: float


def sample_hsgd_paths(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, x0, sigma: float,
                      seed: int, t_end: float, replicas: int = 1, steps_per_unit_time: int | None = None,
                      record_every: int | None = None, first_replica: int = 0) -> HsgdSamples:
    """Euler-Maruyama paths of the nonlinear HSGD SDE.

    The diffusion ``gamma * sqrt((2 P(X) Sigma + sigma^2 I)/d)`` is applied in
    the eigenbasis, where it is diagonal. Replica ``r`` draws from its own
    stream ``(seed, first_replica + r)``. ``record_every`` (in Euler steps)
    enables recording ``P(X_t)``; the default time step is ``1/(4d)``.
    """
    d = cache.dim
    if steps_per_unit_time is None:
        steps_per_unit_time = 4 * d
    if steps_per_unit_time < d:
        raise ValueError("Euler step must not exceed 1/d")
    n_steps = int(round(t_end * steps_per_unit_time))
    dt = t_end / n_steps if n_steps else 0.0
    lam = cache.eigvals
    sig = cache.sigma_eigvals
    xt_e = cache.to_eigen(instance.ground_truth)
    target = cache.to_eigen(instance.covariance @ instance.ground_truth)
    y0 = cache.to_eigen(np.asarray(x0, dtype=float))
    step_times = np.arange(n_steps) * dt
    gam = np.atleast_1d(schedule.gamma(step_times)) if n_steps else np.zeros(0)
    rec_idx = np.arange(0, n_steps + 1, record_every) if record_every else np.zeros(0, dtype=int)
    if record_every and rec_idx[-1] != n_steps:
        rec_idx = np.append(rec_idx, n_steps)
    times = rec_idx * dt

    final = np.empty((replicas, d))
    risk = np.empty((replicas, rec_idx.size)) if record_every else None
    batch = max(1, min(replicas, 256))
    chunk = max(1, int(4e6 // (batch * d)))
    for start in range(0, replicas, batch):
        stop = min(replicas, start + batch)
        rngs = [replica_generator(seed, first_replica + r) for r in range(start, stop)]
        y = np.tile(y0, (stop - start, 1))
        rec_pos = 0
        if record_every and rec_idx[0] == 0:
            risk[start:stop, 0] = eigen_risk(cache, instance, y, xt_e)
            rec_pos = 1
        for c0 in range(0, n_steps, chunk):
            c1 = min(n_steps, c0 + chunk)
            noise = np.stack([g.standard_normal((c1 - c0, d)) for g in rngs], axis=1)
            for k in range(c0, c1):
                p = eigen_risk(cache, instance, y, xt_e)
                diff = np.sqrt((2.0 * p[:, None] * sig + sigma**2) / d)
                y = y - dt * gam[k] * (lam * y - target) + gam[k] * np.sqrt(dt) * diff * noise[k - c0]
                if record_every and rec_pos < rec_idx.size and rec_idx[rec_pos] == k + 1:
                    risk[start:stop, rec_pos] = eigen_risk(cache, instance, y, xt_e)
                    rec_pos += 1
        final[start:stop] = cache.rows_from_eigen(y)
    return HsgdSamples(final=final, times=times, risk=risk, seed=seed, sigma=float(sigma))
