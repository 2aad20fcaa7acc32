"""One-pass noisy SGD, seeded ensembles, and a one-step Doob diagnostic."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ._rng import NOISE_STREAM, SHUFFLE_STREAM, replica_generator
from .errors import DimensionMismatch, ExhaustedData
from .problem import ProblemInstance, eigen_risk
from .schedule import Schedule
from .spectral import SpectralCache, build_cache

_NOISE_BUDGET = 4_000_000  # floats of pre-drawn noise held at once


@dataclass(frozen=True, eq=False)
class SgdTrajectory:
    steps: np.ndarray
    times: np.ndarray
    P: np.ndarray
    R: np.ndarray
    iterates: Optional[np.ndarray]
    seed: int
    sigma: float

    def to_csv(self, path, header_comment: str | None = None) -> None:
        _write_track(path, self.steps, self.times, self.P, self.R, header_comment)


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    steps: np.ndarray
    times: np.ndarray
    mean_P: np.ndarray
    var_P: np.ndarray
    mean_R: np.ndarray
    var_R: np.ndarray
    final_iterates: np.ndarray
    replicas: int
    base_seed: int
    sigma: float

    @property
    def stderr_P(self) -> np.ndarray:
        return np.sqrt(self.var_P / self.replicas)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        _write_track(path, self.steps, self.times, self.mean_P, self.mean_R, header_comment,
                     extra={"var_P": self.var_P, "var_R": self.var_R})


def _write_track(path, steps, times, P, R, header_comment=None, extra=None):
    extra = extra or {}
    with Path(path).open("w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "P", "R", *extra])
        for i, k in enumerate(steps):
            w.writerow([int(k), f"{times[i]:.17g}", f"{P[i]:.17g}", f"{R[i]:.17g}",
                        *(f"{col[i]:.17g}" for col in extra.values())])


def _record_steps(n_steps: int, stride: int) -> np.ndarray:
    steps = np.arange(0, n_steps + 1, stride)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def _simulate(instance: ProblemInstance, schedule: Schedule, x0: np.ndarray, sigma: float, base_seed: int,
              replicas: range, n_steps: int, stride: int, shuffle: bool, store_iterates: bool,
              cache: SpectralCache):
    """Run a block of replicas in lock-step; returns (steps, P, R, iterates, finals)."""
    d = instance.d
    steps = _record_steps(n_steps, stride)
    n_rep = len(replicas)
    P = np.empty((n_rep, steps.size))
    R = np.empty((n_rep, steps.size))
    iterates = np.empty((n_rep, steps.size, d)) if store_iterates else None
    eta = np.array([schedule.step_size(k, d) for k in range(n_steps)])
    xt_e = cache.to_eigen(instance.ground_truth)
    delta = instance.delta

    def record(pos, x, rows):
        p = eigen_risk(cache, instance, cache.rows_to_eigen(x), xt_e)
        P[rows, pos] = p
        R[rows, pos] = p + 0.5 * delta * np.sum(x * x, axis=1)
        if store_iterates:
            iterates[rows, pos] = x

    batch = max(1, min(n_rep, 64))
    finals = np.empty((n_rep, d))
    for b0 in range(0, n_rep, batch):
        b1 = min(n_rep, b0 + batch)
        rows = slice(b0, b1)
        reps = replicas[b0:b1]
        noise_rngs = [replica_generator(base_seed, r, NOISE_STREAM) for r in reps]
        if shuffle:
            order = np.stack([replica_generator(base_seed, r, SHUFFLE_STREAM).permutation(instance.n_samples)[:n_steps]
                              for r in reps])
        else:
            order = np.tile(np.arange(n_steps), (b1 - b0, 1))
        x = np.tile(x0, (b1 - b0, 1))
        record(0, x, rows)
        pos = 1
        chunk = max(1, _NOISE_BUDGET // ((b1 - b0) * d))
        for c0 in range(0, n_steps, chunk):
            c1 = min(n_steps, c0 + chunk)
            z = np.stack([g.standard_normal((c1 - c0, d)) for g in noise_rngs], axis=1)
            for k in range(c0, c1):
                idx = order[:, k]
                a = instance.design[idx]
                resid = np.einsum("ij,ij->i", a, x) - instance.labels[idx]
                grad = a * resid[:, None] + delta * x + sigma * z[k - c0]
                x = x - eta[k] * grad
                if pos < steps.size and steps[pos] == k + 1:
                    record(pos, x, rows)
                    pos += 1
        finals[rows] = x
    return steps, P, R, iterates, finals


def _prepare(instance, x0, n_steps, record_stride, cache):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (instance.d,):
        raise DimensionMismatch("x0 has wrong length")
    if n_steps is None:
        n_steps = instance.n_samples
    if n_steps > instance.n_samples:
        raise ExhaustedData(f"{n_steps} steps requested but only {instance.n_samples} records")
    if record_stride is None:
        record_stride = max(1, instance.d // 10)
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    if cache is None:
        cache = build_cache(instance.covariance, instance.delta)
    return x0, n_steps, record_stride, cache


def run_sgd(instance: ProblemInstance, schedule: Schedule, x0, sigma: float, seed: int,
            record_stride: int | None = None, n_steps: int | None = None, shuffle: bool = False,
            store_iterates: bool = True, cache: SpectralCache | None = None) -> SgdTrajectory:
    """One pass of noisy SGD.

    Step ``k`` uses record ``k`` (or record ``perm[k]`` when ``shuffle``) and
    ``x_{k+1} = x_k - eta_k [(a a^T + delta I) x_k - b a + sigma Z_k]``.
    Risks are recorded every ``record_stride`` steps (default ``d // 10``)
    and at the final step.
    """
    x0, n_steps, record_stride, cache = _prepare(instance, x0, n_steps, record_stride, cache)
    steps, P, R, its, _ = _simulate(instance, schedule, x0, sigma, seed, range(0, 1), n_steps,
                                    record_stride, shuffle, store_iterates, cache)
    return SgdTrajectory(steps=steps, times=steps / instance.d, P=P[0], R=R[0],
                         iterates=None if its is None else its[0], seed=seed, sigma=float(sigma))


def _fsum_columns(values: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(col) for col in values.T])


def run_ensemble(instance: ProblemInstance, schedule: Schedule, x0, sigma: float, base_seed: int,
                 replicas: int, shuffle: bool = False, record_stride: int | None = None,
                 n_steps: int | None = None, cache: SpectralCache | None = None,
                 return_tracks: bool = False):
    """Independent replicas of :func:`run_sgd` and their per-step risk statistics.

    Replica ``r`` owns the streams keyed by ``(base_seed, r)``; replica 0
    reproduces ``run_sgd(..., seed=base_seed)``. Means and variances use
    exactly rounded summation, so the result does not depend on batching.
    With ``return_tracks`` the per-replica ``P`` matrix is returned as well.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    x0, n_steps, record_stride, cache = _prepare(instance, x0, n_steps, record_stride, cache)
    steps, P, R, _, finals = _simulate(instance, schedule, x0, sigma, base_seed, range(replicas), n_steps,
                                       record_stride, shuffle, False, cache)
    mean_P = _fsum_columns(P) / replicas
    mean_R = _fsum_columns(R) / replicas
    denom = max(replicas - 1, 1)
    var_P = _fsum_columns((P - mean_P) ** 2) / denom
    var_R = _fsum_columns((R - mean_R) ** 2) / denom
    summary = EnsembleSummary(steps=steps, times=steps / instance.d, mean_P=mean_P, var_P=var_P,
                              mean_R=mean_R, var_R=var_R, final_iterates=finals, replicas=replicas,
                              base_seed=base_seed, sigma=float(sigma))
    if return_tracks:
        return summary, P
    return summary


# -- Doob decomposition diagnostic ------------------------------------------


@dataclass(frozen=True)
class DoobReport:
    sample_mean: float
    predictable: float
    leading: float
    correction: float
    std_error: float
    z_score: float
    mc_samples: int

    @property
    def passed(self) -> bool:
        return abs(self.z_score) < 4.0


def _uniform_fourth_moment(v: np.ndarray, scale: float) -> float:
    """``E[(a^T v)^2 ||a||^2]`` for iid ``Unif(0, scale)`` coordinates."""
    d = v.size
    mu1, mu2, mu3, mu4 = (scale**p / (p + 1) for p in (1, 2, 3, 4))
    sq = float(v @ v)
    cross = float(v.sum()) ** 2 - sq
    diag_coef = mu4 + (d - 1) * mu2**2
    off_coef = 2 * mu1 * mu3 + (d - 2) * mu1**2 * mu2
    return diag_coef * sq + off_coef * cross


def doob_diagnostic(instance: ProblemInstance, schedule: Schedule, x_state, sigma: float, k: int,
                    mc_samples: int, seed: int, source: str = "population") -> DoobReport:
    """Check the predictable part of one SGD increment of ``q(v) = ||v||^2 / 2``.

    ``v = x - x~``. The exact conditional expectation of
    ``q(v_{k+1}) - q(v_k)`` given ``x_k = x_state`` is computed in closed form
    and compared with the mean over ``mc_samples`` fresh ``(a, b, Z)`` draws.
    ``leading`` is the state-dependent leading-order predictable term and
    ``correction`` the higher-order remainder, ``predictable = leading +
    correction``. ``source="population"`` samples the synthetic feature law;
    ``"empirical"`` resamples rows of the data set.
    """
    d = instance.d
    x = np.asarray(x_state, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatch("x_state has wrong length")
    eta = schedule.step_size(k, d)
    delta = instance.delta
    xt = instance.ground_truth
    v = x - xt
    cov = instance.covariance
    ew2 = instance.noise_second_moment

    if source == "population":
        if instance.feature_scale is None:
            raise ValueError("population source needs a synthetic instance")
        vsv = float(v @ cov @ v)
        e_lin = vsv + delta * float(v @ x)
        e_sq = (_uniform_fourth_moment(v, instance.feature_scale) + ew2 * float(np.trace(cov))
                + 2 * delta * float(x @ cov @ v) + delta**2 * float(x @ x) + sigma**2 * d)
    elif source == "empirical":
        a_all = instance.design
        r_all = a_all @ x - instance.labels
        norms = np.einsum("ij,ij->i", a_all, a_all)
        e_lin = float(np.mean((a_all @ v) * r_all)) + delta * float(v @ x)
        e_sq = (float(np.mean(r_all**2 * norms)) + 2 * delta * float(np.mean(r_all * (a_all @ x)))
                + delta**2 * float(x @ x) + sigma**2 * d)
    else:
        raise ValueError("source must be 'population' or 'empirical'")
    predictable = -eta * e_lin + 0.5 * eta**2 * e_sq
    leading = (-eta * (float(v @ cov @ v) + delta * float(v @ x))
               + 0.5 * eta**2 * float(np.trace(cov)) * (float(v @ cov @ v) + ew2)
               + 0.5 * eta**2 * sigma**2 * d)

    rng = replica_generator(seed, 0)
    total = 0.0
    total_sq = 0.0
    chunk = max(1, min(mc_samples, 2_000_000 // d))
    done = 0
    while done < mc_samples:
        m = min(chunk, mc_samples - done)
        if source == "population":
            a, b, _ = instance.sample_population(rng, m)
        else:
            idx = rng.integers(0, instance.n_samples, size=m)
            a, b = instance.design[idx], instance.labels[idx]
        z = rng.standard_normal((m, d))
        g = a * (a @ x - b)[:, None] + delta * x + sigma * z
        inc = -eta * (g @ v) + 0.5 * eta**2 * np.einsum("ij,ij->i", g, g)
        total += math.fsum(inc)
        total_sq += math.fsum(inc * inc)
        done += m
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean**2, 0.0) * mc_samples / max(mc_samples - 1, 1)
    se = math.sqrt(var / mc_samples)
    diff = mean - predictable
    if se == 0.0:
        z_score = 0.0 if abs(diff) <= 1e-15 * max(1.0, abs(predictable)) else math.copysign(math.inf, diff)
    else:
        z_score = diff / se
    return DoobReport(sample_mean=mean, predictable=predictable, leading=leading,
                      correction=predictable - leading, std_error=se, z_score=z_score, mc_samples=mc_samples)
