"""Ridge-regularized least squares: data, population risks, gradient flow."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, TimeOrder
from .schedule import Schedule
from .spectral import SpectralCache

CLIP_STDS = 3.0


def clipped_gaussian_second_moment(std: float, clip: float = CLIP_STDS) -> float:
    """``E[w^2]`` for ``w = clip(N(0, std^2), -clip*std, clip*std)``."""
    if std == 0:
        return 0.0
    k = clip
    inner = 2 * stats.norm.cdf(k) - 1 - 2 * k * stats.norm.pdf(k)
    tails = 2 * k**2 * stats.norm.sf(k)
    return std**2 * (inner + tails)


def uniform_feature_covariance(d: int, scale: float) -> np.ndarray:
    """Second moment ``E[a a^T]`` for iid ``Unif(0, scale)`` coordinates."""
    mu1 = scale / 2
    mu2 = scale**2 / 3
    return np.full((d, d), mu1**2) + (mu2 - mu1**2) * np.eye(d)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A regression data set together with its population description.

    ``covariance`` and ``noise_second_moment`` define the population risk
    ``P(x) = 0.5 (x - x~)^T Sigma (x - x~) + 0.5 E[w^2]``. For synthetic data
    they are analytic; for data loaded from CSV they are empirical.
    ``feature_scale`` is set only when features are iid ``Unif(0, scale)``,
    which makes fresh population draws possible.
    """

    d: int
    n_samples: int
    design: np.ndarray
    labels: np.ndarray
    ground_truth: np.ndarray
    noise_std: float
    delta: float
    covariance: np.ndarray
    noise_second_moment: float
    feature_scale: Optional[float] = None
    seed: Optional[int] = None

    def sample_population(self, rng: np.random.Generator, size: int):
        """Fresh ``(a, b, w)`` draws from the synthetic population."""
        if self.feature_scale is None:
            raise ValueError("instance has no population sampler (not synthetic)")
        a = rng.uniform(0.0, self.feature_scale, size=(size, self.d))
        w = _clipped_noise(rng, self.noise_std, size)
        return a, a @ self.ground_truth + w, w

    def with_empirical_covariance(self) -> "ProblemInstance":
        """Replace the population covariance by the Gram matrix ``A^T A / n``."""
        gram = self.design.T @ self.design / self.n_samples
        return replace(self, covariance=0.5 * (gram + gram.T))


def _clipped_noise(rng: np.random.Generator, std: float, size: int) -> np.ndarray:
    w = rng.normal(0.0, 1.0, size=size) * std
    return np.clip(w, -CLIP_STDS * std, CLIP_STDS * std)


def generate_synthetic(d: int, n: int, noise_std: float, delta: float, seed: int) -> ProblemInstance:
    """Uniform-feature linear model.

    Ground truth and design entries are iid ``Unif(0, 1/sqrt(d))``; labels are
    ``b = a^T x~ + w`` with Gaussian ``w`` clipped at three standard deviations.
    """
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    scale = 1.0 / np.sqrt(d)
    x_true = rng.uniform(0.0, scale, size=d)
    design = rng.uniform(0.0, scale, size=(n, d))
    noise = _clipped_noise(rng, noise_std, n)
    labels = design @ x_true + noise
    return ProblemInstance(
        d=d,
        n_samples=n,
        design=design,
        labels=labels,
        ground_truth=x_true,
        noise_std=float(noise_std),
        delta=float(delta),
        covariance=uniform_feature_covariance(d, scale),
        noise_second_moment=clipped_gaussian_second_moment(noise_std),
        feature_scale=scale,
        seed=seed,
    )


def default_noise_std(d: int) -> float:
    """Regression noise level ``sqrt(0.01/d)`` of the reference experiments."""
    return float(np.sqrt(0.01 / d))


def from_arrays(design, labels, delta: float) -> ProblemInstance:
    """Instance defined by the empirical distribution of ``(design, labels)``.

    The ground truth is the least-squares fit and ``E[w^2]`` the mean squared
    residual, so the population risk equals half the empirical mean squared
    error exactly.
    """
    design = np.asarray(design, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n, d = design.shape
    if labels.shape != (n,):
        raise DimensionMismatch("labels must have one entry per design row")
    x_fit, *_ = np.linalg.lstsq(design, labels, rcond=None)
    resid = labels - design @ x_fit
    gram = design.T @ design / n
    return ProblemInstance(
        d=d,
        n_samples=n,
        design=design,
        labels=labels,
        ground_truth=x_fit,
        noise_std=float(np.sqrt(np.mean(resid**2))),
        delta=float(delta),
        covariance=0.5 * (gram + gram.T),
        noise_second_moment=float(np.mean(resid**2)),
    )


def load_csv(path, label_column: str | int = -1, delta: float = 0.0) -> ProblemInstance:
    """Read a numeric CSV with a header row; one column holds the labels.

    Lines starting with ``#`` are ignored.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    if isinstance(label_column, str):
        col = header.index(label_column)
    else:
        col = label_column % data.shape[1]
    labels = data[:, col]
    design = np.delete(data, col, axis=1)
    return from_arrays(design, labels, delta)


def population_risk(instance: ProblemInstance, x, regularized: bool = False) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.d,):
        raise DimensionMismatch(f"expected vector of length {instance.d}, got shape {x.shape}")
    v = x - instance.ground_truth
    p = 0.5 * float(v @ instance.covariance @ v) + 0.5 * instance.noise_second_moment
    if regularized:
        p += 0.5 * instance.delta * float(x @ x)
    return p


def eigen_risk(cache: SpectralCache, instance: ProblemInstance, y, x_true_e=None) -> np.ndarray:
    """Population risk ``P`` of eigenbasis coordinates ``y`` (any leading shape)."""
    if x_true_e is None:
        x_true_e = cache.to_eigen(instance.ground_truth)
    diff = np.asarray(y) - x_true_e
    return 0.5 * np.sum(diff * diff * cache.sigma_eigvals, axis=-1) + 0.5 * instance.noise_second_moment


def gradient_flow_eigen(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule,
                        x0, times) -> np.ndarray:
    """Gradient-flow iterates at ``times`` in eigenbasis coordinates."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise TimeOrder("gradient flow evaluated at negative time")
    big_gamma = np.atleast_1d(schedule.gamma_integral(times))
    y0 = cache.to_eigen(np.asarray(x0, dtype=float))
    target = cache.to_eigen(instance.covariance @ instance.ground_truth)
    lam = cache.eigvals
    decay = np.exp(-np.outer(big_gamma, lam))
    resp = np.where(lam > 0, -np.expm1(-np.outer(big_gamma, lam)) / np.where(lam > 0, lam, 1.0),
                    big_gamma[:, None])
    return decay * y0 + resp * target


def gradient_flow(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, x0, t: float) -> np.ndarray:
    """Closed-form gradient flow ``Phi(t) x0 + int_0^t Phi(t,u) gamma(u) Sigma x~ du``."""
    if t < 0:
        raise TimeOrder("gradient flow evaluated at negative time")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (instance.d,):
        raise DimensionMismatch("x0 has wrong length")
    y = gradient_flow_eigen(instance, cache, schedule, x0, [t])[0]
    return cache.from_eigen(y)


def initial_point(d: int, spec: str | None = "zero", seed: int | None = None) -> np.ndarray:
    """``"zero"`` or a standard-normal draw from ``seed``."""
    if spec in (None, "zero"):
        return np.zeros(d)
    if spec == "normal":
        return np.random.default_rng(np.random.SeedSequence(seed if seed is not None else 0)).standard_normal(d)
    raise ValueError(f"unknown x0 spec {spec!r}")
