"""Spectral cache for the regularized curvature ``A = Sigma + delta*I``.

Every matrix function used downstream (state-transition operators, kernel
traces, covariance integrals) is diagonal in the eigenbasis of ``A``, so one
symmetric eigendecomposition serves all queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeEigenvalue, NotSymmetric, TimeOrder
from .schedule import Schedule

_SYM_TOL = 1e-10
_NEG_TOL = 1e-8
_ZERO_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralCache:
    """Eigendecomposition of ``A = Sigma + delta*I``.

    Attributes:
        dim: dimension ``d``.
        eigvals: eigenvalues of ``A`` in ascending order.
        eigvecs: orthogonal matrix whose columns are the eigenvectors.
        sigma_eigvals: eigenvalues of ``Sigma`` (``eigvals - delta``).
        delta: ridge parameter.
    """

    dim: int
    eigvals: np.ndarray
    eigvecs: np.ndarray
    sigma_eigvals: np.ndarray
    delta: float

    def to_eigen(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of ``x`` (last axis of length d) in the eigenbasis."""
        return np.asarray(x) @ self.eigvecs

    def from_eigen(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) @ self.eigvecs.T

    def rows_to_eigen(self, x: np.ndarray) -> np.ndarray:
        """Row-by-row :meth:`to_eigen`; each row's rounding is independent of the batch size."""
        return np.stack([row @ self.eigvecs for row in np.atleast_2d(x)])

    def rows_from_eigen(self, y: np.ndarray) -> np.ndarray:
        return np.stack([row @ self.eigvecs.T for row in np.atleast_2d(y)])

    def matrix_function(self, diag: np.ndarray) -> np.ndarray:
        """``U diag(f) U^T`` for eigenvalue-wise values ``f``."""
        return (self.eigvecs * diag) @ self.eigvecs.T

    @property
    def covariance(self) -> np.ndarray:
        return self.matrix_function(self.sigma_eigvals)

    @property
    def curvature(self) -> np.ndarray:
        return self.matrix_function(self.eigvals)


def build_cache(covariance, delta: float) -> SpectralCache:
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] < 1:
        raise ValueError("covariance must be a nonempty square matrix")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    scale = np.linalg.norm(cov)
    if np.linalg.norm(cov - cov.T) > _SYM_TOL * max(scale, 1e-300):
        raise NotSymmetric("covariance is not symmetric")
    sym = 0.5 * (cov + cov.T)
    sig, vecs = np.linalg.eigh(sym)
    spectral_norm = np.max(np.abs(sig)) if sig.size else 0.0
    if sig.min() < -_NEG_TOL * spectral_norm:
        raise NegativeEigenvalue(f"covariance has eigenvalue {sig.min():.3e}; not PSD")
    sig = np.where(sig < _ZERO_CLAMP, 0.0, sig)
    for arr in (sig, vecs):
        arr.setflags(write=False)
    lam = sig + float(delta)
    lam.setflags(write=False)
    return SpectralCache(dim=cov.shape[0], eigvals=lam, eigvecs=vecs, sigma_eigvals=sig, delta=float(delta))


def _elapsed(schedule: Schedule, t: float, s: float) -> float:
    if t < s:
        raise TimeOrder(f"need t >= s, got t={t}, s={s}")
    if t == s:
        return 0.0
    return schedule.gamma_integral(t) - schedule.gamma_integral(s)


def transition_diag(cache: SpectralCache, schedule: Schedule, t: float, s: float) -> np.ndarray:
    """Eigenvalues of ``Phi(t, s)``: ``exp(-lambda_i (Gamma(t) - Gamma(s)))``."""
    return np.exp(-cache.eigvals * _elapsed(schedule, t, s))


def transition(cache: SpectralCache, schedule: Schedule, t: float, s: float) -> np.ndarray:
    """State-transition matrix ``Phi(t, s) = exp(-A (Gamma(t) - Gamma(s)))``."""
    return cache.matrix_function(transition_diag(cache, schedule, t, s))


def kernel_traces(cache: SpectralCache, schedule: Schedule, t: float, s: float, sigma: float,
                  hessian: str = "P") -> tuple[float, float]:
    """Volterra kernels ``G(t,s;M)`` and ``G'(t,s;M)``.

    ``hessian="P"`` uses ``M = Sigma`` (unregularized risk), ``"R"`` uses
    ``M = Sigma + delta*I``.
    """
    decay = np.exp(-2.0 * cache.eigvals * _elapsed(schedule, t, s))
    sig = cache.sigma_eigvals
    if hessian == "P":
        m = sig
    elif hessian == "R":
        m = cache.eigvals
    else:
        raise ValueError("hessian must be 'P' or 'R'")
    g2 = schedule.gamma(s) ** 2
    d = cache.dim
    G = g2 / d * float(np.sum(sig * m * decay))
    Gp = sigma**2 * g2 / (2 * d) * float(np.sum(m * decay))
    return G, Gp


def exp_trapezoid_weights(r):
    """Weights for ``int_0^1 exp(-r (1 - x)) f(x) dx ~ w0 f(0) + w1 f(1)`` with ``f`` linear.

    Exact for linear ``f``; reduces to the trapezoid rule ``(1/2, 1/2)`` at ``r = 0``.
    """
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 0.2
    rs = np.where(small, 1.0, r)
    em = np.exp(-rs)
    w0 = (1.0 - em * (1.0 + rs)) / (rs * rs)
    w1 = (rs - 1.0 + em) / (rs * rs)
    if np.any(small):
        # power series: w0 = sum (-r)^k / (k! (k+2)), w1 = sum (-r)^k / (k! (k+1) (k+2))
        s0 = np.zeros_like(r)
        s1 = np.zeros_like(r)
        term = np.ones_like(r)
        for k in range(16):
            s0 = s0 + term / (k + 2)
            s1 = s1 + term / ((k + 1) * (k + 2))
            term = term * (-r) / (k + 1)
        w0 = np.where(small, s0, w0)
        w1 = np.where(small, s1, w1)
    return w0, w1
