"""Renyi-DP loss of noisy HSGD for neighbouring data sets.

Two processes share the data except for one record, which is processed at a
uniformly random time ``s``. Before ``s`` their laws coincide. The step at
``s`` applies a record-dependent affine map, and afterwards both evolve under
the same linear dynamics, so every released object is Gaussian and the
divergence is available in closed form. Mixing over ``s`` gives the loss.

Everything is computed in the eigenbasis of ``A``, where the shared dynamics
are diagonal and each differentiating update is a rank-two perturbation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import DimensionMismatch, HorizonExceeded, MixtureNotPD, TimeOrder
from .hsgd import GaussianLaw, LinearizedHsgd
from .problem import ProblemInstance
from .schedule import Schedule
from .spectral import SpectralCache
from .volterra import RiskCurves

LAST, ITERATES, AVERAGE = "last", "iterates", "average"
MAX_BLOCK_DIM = 128
_REG = 1e-12


@dataclass(frozen=True, eq=False)
class NeighborPair:
    a: np.ndarray
    b: float
    a_prime: np.ndarray
    b_prime: float
    index: tuple = (-1, -1)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        a2 = np.asarray(self.a_prime, dtype=float)
        if a.ndim != 1 or a.shape != a2.shape:
            raise DimensionMismatch("both feature vectors must be 1-D of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a_prime", a2)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "b_prime", float(self.b_prime))

    @classmethod
    def from_records(cls, instance: ProblemInstance, i: int, j: int) -> "NeighborPair":
        return cls(instance.design[i], instance.labels[i], instance.design[j], instance.labels[j], (i, j))

    def score(self, delta: float) -> float:
        return float(np.linalg.norm(pair_direction(self, delta)))


def pair_direction(pair: NeighborPair, delta: float) -> np.ndarray:
    """``(b a - b' a') - (a a^T - a' a'^T + delta I) 1``."""
    ones = np.ones_like(pair.a)
    return (pair.b * pair.a - pair.b_prime * pair.a_prime
            - pair.a * pair.a.sum() + pair.a_prime * pair.a_prime.sum() - delta * ones)


@dataclass(frozen=True, eq=False)
class DifferentiatingUpdate:
    s: float
    C1: np.ndarray
    C2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    noise_var: float


def differentiating_update(instance: ProblemInstance, schedule: Schedule, pair: NeighborPair,
                           sigma: float, s: float) -> DifferentiatingUpdate:
    d = instance.d
    if pair.a.size != d:
        raise DimensionMismatch("pair feature length does not match the instance")
    h = schedule.gamma(s) / d
    eye = np.eye(d)
    mats, shifts = [], []
    for a, b in ((pair.a, pair.b), (pair.a_prime, pair.b_prime)):
        mats.append(eye - h * (np.outer(a, a) + instance.delta * eye))
        shifts.append(h * b * a)
    return DifferentiatingUpdate(s=float(s), C1=mats[0], C2=mats[1], c1=shifts[0], c2=shifts[1],
                                 noise_var=h**2 * sigma**2)


@dataclass(frozen=True)
class ReleaseSpec:
    kind: str
    times: tuple

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in (LAST, ITERATES, AVERAGE):
            raise ValueError(f"unknown release kind {self.kind!r}")
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        if not times:
            raise ValueError("release needs at least one time")
        if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("release times must be positive and strictly increasing")
        if kind == LAST and len(times) != 1:
            raise ValueError("last-iterate release takes a single time")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "times", times)

    @classmethod
    def last(cls, t: float) -> "ReleaseSpec":
        return cls(LAST, (t,))

    @classmethod
    def iterates(cls, times) -> "ReleaseSpec":
        return cls(ITERATES, tuple(times))

    @classmethod
    def average(cls, times) -> "ReleaseSpec":
        return cls(AVERAGE, tuple(times))

    @property
    def horizon(self) -> float:
        return self.times[-1]


# -- Gaussian laws through the update --------------------------------------


def couple_at(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, law_at_s: GaussianLaw,
              pair: NeighborPair, sigma: float, s: float) -> tuple[GaussianLaw, GaussianLaw]:
    """Laws of the two processes right after the step that uses the differing record."""
    if law_at_s.dim != instance.d:
        raise DimensionMismatch("law dimension does not match the instance")
    upd = differentiating_update(instance, schedule, pair, sigma, s)
    out = []
    for C, c in ((upd.C1, upd.c1), (upd.C2, upd.c2)):
        out.append(GaussianLaw(C @ law_at_s.mean + c,
                               C @ law_at_s.cov @ C.T + upd.noise_var * np.eye(instance.d)))
    return out[0], out[1]


def propagate(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, risk_curve: RiskCurves,
              post_law: GaussianLaw, s: float, t: float, sigma: float,
              model: LinearizedHsgd | None = None) -> GaussianLaw:
    """Evolve ``post_law`` (the state just after time ``s``) to time ``t``."""
    if t < s:
        raise TimeOrder(f"need t >= s, got t={t}, s={s}")
    if t == s:
        return post_law
    if model is None:
        model = LinearizedHsgd(instance, cache, schedule, risk_curve, sigma)
    el = float(model.elapsed(t, s))
    phi = np.exp(-cache.eigvals * el)
    mean_e = phi * cache.to_eigen(post_law.mean) + model.drift_increment(el)
    U = cache.eigvecs
    cov_e = U.T @ post_law.cov @ U
    cov_e = phi[:, None] * cov_e * phi[None, :] + np.diag(model.noise_cov(s, t)[0])
    return GaussianLaw(cache.from_eigen(mean_e), U @ cov_e @ U.T)


# -- Renyi divergence -------------------------------------------------------


def _chol_logdet(mat: np.ndarray, name: str, info: dict) -> tuple[np.ndarray, float]:
    """Log-determinant of ``mat``; returns the (possibly ridged) matrix that was factored."""
    try:
        L = linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError:
        n = mat.shape[0]
        bump = _REG * max(np.trace(mat), 1e-300) / n
        warnings.warn(f"{name} not positive definite; adding {bump:.3e} I", RuntimeWarning, stacklevel=3)
        info.setdefault("regularized", []).append(name)
        mat = mat + bump * np.eye(n)
        L = linalg.cholesky(mat, lower=True)
    return mat, 2.0 * float(np.sum(np.log(np.diag(L))))


def renyi_gaussian(law1: GaussianLaw, law2: GaussianLaw, alpha: float, info: dict | None = None) -> float:
    """``D_alpha(law1 || law2)`` for Gaussians, ``alpha > 1``.

    With ``M = alpha V2 + (1 - alpha) V1`` and ``Delta = m1 - m2``::

        alpha/2 Delta^T M^-1 Delta
          + [(1-alpha) logdet V1 + alpha logdet V2 - logdet M] / (2 (alpha-1))

    Raises :class:`MixtureNotPD` if ``M`` is not positive definite, in which
    case the divergence is infinite. ``info`` (if given) collects the names of
    covariances that needed a ``1e-12 * trace/d`` ridge.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if law1.dim != law2.dim:
        raise DimensionMismatch("laws have different dimensions")
    info = {} if info is None else info
    V1, ld1 = _chol_logdet(law1.cov, "V1", info)
    V2, ld2 = _chol_logdet(law2.cov, "V2", info)
    M = alpha * V2 + (1.0 - alpha) * V1
    try:
        L = linalg.cholesky(M, lower=True)
    except linalg.LinAlgError:
        lo = float(np.linalg.eigvalsh(M)[0])
        raise MixtureNotPD(f"alpha-mixture covariance has eigenvalue {lo:.3e}", alpha=alpha) from None
    ldm = 2.0 * float(np.sum(np.log(np.diag(L))))
    z = linalg.solve_triangular(L, law1.mean - law2.mean, lower=True)
    quad = float(z @ z)
    val = 0.5 * alpha * quad + ((1 - alpha) * ld1 + alpha * ld2 - ldm) / (2 * (alpha - 1))
    return max(val, 0.0)


def mixture_bound(divergences, weights, alpha: float) -> float:
    """Renyi bound for a mixture with common weights: ``log sum w exp((a-1) D) / (a-1)``.

    Components with zero divergence are included by listing them with
    ``D = 0``. Evaluated in log space, so huge divergences do not overflow.
    """
    div = np.asarray(divergences, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    if not np.any(keep):
        return 0.0
    return float(logsumexp((alpha - 1) * div[keep] + np.log(w[keep])) / (alpha - 1))


def mixed_epsilon(divergences, s_grid, t: float, horizon: float, alpha: float) -> float:
    """Mix per-``s`` divergences over a uniform differentiating time on ``(0, horizon]``.

    Grid points in ``(0, t]`` share mass ``t / horizon`` equally; the rest of
    the mass (``s > t``) carries zero divergence.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    div = np.asarray(divergences, dtype=float)
    inside = s_grid <= t * (1 + 1e-12)
    n_in = int(inside.sum())
    tail = max(horizon - t, 0.0) / horizon
    if n_in == 0:
        return 0.0
    w = np.full(n_in, min(t, horizon) / (horizon * n_in))
    return mixture_bound(np.append(div[inside], 0.0), np.append(w, tail), alpha)


# -- fast last-iterate divergences ------------------------------------------


class _SharedPath:
    """Pre-update moments on an ``s`` grid, shared by every pair and release time."""

    def __init__(self, model: LinearizedHsgd, s_grid: np.ndarray):
        self.model = model
        self.s = s_grid
        self.m = model.mean_eigen(s_grid)
        self.D = model.cov_diag(s_grid)
        self.h = np.atleast_1d(model.schedule.gamma(s_grid)) / model.cache.dim
        self.c = 1.0 - self.h * model.cache.delta
        self.nvar = self.h**2 * model.sigma**2
        self.Gs = np.atleast_1d(model.schedule.gamma_integral(s_grid))

    def subset(self, rows: np.ndarray) -> "_SharedPath":
        other = object.__new__(_SharedPath)
        other.model = self.model
        for name in ("s", "m", "D", "h", "c", "nvar", "Gs"):
            setattr(other, name, getattr(self, name)[rows])
        return other

    def jump(self, a_e: np.ndarray, b: float) -> np.ndarray:
        """Post-update means ``c m - h a (a^T m) + h b a`` for every ``s``."""
        proj = self.m @ a_e
        return self.c[:, None] * self.m + self.h[:, None] * np.outer(b - proj, a_e)


def _fast_last(path: _SharedPath, pair_e: tuple, t: float, alpha: float, pair_index=None) -> np.ndarray:
    """``D_alpha`` of the last iterate at ``t`` for each ``s`` in ``path`` (all ``s <= t``)."""
    model = path.model
    lam = model.cache.eigvals
    a1, b1, a2, b2 = pair_e
    Dt = model.cov_diag([t])[0]
    el = np.maximum(model.schedule.gamma_integral(t) - path.Gs, 0.0)
    phi = np.exp(-np.outer(el, lam))
    phi2 = phi * phi
    Ds = path.D
    c, h = path.c, path.h
    E = Dt[None, :] + phi2 * ((c * c - 1.0)[:, None] * Ds + path.nvar[:, None])
    if np.any(E <= 0):
        bump = _REG * np.maximum(E.sum(axis=1, keepdims=True), 1e-300) / E.shape[1]
        E = np.where(E <= 0, bump, E)
    delta = phi * (path.jump(a1, b1) - path.jump(a2, b2))

    n_s = path.s.size
    cols = [phi * a1, phi * (Ds * a1), phi * a2, phi * (Ds * a2)]
    B = np.stack(cols, axis=2)  # (n_s, d, 4)
    Einv = 1.0 / E
    S = np.einsum("nda,nd,ndb->nab", B, Einv, B)
    r = np.einsum("nda,nd->na", B, Einv * delta)
    K = np.zeros((n_s, 4, 4))
    for blk, a in ((0, a1), (2, a2)):
        K[:, blk, blk] = h**2 * (Ds @ (a * a))
        K[:, blk, blk + 1] = K[:, blk + 1, blk] = -c * h
    eye2 = np.eye(2)
    ld = []
    for blk in (0, 2):
        sl = slice(blk, blk + 2)
        sign, val = np.linalg.slogdet(eye2 + K[:, sl, sl] @ S[:, sl, sl])
        ld.append(np.where(sign > 0, val, np.nan))
    Kmix = K.copy()
    Kmix[:, 0:2, 0:2] *= 1.0 - alpha
    Kmix[:, 2:4, 2:4] *= alpha
    core = np.eye(4) + Kmix @ S
    ev = np.linalg.eigvals(core)
    bad = np.min(ev.real, axis=1) <= 0
    if np.any(bad):
        k = int(np.argmax(bad))
        raise MixtureNotPD(f"alpha-mixture covariance not positive definite at s={path.s[k]:.6g}",
                           s=float(path.s[k]), alpha=alpha, pair_index=pair_index)
    _, ldm = np.linalg.slogdet(core)
    corr = np.einsum("na,na->n", r, np.linalg.solve(core, np.einsum("nab,nb->na", Kmix, r)[..., None])[..., 0])
    quad = np.sum(delta * delta * Einv, axis=1) - corr
    val = 0.5 * alpha * quad + ((1 - alpha) * ld[0] + alpha * ld[1] - ldm) / (2 * (alpha - 1))
    if np.any(np.isnan(val)):
        raise MixtureNotPD("component covariance not positive definite", alpha=alpha, pair_index=pair_index)
    return np.maximum(val, 0.0)


# -- dense block laws -------------------------------------------------------


def _post_cov_dense(path: _SharedPath, k: int, a_e: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis covariance and ``Phi(t,s)`` diagonal of one process at ``t`` for grid row ``k``."""
    model = path.model
    lam = model.cache.eigvals
    s = path.s[k]
    el = max(model.schedule.gamma_integral(t) - path.Gs[k], 0.0)
    phi = np.exp(-lam * el)
    Ds = path.D[k]
    C = path.c[k] * np.eye(lam.size) - path.h[k] * np.outer(a_e, a_e)
    post = (C * Ds) @ C.T + path.nvar[k] * np.eye(lam.size)
    noise = model.noise_cov(s, t)[0] if t > s else np.zeros(lam.size)
    return phi[:, None] * post * phi[None, :] + np.diag(noise), phi


def _block_laws(path: _SharedPath, k: int, pair_e: tuple, times: Sequence[float], average: bool,
                prefix: Sequence[float] = ()):
    """Stacked (or averaged) laws of the releases at ``times`` (all ``>= s``) for both processes.

    ``prefix`` lists earlier release times (``< s``). Their marginals are shared,
    but their cross-covariance with later releases passes through the
    record-dependent update, so they are included exactly when given.
    """
    model = path.model
    lam = model.cache.eigvals
    d = lam.size
    a1, b1, a2, b2 = pair_e
    P, J = len(prefix), len(times)
    n_blk = P + J
    all_times = np.asarray(list(prefix) + list(times), dtype=float)
    gam = np.atleast_1d(model.schedule.gamma_integral(all_times))
    base_means = model.mean_eigen(all_times)
    pre_cov = model.cov_diag(list(prefix)) if P else np.zeros((0, d))
    Gs = path.Gs[k]
    laws = []
    for a, b in ((a1, b1), (a2, b2)):
        jump = path.jump(a, b)[k] - path.m[k]
        C = path.c[k] * np.eye(d) - path.h[k] * np.outer(a, a)
        means = [base_means[r] for r in range(P)]
        covs = [np.diag(pre_cov[r]) for r in range(P)]
        for r, t in enumerate(times):
            cov, phi = _post_cov_dense(path, k, a, t)
            covs.append(cov)
            means.append(base_means[P + r] + phi * jump)
        big = np.empty((n_blk * d, n_blk * d))
        for r in range(n_blk):
            for q in range(r, n_blk):
                if r < P <= q:
                    into = np.exp(-lam * (Gs - gam[r]))
                    out = np.exp(-lam * (gam[q] - Gs))
                    blk = out[:, None] * C * (into * pre_cov[r])[None, :]
                else:
                    blk = np.exp(-lam * (gam[q] - gam[r]))[:, None] * covs[r]
                big[q * d:(q + 1) * d, r * d:(r + 1) * d] = blk
                big[r * d:(r + 1) * d, q * d:(q + 1) * d] = blk.T
        mean = np.concatenate(means)
        if average:
            avg = np.kron(np.ones((1, n_blk)), np.eye(d)) / n_blk
            laws.append(GaussianLaw(avg @ mean, avg @ big @ avg.T))
        else:
            laws.append(GaussianLaw(mean, big))
    return laws


# -- release accounting -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class RdpResult:
    """Divergences and mixed loss for a release, maximized over candidate pairs.

    ``divergences[p, k]`` is ``D_alpha`` for pair ``p`` when the differing
    record is processed at ``s_grid[k]`` (zero where ``s`` exceeds the last
    release time). ``epsilon`` is the mixture upper bound of the worst pair.
    """

    spec: ReleaseSpec
    alpha: float
    sigma: float
    s_grid: np.ndarray
    divergences: np.ndarray
    pair_epsilons: np.ndarray
    epsilon: float
    argmax_pair: int
    worst_s: float
    pair_labels: list = field(default_factory=list)
    upper_bound: bool = True
    regularized: bool = False


def default_s_grid(instance: ProblemInstance) -> np.ndarray:
    """Record positions ``l/d``, ``l = 1..n``."""
    return np.arange(1, instance.n_samples + 1) / instance.d


def _pairs_in_eigenbasis(cache: SpectralCache, pairs):
    return [(cache.to_eigen(p.a), p.b, cache.to_eigen(p.a_prime), p.b_prime) for p in pairs]


def rdp_release(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, risk_curve: RiskCurves,
                pair, sigma: float, alpha: float, spec: ReleaseSpec, s_grid=None, *,
                horizon: float | None = None, dense: bool = False, max_block_dim: int = MAX_BLOCK_DIM,
                full_joint: bool = False, model: LinearizedHsgd | None = None) -> RdpResult:
    """Renyi-DP loss of a release for one neighbouring pair or a list of candidates.

    ``horizon`` is the length ``T`` of the uniform differentiating-time law
    (defaults to ``n/d``). The last-iterate release uses a rank-two
    factorization with ``O(d)`` work per ``s``; ``dense=True`` forces the
    generic block route, which is also used for the other release kinds.

    By default a multi-time release only stacks the times at or after ``s``.
    ``full_joint=True`` also keeps the earlier releases with their exact
    cross-covariances; the divergence can only grow, so this is the
    conservative choice.
    """
    pairs = [pair] if isinstance(pair, NeighborPair) else list(pair)
    if not pairs:
        raise ValueError("need at least one neighbouring pair")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    T = instance.n_samples / instance.d if horizon is None else float(horizon)
    if spec.horizon > risk_curve.horizon * (1 + 1e-12) or spec.horizon > T * (1 + 1e-12):
        raise HorizonExceeded(f"release time {spec.horizon:.6g} beyond horizon")
    if spec.kind != LAST and len(spec.times) > 1 and instance.d > max_block_dim:
        raise ValueError(f"block releases limited to d <= {max_block_dim}; raise max_block_dim to override")
    s_grid = default_s_grid(instance) if s_grid is None else np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0) or np.any(np.diff(s_grid) <= 0):
        raise ValueError("s grid must be positive and strictly increasing")
    if model is None:
        model = LinearizedHsgd(instance, cache, schedule, risk_curve, sigma)
    t_last = spec.horizon
    active = np.flatnonzero(s_grid <= t_last * (1 + 1e-12))
    path = _SharedPath(model, s_grid[active]) if active.size else None
    pairs_e = _pairs_in_eigenbasis(cache, pairs)
    div = np.zeros((len(pairs), s_grid.size))
    info: dict = {}
    for p_idx, pe in enumerate(pairs_e):
        if path is None:
            continue
        if spec.kind == LAST and not dense:
            div[p_idx, active] = _fast_last(path, pe, t_last, alpha, pair_index=p_idx)
            continue
        for row, k in enumerate(active):
            s = s_grid[k]
            times = [t for t in spec.times if t >= s * (1 - 1e-12)]
            prefix = [t for t in spec.times if t < s * (1 - 1e-12)] if full_joint else []
            law1, law2 = _block_laws(path, row, pe, times, spec.kind == AVERAGE, prefix)
            try:
                div[p_idx, k] = renyi_gaussian(law1, law2, alpha, info)
            except MixtureNotPD as err:
                raise MixtureNotPD(str(err), s=float(s), alpha=alpha, pair_index=p_idx) from None
    eps = np.array([mixed_epsilon(div[p], s_grid, t_last, T, alpha) for p in range(len(pairs))])
    best = int(np.argmax(eps))
    worst_s = float(s_grid[int(np.argmax(div[best]))]) if s_grid.size else math.nan
    return RdpResult(spec=spec, alpha=float(alpha), sigma=float(sigma), s_grid=s_grid, divergences=div,
                     pair_epsilons=eps, epsilon=float(eps[best]), argmax_pair=best, worst_s=worst_s,
                     pair_labels=[p.index for p in pairs], regularized=bool(info))


def epsilon_curve(instance: ProblemInstance, cache: SpectralCache, schedule: Schedule, risk_curve: RiskCurves,
                  pairs, sigma: float, alpha: float, times, s_grid=None, horizon: float | None = None):
    """Last-iterate loss at each release time; returns a list of :class:`RdpResult`."""
    model = LinearizedHsgd(instance, cache, schedule, risk_curve, sigma)
    return [rdp_release(instance, cache, schedule, risk_curve, pairs, sigma, alpha, ReleaseSpec.last(t),
                        s_grid, horizon=horizon, model=model) for t in times]


# -- candidate pairs --------------------------------------------------------


def adversarial_pairs(instance: ProblemInstance, k_top: int, max_pairs: int = 10**6,
                      seed: int = 0) -> list[tuple[NeighborPair, float]]:
    """Ordered record pairs with the largest ``||g||``, best first.

    ``g = u_i - u_j - delta 1`` with ``u_i = b_i a_i - (a_i^T 1) a_i``. All
    ``n (n-1)`` ordered pairs are scored when there are at most ``max_pairs``;
    otherwise ``max_pairs`` pairs are drawn at random.
    """
    n = instance.n_samples
    if n < 2:
        raise ValueError("need at least two records")
    if k_top < 1:
        raise ValueError("k_top must be >= 1")
    A, b = instance.design, instance.labels
    u = b[:, None] * A - A * A.sum(axis=1, keepdims=True)
    delta, d = instance.delta, instance.d
    sq = np.einsum("ij,ij->i", u, u)
    tot = u.sum(axis=1)

    def scores(i, j):
        cross = np.einsum("ij,ij->i", u[i], u[j])
        val = sq[i] + sq[j] - 2 * cross - 2 * delta * (tot[i] - tot[j]) + delta**2 * d
        return np.sqrt(np.maximum(val, 0.0))

    if n * (n - 1) <= max_pairs:
        ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        ii = rng.integers(0, n, size=max_pairs)
        jj = (ii + rng.integers(1, n, size=max_pairs)) % n
    sc = np.empty(ii.size)
    for lo in range(0, ii.size, 200_000):
        sc[lo:lo + 200_000] = scores(ii[lo:lo + 200_000], jj[lo:lo + 200_000])
    k = min(k_top, sc.size)
    top = np.argpartition(-sc, k - 1)[:k]
    top = top[np.lexsort((jj[top], ii[top], -sc[top]))]
    return [(NeighborPair.from_records(instance, int(ii[t]), int(jj[t])), float(sc[t])) for t in top]
