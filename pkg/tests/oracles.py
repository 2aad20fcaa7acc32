"""Independent reference computations used by several test modules."""

import numpy as np
from scipy import integrate
from scipy.special import logsumexp


def moment_ode(inst, sched, x0, sigma, times):
    """(P, R) at ``times`` from the closed ODE system for the mean and covariance of the SDE."""
    d = inst.d
    S = inst.covariance
    A = S + inst.delta * np.eye(d)
    xt = inst.ground_truth

    def risk(m, V):
        v = m - xt
        return 0.5 * v @ S @ v + 0.5 * inst.noise_second_moment + 0.5 * np.trace(S @ V)

    def rhs(t, y):
        m, V = y[:d], y[d:].reshape(d, d)
        g = sched.gamma(t)
        P = risk(m, V)
        dm = -g * (A @ m - S @ xt)
        dV = -g * (A @ V + V @ A) + g**2 * (2 * P * S + sigma**2 * np.eye(d)) / d
        return np.concatenate([dm, dV.ravel()])

    y0 = np.concatenate([x0, np.zeros(d * d)])
    sol = integrate.solve_ivp(rhs, (0, max(times)), y0, method="DOP853", rtol=1e-12, atol=1e-14,
                              dense_output=True)
    out = []
    for t in times:
        y = sol.sol(t)
        m, V = y[:d], y[d:].reshape(d, d)
        P = risk(m, V)
        out.append((P, P + 0.5 * inst.delta * (m @ m + np.trace(V))))
    return np.array(out)


def renyi_quadrature(m1, s1, m2, s2, alpha):
    """1-D ``D_alpha(N(m1, s1^2) || N(m2, s2^2))`` by integrating ``p^alpha q^(1-alpha)``."""
    def logp(x, m, s):
        return -0.5 * ((x - m) / s) ** 2 - np.log(s * np.sqrt(2 * np.pi))

    # integrand is a Gaussian kernel; center the window on its peak
    a = alpha / s1**2 + (1 - alpha) / s2**2
    c = (alpha * m1 / s1**2 + (1 - alpha) * m2 / s2**2) / a
    w = 40 / np.sqrt(a)
    f = lambda x: np.exp(alpha * logp(x, m1, s1) + (1 - alpha) * logp(x, m2, s2))
    val, _ = integrate.quad(f, c - w, c + w, epsabs=0, epsrel=1e-13, limit=500, points=[c])
    return np.log(val) / (alpha - 1)


def mixture_renyi_quadrature(w, comps_p, comps_q, alpha):
    """1-D Renyi divergence between two Gaussian mixtures with shared weights."""
    logw = np.log(np.asarray(w, dtype=float))

    def logdens(x, comps):
        terms = [lw - 0.5 * ((x - m) / s) ** 2 - np.log(s * np.sqrt(2 * np.pi)) for lw, (m, s) in zip(logw, comps)]
        return logsumexp(terms)

    centers = [m for m, _ in comps_p + comps_q]
    width = max(s for _, s in comps_p + comps_q)
    lo, hi = min(centers) - 40 * width, max(centers) + 40 * width
    f = lambda x: np.exp(alpha * logdens(x, comps_p) + (1 - alpha) * logdens(x, comps_q))
    val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=1000, points=sorted(set(centers)))
    return np.log(val) / (alpha - 1)
