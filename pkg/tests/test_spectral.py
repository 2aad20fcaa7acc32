import numpy as np
import pytest
from scipy import integrate, linalg

from noisyhsgd import NegativeEigenvalue, NotSymmetric, Schedule, TimeOrder, build_cache
from noisyhsgd.spectral import exp_trapezoid_weights, kernel_traces, transition, transition_diag


def _spd(rng, d):
    m = rng.standard_normal((d, d))
    return m @ m.T / d


def test_cache_reconstructs(rng):
    cov = _spd(rng, 7)
    cache = build_cache(cov, 0.3)
    np.testing.assert_allclose(cache.covariance, cov, atol=1e-12)
    np.testing.assert_allclose(cache.curvature, cov + 0.3 * np.eye(7), atol=1e-12)
    np.testing.assert_allclose(cache.eigvecs.T @ cache.eigvecs, np.eye(7), atol=1e-12)
    x = rng.standard_normal(7)
    np.testing.assert_allclose(cache.from_eigen(cache.to_eigen(x)), x, atol=1e-13)


def test_cache_errors():
    with pytest.raises(NotSymmetric):
        build_cache(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.1)
    with pytest.raises(NegativeEigenvalue):
        build_cache(np.diag([1.0, -0.5]), 0.1)


def test_transition_matches_expm(rng):
    cov = _spd(rng, 6)
    cache = build_cache(cov, 0.2)
    sched = Schedule.tabulated([0.0, 1.0], [3.0, 1.0])
    t, s = 1.4, 0.3
    big = sched.gamma_integral(t) - sched.gamma_integral(s)
    ref = linalg.expm(-(cov + 0.2 * np.eye(6)) * big)
    np.testing.assert_allclose(transition(cache, sched, t, s), ref, atol=1e-12)
    np.testing.assert_allclose(transition(cache, sched, s, s), np.eye(6), atol=1e-14)
    with pytest.raises(TimeOrder):
        transition_diag(cache, sched, 0.1, 0.2)


def test_kernel_traces_dense(rng):
    cov = _spd(rng, 5)
    cache = build_cache(cov, 0.1)
    sched = Schedule.constant(2.0)
    t, s, sigma = 0.9, 0.4, 1.3
    phi = linalg.expm(-(cov + 0.1 * np.eye(5)) * 2.0 * (t - s))
    A = cov + 0.1 * np.eye(5)
    for name, H in (("P", cov), ("R", A)):
        G, Gp = kernel_traces(cache, sched, t, s, sigma, name)
        assert G == pytest.approx(4.0 / 5 * np.trace(H @ phi @ cov @ phi), rel=1e-10)
        assert Gp == pytest.approx(sigma**2 * 4.0 / 10 * np.trace(H @ phi @ phi), rel=1e-10)


@pytest.mark.parametrize("r", [0.0, 1e-6, 0.01, 0.19999, 0.20001, 1.0, 30.0])
def test_exp_weights_quadrature(r):
    w0, w1 = exp_trapezoid_weights(r)
    ref0 = integrate.quad(lambda x: np.exp(-r * (1 - x)) * (1 - x), 0, 1, epsabs=1e-15)[0]
    ref1 = integrate.quad(lambda x: np.exp(-r * (1 - x)) * x, 0, 1, epsabs=1e-15)[0]
    assert w0 == pytest.approx(ref0, abs=1e-14)
    assert w1 == pytest.approx(ref1, abs=1e-14)
