import numpy as np
import pytest

import noisyhsgd.sgd as sgd_mod
from noisyhsgd import (ExhaustedData, Schedule, build_cache, doob_diagnostic, from_arrays, generate_synthetic,
                       initial_point, default_noise_std, population_risk, run_ensemble, run_sgd, solve_volterra)
from noisyhsgd._rng import NOISE_STREAM, SHUFFLE_STREAM, replica_generator


def test_zero_rate_keeps_x0(small):
    s = small
    tr = run_sgd(s.inst, Schedule.constant(0.0), s.x0, 0.0, 1, record_stride=1)
    np.testing.assert_array_equal(tr.iterates, np.tile(s.x0, (s.inst.n_samples + 1, 1)))


def test_one_step_arithmetic():
    inst = from_arrays(np.array([[1.0], [2.0]]), np.array([0.0, 0.0]), 0.0)
    tr = run_sgd(inst, Schedule.from_learning_rate(0.5, 1), np.array([1.0]), 0.0, 0, n_steps=1, record_stride=1)
    assert tr.iterates[1, 0] == pytest.approx(0.5)


def test_matches_plain_loop(small):
    s = small
    seed = 31
    tr = run_sgd(s.inst, s.sched, s.x0, s.sigma, seed, record_stride=1, shuffle=True)
    noise = replica_generator(seed, 0, NOISE_STREAM).standard_normal((s.inst.n_samples, s.d))
    order = replica_generator(seed, 0, SHUFFLE_STREAM).permutation(s.inst.n_samples)
    x = s.x0.copy()
    for k in range(s.inst.n_samples):
        a, b = s.inst.design[order[k]], s.inst.labels[order[k]]
        eta = s.sched.gamma(k / s.d) / s.d
        g = (np.outer(a, a) + s.inst.delta * np.eye(s.d)) @ x - b * a + s.sigma * noise[k]
        x = x - eta * g
        np.testing.assert_allclose(tr.iterates[k + 1], x, atol=1e-12)


def test_deterministic_and_track_consistent(small):
    s = small
    a = run_sgd(s.inst, s.sched, s.x0, s.sigma, 5, record_stride=3)
    b = run_sgd(s.inst, s.sched, s.x0, s.sigma, 5, record_stride=3)
    np.testing.assert_array_equal(a.iterates, b.iterates)
    np.testing.assert_array_equal(a.iterates[0], s.x0)
    assert a.steps[-1] == s.inst.n_samples and np.all(np.diff(a.steps) > 0)
    for x, p, r in zip(a.iterates, a.P, a.R):
        assert p == pytest.approx(population_risk(s.inst, x), abs=1e-12)
        assert r == pytest.approx(population_risk(s.inst, x, regularized=True), abs=1e-12)


def test_noise_chunking_invisible(small, monkeypatch):
    s = small
    ref = run_sgd(s.inst, s.sched, s.x0, s.sigma, 9, record_stride=1)
    monkeypatch.setattr(sgd_mod, "_NOISE_BUDGET", 3 * s.d)
    alt = run_sgd(s.inst, s.sched, s.x0, s.sigma, 9, record_stride=1)
    np.testing.assert_array_equal(ref.iterates, alt.iterates)


def test_exhausted(small):
    with pytest.raises(ExhaustedData):
        run_sgd(small.inst, small.sched, small.x0, 1.0, 0, n_steps=small.inst.n_samples + 1)


def test_ensemble_single_replica(small):
    s = small
    tr = run_sgd(s.inst, s.sched, s.x0, s.sigma, 4, shuffle=True)
    ens = run_ensemble(s.inst, s.sched, s.x0, s.sigma, 4, 1, shuffle=True)
    np.testing.assert_array_equal(ens.mean_P, tr.P)
    np.testing.assert_array_equal(ens.final_iterates[0], tr.iterates[-1])
    np.testing.assert_array_equal(ens.var_P, 0.0)


def test_ensemble_zero_variance(small):
    s = small
    ens = run_ensemble(s.inst, Schedule.constant(0.0), s.x0, 0.0, 4, 7, shuffle=True)
    np.testing.assert_array_equal(ens.var_P, 0.0)


def test_ensemble_batching_invisible(small):
    s = small
    big, P_big = run_ensemble(s.inst, s.sched, s.x0, s.sigma, 2, 70, shuffle=True, return_tracks=True)
    tr = run_sgd(s.inst, s.sched, s.x0, s.sigma, 2, shuffle=True)
    np.testing.assert_array_equal(P_big[0], tr.P)
    assert big.mean_P[0] == pytest.approx(tr.P[0])
    assert P_big.shape == (70, tr.P.size)


@pytest.mark.slow
def test_ensemble_tracks_volterra():
    d = 100
    inst = generate_synthetic(d, 150, default_noise_std(d), 0.1, 12)
    cache = build_cache(inst.covariance, 0.1)
    sched = Schedule.from_learning_rate(0.05, d)
    x0 = initial_point(d, "normal", 1)
    curve = solve_volterra(inst, cache, sched, x0, 1.0)
    ens = run_ensemble(inst, sched, x0, 1.0, 8, 500, shuffle=True, cache=cache)
    z = (ens.mean_P - curve.at(ens.times))[1:] / ens.stderr_P[1:]
    assert np.max(np.abs(z)) < 3.0


@pytest.mark.slow
def test_plateau_ordered_in_sigma():
    d = 100
    inst = generate_synthetic(d, 150, default_noise_std(d), 0.1, 12)
    cache = build_cache(inst.covariance, 0.1)
    sched = Schedule.constant(50.0)
    x0 = initial_point(d, "normal", 1)
    finals = []
    for sig in (0.0, 1.0, 1.25, 1.5):
        ens = run_ensemble(inst, sched, x0, sig, 3, 200, shuffle=True, cache=cache)
        finals.append((ens.mean_P[-1], ens.stderr_P[-1]))
    for (m0, s0), (m1, s1) in zip(finals, finals[1:]):
        assert (m1 - m0) / np.hypot(s0, s1) > 2.0


def test_csv(small, tmp_path):
    tr = run_sgd(small.inst, small.sched, small.x0, small.sigma, 1, store_iterates=False)
    assert tr.iterates is None
    tr.to_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "k,t,P,R" and len(rows) == tr.steps.size + 1


# -- Doob diagnostic --------------------------------------------------------


def _doob_setup(d=20):
    inst = generate_synthetic(d, 30, default_noise_std(d), 0.1, 6)
    x = inst.ground_truth + 0.3 * initial_point(d, "normal", 2)
    return inst, x


def test_doob_zero_rate():
    inst, x = _doob_setup()
    rep = doob_diagnostic(inst, Schedule.constant(0.0), x, 1.0, 0, 1000, 1)
    assert rep.predictable == 0.0 and rep.sample_mean == 0.0 and rep.z_score == 0.0


def test_doob_sigma_term():
    inst, x = _doob_setup()
    sched = Schedule.constant(5.0)
    r0 = doob_diagnostic(inst, sched, x, 0.0, 2, 1000, 1)
    r1 = doob_diagnostic(inst, sched, x, 1.3, 2, 1000, 1)
    eta = 5.0 / inst.d
    assert r1.predictable - r0.predictable == pytest.approx(0.5 * eta**2 * 1.3**2 * inst.d, rel=1e-12)
    assert r1.leading - r0.leading == pytest.approx(0.5 * eta**2 * 1.3**2 * inst.d, rel=1e-12)


@pytest.mark.parametrize("source", ["population", "empirical"])
@pytest.mark.parametrize("sigma", [0.0, 1.0])
def test_doob_monte_carlo(source, sigma):
    inst, x = _doob_setup()
    rep = doob_diagnostic(inst, Schedule.constant(5.0), x, sigma, 3, 200_000, 42, source=source)
    assert rep.passed, rep


def test_doob_requires_population_sampler():
    inst = from_arrays(np.eye(3), np.ones(3), 0.1)
    with pytest.raises(ValueError):
        doob_diagnostic(inst, Schedule.constant(1.0), np.zeros(3), 1.0, 0, 10, 0)
