import time

import numpy as np
import pytest

from noisyhsgd import Schedule, build_cache, generate_synthetic, initial_point, default_noise_std, solve_volterra


class Small:
    """A d=12 synthetic problem with its cache, schedule and risk curves."""

    def __init__(self, d=12, n=18, rate=8.0, sigma=0.7, seed=4):
        self.d = d
        self.inst = generate_synthetic(d, n, default_noise_std(d), 0.1, seed)
        self.cache = build_cache(self.inst.covariance, 0.1)
        self.sched = Schedule.constant(rate)
        self.x0 = initial_point(d, "normal", seed + 1)
        self.sigma = sigma
        self.curve = solve_volterra(self.inst, self.cache, self.sched, self.x0, sigma)


@pytest.fixture(scope="session")
def small():
    return Small()


@pytest.fixture
def rng():
    return np.random.default_rng(20251018)


# -- acceptance bookkeeping ---------------------------------------------------

_VERDICTS = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, store, number, title, budget):
        self.store, self.number, self.title, self.budget = store, number, title, budget
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None and elapsed <= self.budget
        note = self.detail
        if exc_type is not None:
            note = f"{note}; {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}".strip("; ")
        elif not ok:
            note = f"{note}; over the {self.budget:g} s budget"
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title}  [{elapsed:.1f} s]  {note}"
        self.store.append((self.number, line))
        print(line)
        if exc_type is None and not ok:
            raise AssertionError(f"runtime {elapsed:.1f} s exceeds {self.budget:g} s")
        return False


@pytest.fixture
def criterion(request):
    store = request.config.stash.setdefault(_VERDICTS, [])
    return lambda number, title, budget: _Criterion(store, number, title, budget)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
