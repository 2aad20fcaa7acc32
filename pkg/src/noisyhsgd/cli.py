"""Config-driven experiment runner.

Usage::

    noisy-hsgd <subcommand> --config run.ini [--out DIR] [--threads K]

Subcommands: risk-curve, privacy, qq, gen-data, doob-check, equivalence-sweep.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import re
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import io
from ._rng import replica_generator
from .errors import HsgdError, MixtureNotPD, SingularCovariance
from .hsgd import hsgd_law, sample_hsgd_paths
from .privacy import (AVERAGE, ITERATES, LAST, NeighborPair, ReleaseSpec, adversarial_pairs, default_s_grid,
                      rdp_release)
from .problem import generate_synthetic, initial_point, load_csv, default_noise_std
from .schedule import Schedule
from .sgd import doob_diagnostic, run_ensemble, run_sgd
from .spectral import build_cache
from .volterra import solve_volterra

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SECTIONS = ("problem", "schedule", "run", "release", "output", "sweep")


class ConfigError(Exception):
    pass


# -- configuration ----------------------------------------------------------


class Config:
    """INI file with typed getters whose errors name the offending line."""

    def __init__(self, path: Path):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigError(f"{self.path}: config file not found")
        self.text = self.path.read_text()
        self.hash = io.sha256_bytes(self.text.encode())
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(self.text, source=str(self.path))
        except configparser.Error as err:
            raise ConfigError(f"{self.path}: {err}".replace("\n", " ")) from None
        for sec in self.parser.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"{self.where(sec)}: unknown section [{sec}]")
        self.base = self.path.parent

    def where(self, section: str, key: str | None = None) -> str:
        current = None
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.strip()
            m = re.match(r"\[(.+)\]$", line)
            if m:
                current = m.group(1).strip()
                if key is None and current == section:
                    return f"{self.path}:{lineno}"
                continue
            if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", line):
                return f"{self.path}:{lineno}"
        return str(self.path)

    def raw(self, section: str, key: str, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return default

    def _fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: [{section}] {key}: {msg}")

    def get_float(self, section, key, default=None, minimum=None, strict_min=False):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            if default is None:
                self._fail(section, key, "required value missing")
            return default
        try:
            val = float(raw)
        except ValueError:
            self._fail(section, key, f"expected a number, got {raw!r}")
        if not np.isfinite(val):
            self._fail(section, key, "must be finite")
        if minimum is not None and (val <= minimum if strict_min else val < minimum):
            self._fail(section, key, f"must be {'>' if strict_min else '>='} {minimum}, got {val}")
        return val

    def get_int(self, section, key, default=None, minimum=None):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            if default is None:
                self._fail(section, key, "required value missing")
            return default
        try:
            val = int(raw)
        except ValueError:
            self._fail(section, key, f"expected an integer, got {raw!r}")
        if minimum is not None and val < minimum:
            self._fail(section, key, f"must be >= {minimum}, got {val}")
        return val

    def get_floats(self, section, key, default=None, minimum=None, strict_min=False):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            if default is None:
                self._fail(section, key, "required value missing")
            return list(default)
        out = []
        for tok in re.split(r"[,\s]+", raw):
            if not tok:
                continue
            try:
                val = float(tok)
            except ValueError:
                self._fail(section, key, f"expected numbers, got {tok!r}")
            if minimum is not None and (val <= minimum if strict_min else val < minimum):
                self._fail(section, key, f"values must be {'>' if strict_min else '>='} {minimum}, got {val}")
            out.append(val)
        if not out:
            self._fail(section, key, "empty list")
        return out

    def get_choice(self, section, key, choices, default=None):
        raw = self.raw(section, key, default)
        if raw is None:
            self._fail(section, key, "required value missing")
        if raw.lower() not in choices:
            self._fail(section, key, f"expected one of {', '.join(choices)}, got {raw!r}")
        return raw.lower()

    def get_bool(self, section, key, default=False):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        self._fail(section, key, f"expected true/false, got {raw!r}")


@dataclass
class Setup:
    cfg: Config
    instance: object
    cache: object
    schedule: Schedule
    x0: np.ndarray
    x0_desc: dict
    sigmas: list
    alphas: list
    horizon: float
    grid_step: float
    seeds: dict


def _problem(cfg: Config, empirical: bool):
    path = cfg.raw("problem", "csv")
    delta = cfg.get_float("problem", "delta", 0.1, minimum=0.0)
    if path:
        p = (cfg.base / path) if not Path(path).is_absolute() else Path(path)
        if not p.is_file():
            cfg._fail("problem", "csv", f"file {p} does not exist")
        label = cfg.raw("problem", "label_column", "-1")
        label = int(label) if re.fullmatch(r"-?\d+", label) else label
        try:
            inst = load_csv(p, label, delta)
        except (ValueError, IndexError) as err:
            cfg._fail("problem", "csv", f"cannot read data: {err}")
        return inst, {"csv": str(p), "csv_sha256": io.sha256_bytes(p.read_bytes())}
    d = cfg.get_int("problem", "d", minimum=1)
    n = cfg.get_int("problem", "n", minimum=1)
    raw_std = cfg.raw("problem", "noise_std", "auto")
    noise_std = default_noise_std(d) if raw_std == "auto" else cfg.get_float("problem", "noise_std", minimum=0.0)
    seed = cfg.get_int("problem", "seed", 0, minimum=0)
    inst = generate_synthetic(d, n, noise_std, delta, seed)
    if empirical or cfg.get_bool("problem", "empirical_covariance"):
        inst = inst.with_empirical_covariance()
    return inst, {"data_seed": seed}


def _schedule(cfg: Config, d: int) -> Schedule:
    kind = cfg.get_choice("schedule", "kind", ("constant", "learning_rate", "tabulated"), "constant")
    if kind == "constant":
        return Schedule.constant(cfg.get_float("schedule", "rate", minimum=0.0))
    if kind == "learning_rate":
        return Schedule.from_learning_rate(cfg.get_float("schedule", "eta", minimum=0.0), d)
    times = cfg.get_floats("schedule", "times", minimum=0.0)
    values = cfg.get_floats("schedule", "values", minimum=0.0)
    if len(times) != len(values):
        cfg._fail("schedule", "values", "must have as many entries as times")
    try:
        return Schedule.tabulated(times, values)
    except ValueError as err:
        cfg._fail("schedule", "times", str(err))


def load_setup(cfg: Config, empirical: bool = False) -> Setup:
    inst, seeds = _problem(cfg, empirical)
    schedule = _schedule(cfg, inst.d)
    x0_kind = cfg.get_choice("run", "x0", ("zero", "normal", "truth"), "zero")
    x0_seed = cfg.get_int("run", "x0_seed", 0, minimum=0)
    x0 = inst.ground_truth.copy() if x0_kind == "truth" else initial_point(inst.d, x0_kind, x0_seed)
    sigmas = cfg.get_floats("run", "sigma", [1.0], minimum=0.0)
    alphas = cfg.get_floats("run", "alpha", [2.0], minimum=1.0, strict_min=True)
    default_T = inst.n_samples / inst.d
    horizon = cfg.get_float("run", "horizon", default_T, minimum=0.0, strict_min=True)
    if horizon > default_T * (1 + 1e-12):
        cfg._fail("run", "horizon", f"exceeds one pass n/d = {default_T:.6g}")
    grid_step = cfg.get_float("run", "grid_step", 1.0 / inst.d, minimum=0.0, strict_min=True)
    seeds.update(base_seed=cfg.get_int("run", "base_seed", 0, minimum=0), x0_seed=x0_seed)
    return Setup(cfg, inst, build_cache(inst.covariance, inst.delta), schedule, x0,
                 {"kind": x0_kind, "seed": x0_seed}, sigmas, alphas, horizon, grid_step, seeds)


def _comment(setup: Setup) -> str:
    return f"config_sha256={setup.cfg.hash}"


def _manifest(out: Path, command: str, setup: Setup, files, extra: dict) -> None:
    inst = setup.instance
    payload = {
        "kind": "manifest",
        "command": command,
        "config": str(setup.cfg.path),
        "config_sha256": setup.cfg.hash,
        "config_text": setup.cfg.text,
        "seeds": setup.seeds,
        "x0": setup.x0_desc,
        "schedule": setup.schedule.describe(),
        "instance": io.instance_payload(inst),
        "files": sorted(str(Path(f).name) for f in files),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }
    io.write_json(out / f"manifest_{command}.json", payload)


def _pool(threads: int):
    return ThreadPoolExecutor(max_workers=max(1, threads))


# -- subcommands -----------------------------------------------------------


def cmd_risk_curve(setup: Setup, out: Path, args) -> None:
    cfg = setup.cfg
    replicas = cfg.get_int("run", "replicas", 1, minimum=1)
    shuffle = cfg.get_bool("run", "shuffle", True)
    stride = cfg.get_int("run", "record_stride", max(1, setup.instance.d // 10), minimum=1)
    n_steps = int(round(setup.horizon * setup.instance.d))
    inst, cache, sch = setup.instance, setup.cache, setup.schedule
    base_seed = setup.seeds["base_seed"]

    def one(sig):
        curve = solve_volterra(inst, cache, sch, setup.x0, sig, T=setup.horizon, grid_step=setup.grid_step)
        files = [out / f"volterra_sigma{sig:g}.csv"]
        curve.to_csv(files[0], _comment(setup))
        traj = run_sgd(inst, sch, setup.x0, sig, base_seed, record_stride=stride, n_steps=n_steps,
                       shuffle=shuffle, store_iterates=False, cache=cache)
        files.append(out / f"sgd_sigma{sig:g}.csv")
        traj.to_csv(files[-1], _comment(setup))
        gap = float(np.max(np.abs(traj.P - curve.at(traj.times))))
        info = {"sigma": sig, "volterra_inputs": curve.inputs_hash, "single_run_sup_gap": gap,
                "final_volterra_P": float(curve.P[-1])}
        if replicas > 1:
            ens = run_ensemble(inst, sch, setup.x0, sig, base_seed, replicas, shuffle=shuffle,
                               record_stride=stride, n_steps=n_steps, cache=cache)
            files.append(out / f"ensemble_sigma{sig:g}.csv")
            ens.to_csv(files[-1], _comment(setup))
            info["ensemble_sup_gap"] = float(np.max(np.abs(ens.mean_P - curve.at(ens.times))))
        return files, info

    with _pool(args.threads) as pool:
        results = list(pool.map(one, setup.sigmas))
    files = [f for fs, _ in results for f in fs]
    _manifest(out, "risk-curve", setup, files, {"replicas": replicas, "shuffle": shuffle, "runs": [i for _, i in results]})


def _candidate_pairs(setup: Setup):
    cfg = setup.cfg
    inst = setup.instance
    k_top = cfg.get_int("release", "pairs", 5, minimum=1)
    max_pairs = cfg.get_int("release", "max_pairs", 10**6, minimum=1)
    ranked = adversarial_pairs(inst, k_top, max_pairs=max_pairs, seed=setup.seeds["base_seed"])
    pairs = [p for p, _ in ranked]
    scores = [s for _, s in ranked]
    listed = cfg.raw("release", "pair_list")
    if listed:
        for tok in re.split(r"[,\s]+", listed):
            if not tok:
                continue
            m = re.fullmatch(r"(\d+):(\d+)", tok)
            if not m:
                cfg._fail("release", "pair_list", f"expected i:j entries, got {tok!r}")
            i, j = int(m.group(1)), int(m.group(2))
            if max(i, j) >= inst.n_samples or i == j:
                cfg._fail("release", "pair_list", f"invalid record pair {tok}")
            p = NeighborPair.from_records(inst, i, j)
            pairs.append(p)
            scores.append(p.score(inst.delta))
    return pairs, scores


def _release_times(setup: Setup, strategy: str):
    cfg = setup.cfg
    T = setup.horizon
    default = list(np.linspace(T / 20, T, 20)) if strategy == LAST else [T]
    times = cfg.get_floats("release", "times", default, minimum=0.0, strict_min=True)
    if any(t > T * (1 + 1e-12) for t in times):
        cfg._fail("release", "times", f"release times must not exceed the horizon {T:.6g}")
    if any(b <= a for a, b in zip(times, times[1:])):
        cfg._fail("release", "times", "release times must be strictly increasing")
    limit = cfg.get_int("release", "max_block_dim", 128, minimum=1)
    if strategy != LAST and len(times) > 1 and setup.instance.d > limit:
        cfg._fail("release", "max_block_dim", f"d = {setup.instance.d} exceeds the block limit {limit}")
    return times, limit


def cmd_privacy(setup: Setup, out: Path, args) -> None:
    cfg = setup.cfg
    strategy = args.strategy or cfg.get_choice("release", "strategy", (LAST, ITERATES, AVERAGE), LAST)
    times, limit = _release_times(setup, strategy)
    full_joint = cfg.get_bool("release", "full_joint", False)
    pairs, scores = _candidate_pairs(setup)
    inst, cache, sch = setup.instance, setup.cache, setup.schedule
    T = setup.horizon
    s_grid = default_s_grid(inst)
    s_grid = s_grid[s_grid <= T * (1 + 1e-12)]
    if strategy == LAST:
        specs = [ReleaseSpec.last(t) for t in times]
    elif strategy == ITERATES:
        specs = [ReleaseSpec.iterates(times)]
    else:
        specs = [ReleaseSpec.average(times)]

    def one(sig):
        curve = solve_volterra(inst, cache, sch, setup.x0, sig, T=T, grid_step=setup.grid_step)
        rows, dumps, checks = [], [], []
        for alpha in setup.alphas:
            for spec in specs:
                try:
                    res = rdp_release(inst, cache, sch, curve, pairs, sig, alpha, spec, s_grid, horizon=T,
                                      max_block_dim=limit, full_joint=full_joint)
                except MixtureNotPD as err:
                    i, j = pairs[err.pair_index].index if err.pair_index is not None else (-1, -1)
                    raise MixtureNotPD(f"{err} (sigma={sig:g}, alpha={alpha:g}, pair={i}:{j})",
                                       s=err.s, alpha=alpha, pair_index=err.pair_index) from None
                i, j = res.pair_labels[res.argmax_pair]
                rows.append([spec.horizon, alpha, sig, res.epsilon, f"{i}:{j}", res.worst_s])
                if args.dump_divergences:
                    dumps.append({"sigma": sig, "alpha": alpha, "times": list(spec.times),
                                  "epsilon": res.epsilon, "pair_epsilons": res.pair_epsilons,
                                  "divergences": res.divergences, "regularized": res.regularized})
                if strategy != LAST:
                    other = ITERATES if strategy == AVERAGE else AVERAGE
                    alt = rdp_release(inst, cache, sch, curve, pairs, sig, alpha, ReleaseSpec(other, spec.times),
                                      s_grid, horizon=T, max_block_dim=limit, full_joint=full_joint)
                    eps = {strategy: res.epsilon, other: alt.epsilon}
                    ok = eps[AVERAGE] <= eps[ITERATES] + 1e-12
                    if not ok:
                        warnings.warn(f"average release loss exceeds iterates release loss at sigma={sig:g}")
                    checks.append({"sigma": sig, "alpha": alpha, **eps, "average_le_iterates": ok})
        return rows, dumps, checks

    with _pool(args.threads) as pool:
        results = list(pool.map(one, setup.sigmas))
    rows = [r for rs, _, _ in results for r in rs]
    path = out / f"privacy_{strategy}.csv"
    io.write_rows(path, ["t", "alpha", "sigma", "epsilon", "argmax_pair_index", "worst_s"], rows, _comment(setup))
    files = [path]
    if args.dump_divergences:
        dpath = out / f"divergences_{strategy}.json"
        io.write_json(dpath, {"kind": "rdp_divergences", "config_sha256": setup.cfg.hash, "s_grid": s_grid,
                              "pairs": [p.index for p in pairs], "upper_bound": True,
                              "runs": [d for _, ds, _ in results for d in ds]})
        files.append(dpath)
    checks = [c for _, _, cs in results for c in cs]
    _manifest(out, "privacy", setup, files, {
        "strategy": strategy, "release_times": times, "full_joint": full_joint, "epsilon_is_upper_bound": True,
        "pairs": [{"records": list(p.index), "score": s} for p, s in zip(pairs, scores)],
        "post_processing_checks": checks})


def _mahalanobis_qq(law, samples):
    vals, vecs = np.linalg.eigh(law.cov)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    # spread below the rounding level of the mean itself is no spread at all
    floor = np.finfo(float).eps ** 2 * (1.0 + float(law.mean @ law.mean)) * law.dim
    if vals[0] <= 1e-12 * scale or vals[-1] <= floor:
        raise SingularCovariance(f"law covariance is singular (smallest eigenvalue {vals[0]:.3e})",
                                 min_eigenvalue=float(vals[0]))
    z = (samples - law.mean) @ vecs / np.sqrt(vals)
    m2 = np.sort(np.sum(z * z, axis=1))
    N = m2.size
    q = stats.chi2.ppf((np.arange(1, N + 1) - 0.5) / N, law.dim)
    slope = float(np.polyfit(q, m2, 1)[0])
    return m2, q, slope


def qq_slope(law, samples) -> float:
    """Least-squares slope of sorted squared Mahalanobis distances against chi-square quantiles."""
    return _mahalanobis_qq(law, samples)[2]


def cmd_qq(setup: Setup, out: Path, args) -> None:
    cfg = setup.cfg
    replicas = cfg.get_int("run", "replicas", 2000, minimum=2)
    shuffle = cfg.get_bool("run", "shuffle", True)
    control = cfg.get_bool("run", "control", True)
    inst, cache, sch = setup.instance, setup.cache, setup.schedule
    n_steps = int(round(setup.horizon * inst.d))
    T = n_steps / inst.d
    base_seed = setup.seeds["base_seed"]

    def one(sig):
        curve = solve_volterra(inst, cache, sch, setup.x0, sig, T=T, grid_step=setup.grid_step)
        law = hsgd_law(inst, cache, sch, curve, setup.x0, sig, T)
        ens = run_ensemble(inst, sch, setup.x0, sig, base_seed, replicas, shuffle=shuffle, n_steps=n_steps,
                           record_stride=n_steps or 1, cache=cache)
        m2, q, slope = _mahalanobis_qq(law, ens.final_iterates)
        files = [out / f"qq_sigma{sig:g}.csv"]
        io.write_rows(files[0], ["empirical", "chi2"], zip(m2, q), _comment(setup))
        info = {"sigma": sig, "slope": slope}
        if control:
            ctrl = law.sample(replica_generator(base_seed, replicas, 2), replicas)
            m2c, qc, slope_c = _mahalanobis_qq(law, ctrl)
            files.append(out / f"qq_control_sigma{sig:g}.csv")
            io.write_rows(files[-1], ["empirical", "chi2"], zip(m2c, qc), _comment(setup))
            info["control_slope"] = slope_c
        return files, info

    with _pool(args.threads) as pool:
        results = list(pool.map(one, setup.sigmas))
    files = [f for fs, _ in results for f in fs]
    rows = [[i["sigma"], i["slope"], i.get("control_slope", float("nan"))] for _, i in results]
    io.write_rows(out / "qq_slopes.csv", ["sigma", "slope", "control_slope"], rows, _comment(setup))
    files.append(out / "qq_slopes.csv")
    _manifest(out, "qq", setup, files, {"replicas": replicas, "shuffle": shuffle, "runs": [i for _, i in results]})


def cmd_gen_data(setup: Setup, out: Path, args) -> None:
    inst = setup.instance
    header = [f"a{i}" for i in range(inst.d)] + ["b"]
    rows = np.column_stack([inst.design, inst.labels])
    io.write_rows(out / "data.csv", header, rows.tolist(), _comment(setup))
    io.write_rows(out / "ground_truth.csv", ["x"], [[v] for v in inst.ground_truth], _comment(setup))
    io.write_json(out / "instance.json", {**io.instance_payload(inst), "config_sha256": setup.cfg.hash})
    _manifest(out, "gen-data", setup, [out / "data.csv", out / "ground_truth.csv", out / "instance.json"], {})


def cmd_doob_check(setup: Setup, out: Path, args) -> None:
    cfg = setup.cfg
    inst = setup.instance
    k = cfg.get_int("run", "doob_step", 0, minimum=0)
    if k >= inst.n_samples:
        cfg._fail("run", "doob_step", f"must be < n = {inst.n_samples}")
    mc = cfg.get_int("run", "mc_samples", 10**6, minimum=2)
    source = cfg.get_choice("run", "doob_source", ("population", "empirical"),
                            "population" if inst.feature_scale is not None else "empirical")
    if source == "population" and inst.feature_scale is None:
        cfg._fail("run", "doob_source", "population sampling needs a synthetic instance")
    base_seed = setup.seeds["base_seed"]
    rows, infos = [], []
    for sig in setup.sigmas:
        if k > 0:
            traj = run_sgd(inst, setup.schedule, setup.x0, sig, base_seed, record_stride=k, n_steps=k,
                           shuffle=cfg.get_bool("run", "shuffle", True), cache=setup.cache)
            state = traj.iterates[-1]
        else:
            state = setup.x0
        rep = doob_diagnostic(inst, setup.schedule, state, sig, k, mc, base_seed + 1, source=source)
        rows.append([sig, k, rep.sample_mean, rep.predictable, rep.leading, rep.correction,
                     rep.std_error, rep.z_score])
        infos.append({"sigma": sig, "z_score": rep.z_score, "passed": rep.passed})
    path = out / "doob.csv"
    io.write_rows(path, ["sigma", "k", "sample_mean", "predictable", "leading", "correction", "std_error",
                         "z_score"], rows, _comment(setup))
    _manifest(out, "doob-check", setup, [path], {"mc_samples": mc, "source": source, "runs": infos})


def sup_gap_sweep(d: int, n_ratio: float, delta: float, schedule: Schedule, sigma: float, seeds: int,
                  data_seed: int, base_seed: int, x0_kind: str = "normal", x0_seed: int = 0) -> np.ndarray:
    """``sup_k |P(x_k) - P(X_{k/d})|`` for ``seeds`` paired SGD / HSGD-sampler runs at dimension ``d``.

    Pair ``r`` uses replica ``r`` of both simulators; the sampler runs four
    Euler steps per SGD step and is compared at every SGD step.
    """
    n = int(round(n_ratio * d))
    inst = generate_synthetic(d, n, default_noise_std(d), delta, data_seed)
    cache = build_cache(inst.covariance, delta)
    x0 = initial_point(d, x0_kind, x0_seed)
    _, P = run_ensemble(inst, schedule, x0, sigma, base_seed, seeds, shuffle=True, record_stride=1,
                        cache=cache, return_tracks=True)
    hs = sample_hsgd_paths(inst, cache, schedule, x0, sigma, base_seed, n / d, replicas=seeds,
                           steps_per_unit_time=4 * d, record_every=4)
    return np.max(np.abs(P - hs.risk), axis=1)


def cmd_equivalence_sweep(setup: Setup, out: Path, args) -> None:
    cfg = setup.cfg
    dims = [int(v) for v in cfg.get_floats("sweep", "dims", [100, 200, 400], minimum=1)]
    seeds = cfg.get_int("sweep", "seeds", 50, minimum=1)
    n_ratio = cfg.get_float("sweep", "n_ratio", 1.5, minimum=0.0, strict_min=True)
    rate = cfg.get_float("sweep", "rate", 50.0, minimum=0.0)
    schedule = Schedule.constant(rate)
    data_seed = setup.seeds.get("data_seed", 0)
    base_seed = setup.seeds["base_seed"]
    tasks = [(sig, d) for sig in setup.sigmas for d in dims]

    def one(task):
        sig, d = task
        return sig, d, sup_gap_sweep(d, n_ratio, setup.instance.delta, schedule, sig, seeds, data_seed, base_seed,
                                     setup.x0_desc["kind"], setup.x0_desc["seed"])

    with _pool(args.threads) as pool:
        results = list(pool.map(one, tasks))
    rows = [[sig, d, r, float(g)] for sig, d, gaps in results for r, g in enumerate(gaps)]
    path = out / "sweep.csv"
    io.write_rows(path, ["sigma", "d", "seed", "sup_gap"], rows, _comment(setup))
    medians = [{"sigma": sig, "d": d, "median_sup_gap": float(np.median(g))} for sig, d, g in results]
    _manifest(out, "equivalence-sweep", setup, [path], {"rate": rate, "seeds": seeds, "medians": medians})


COMMANDS = {
    "risk-curve": cmd_risk_curve,
    "privacy": cmd_privacy,
    "qq": cmd_qq,
    "gen-data": cmd_gen_data,
    "doob-check": cmd_doob_check,
    "equivalence-sweep": cmd_equivalence_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisy-hsgd", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides [output] directory)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--dump-divergences", action="store_true", help="write per-s divergences (privacy)")
        p.add_argument("--strategy", choices=(LAST, ITERATES, AVERAGE), default=None)
        p.add_argument("--empirical-covariance", action="store_true",
                       help="use the Gram matrix of the data as covariance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args.config)
        setup = load_setup(cfg, args.empirical_covariance)
        out = args.out or Path(cfg.raw("output", "directory", "out"))
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](setup, out, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HsgdError, ValueError) as err:
        print(f"config error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
