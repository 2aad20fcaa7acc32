import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from noisyhsgd import cli, generate_synthetic, initial_point, default_noise_std, population_risk

BASE = """\
[problem]
d = 8
n = 12
delta = 0.1
seed = 2

[schedule]
kind = constant
rate = {rate}

[run]
sigma = {sigma}
alpha = {alpha}
x0 = {x0}
x0_seed = 1
replicas = {replicas}
base_seed = 5
{extra_run}

[release]
strategy = last
times = {times}
pairs = 3

[sweep]
dims = 6, 8
seeds = 3
"""


def write_cfg(tmp_path, name="c.ini", rate=4.0, sigma="0.5, 1.0", alpha="2", x0="normal", replicas=4,
              times="0.5, 1.0, 1.5", extra_run="", extra=""):
    p = tmp_path / name
    p.write_text(BASE.format(rate=rate, sigma=sigma, alpha=alpha, x0=x0, replicas=replicas, times=times,
                             extra_run=extra_run) + extra)
    return p


def run(cmd, cfg, out, *flags):
    return cli.main([cmd, "--config", str(cfg), "--out", str(out), *flags])


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return list(csv.DictReader(lines[1:]))


def payload(path):
    return path.read_bytes()


@pytest.mark.parametrize("cmd", ["risk-curve", "privacy", "qq", "gen-data", "doob-check", "equivalence-sweep"])
def test_every_subcommand_succeeds(tmp_path, cmd):
    cfg = write_cfg(tmp_path, extra_run="mc_samples = 2000\ndoob_step = 3")
    assert run(cmd, cfg, tmp_path / "o") == 0
    manifest = json.loads((tmp_path / "o" / f"manifest_{cmd}.json").read_text())
    assert manifest["config_sha256"]
    for f in (tmp_path / "o").glob("*.csv"):
        assert f.read_text().startswith(f"# config_sha256={manifest['config_sha256']}")


def test_runs_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    for cmd in ("risk-curve", "privacy", "qq"):
        assert run(cmd, cfg, tmp_path / "a") == 0
        assert run(cmd, cfg, tmp_path / "b", "--threads", "2") == 0
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(files) >= 8
    for name in files:
        assert payload(tmp_path / "a" / name) == payload(tmp_path / "b" / name), name


def test_config_errors_point_at_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path, sigma="-1")
    assert run("risk-curve", cfg, tmp_path / "o") == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    line = next(i for i, t in enumerate(cfg.read_text().splitlines(), 1) if t.startswith("sigma"))
    assert f"{cfg}:{line}" in err and "sigma" in err

    cfg = write_cfg(tmp_path, alpha="1")
    assert run("privacy", cfg, tmp_path / "o") == cli.EXIT_CONFIG
    line = next(i for i, t in enumerate(cfg.read_text().splitlines(), 1) if t.startswith("alpha"))
    assert f"{cfg}:{line}" in capsys.readouterr().err

    cfg = write_cfg(tmp_path, times="0.5, 9.0")
    assert run("privacy", cfg, tmp_path / "o") == cli.EXIT_CONFIG
    assert "times" in capsys.readouterr().err

    cfg = write_cfg(tmp_path)
    cfg.write_text(cfg.read_text().replace("[problem]\nd = 8\nn = 12\n", "[problem]\ncsv = missing.csv\n"))
    assert run("risk-curve", cfg, tmp_path / "o") == cli.EXIT_CONFIG
    assert "does not exist" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, rate=1000.0)
    assert run("risk-curve", cfg, tmp_path / "o") == cli.EXIT_NUMERIC
    assert "UnstableStep" in capsys.readouterr().err


def test_mixture_failure_reports_context(tmp_path, capsys):
    cfg = write_cfg(tmp_path, rate=8.0, sigma="0.5", alpha="40")
    assert run("privacy", cfg, tmp_path / "o") == cli.EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "MixtureNotPD" in err and "alpha=40" in err and "pair=" in err and "s=" in err


def test_qq_singular_law(tmp_path, capsys):
    cfg = write_cfg(tmp_path, sigma="0", x0="truth", extra="")
    # with delta = 0 the truth is a fixed point of the noiseless dynamics, so the law is a point mass
    cfg.write_text(cfg.read_text().replace("delta = 0.1\nseed = 2\n", "delta = 0\nseed = 2\nnoise_std = 0\n"))
    assert run("qq", cfg, tmp_path / "o") == cli.EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "SingularCovariance" in err and "eigenvalue" in err


def test_zero_rate_curves_are_constant(tmp_path):
    cfg = write_cfg(tmp_path, rate=0.0, sigma="1.0", replicas=3)
    assert run("risk-curve", cfg, tmp_path / "o") == 0
    inst = generate_synthetic(8, 12, default_noise_std(8), 0.1, 2)
    start = population_risk(inst, initial_point(8, "normal", 1))
    P = np.array([float(r["P"]) for r in read_csv(tmp_path / "o" / "volterra_sigma1.csv")])
    np.testing.assert_allclose(P, start, rtol=1e-12)
    for name in ("sgd_sigma1.csv", "ensemble_sigma1.csv"):
        rows = read_csv(tmp_path / "o" / name)
        col = "P" if "P" in rows[0] else "mean_P"
        np.testing.assert_allclose([float(r[col]) for r in rows], start, rtol=1e-12)


def test_grid_refinement(tmp_path):
    coarse = write_cfg(tmp_path, "coarse.ini", rate=4.0, sigma="1.0", replicas=1,
                       extra_run="grid_step = 0.01")
    fine = write_cfg(tmp_path, "fine.ini", rate=4.0, sigma="1.0", replicas=1, extra_run="grid_step = 0.005")
    assert run("risk-curve", coarse, tmp_path / "c") == 0
    assert run("risk-curve", fine, tmp_path / "f") == 0
    rc = read_csv(tmp_path / "c" / "volterra_sigma1.csv")
    rf = read_csv(tmp_path / "f" / "volterra_sigma1.csv")
    tc = np.array([float(r["t"]) for r in rc])
    Pc = np.array([float(r["P"]) for r in rc])
    Pf = np.interp(tc, [float(r["t"]) for r in rf], [float(r["P"]) for r in rf])
    assert np.max(np.abs(Pc - Pf) / Pf) < 1e-4


def test_average_single_time_matches_last(tmp_path):
    cfg = write_cfg(tmp_path, times="1.0", sigma="1.0")
    assert run("privacy", cfg, tmp_path / "o", "--strategy", "last") == 0
    assert run("privacy", cfg, tmp_path / "o", "--strategy", "average") == 0
    assert payload(tmp_path / "o" / "privacy_last.csv") == payload(tmp_path / "o" / "privacy_average.csv")


def test_epsilon_nondecreasing_in_alpha(tmp_path):
    cfg = write_cfg(tmp_path, sigma="1.0, 1.5", alpha="2, 8", rate=2.0)
    assert run("privacy", cfg, tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "privacy_last.csv")
    eps = {(float(r["t"]), float(r["sigma"]), float(r["alpha"])): float(r["epsilon"]) for r in rows}
    keys = {(t, s) for t, s, _ in eps}
    assert len(keys) == 6
    for t, s in keys:
        assert eps[(t, s, 8.0)] >= eps[(t, s, 2.0)]


def test_privacy_dump_and_post_processing(tmp_path):
    cfg = write_cfg(tmp_path, sigma="1.0")
    assert run("privacy", cfg, tmp_path / "o", "--strategy", "iterates", "--dump-divergences") == 0
    dump = json.loads((tmp_path / "o" / "divergences_iterates.json").read_text())
    assert dump["upper_bound"] and len(dump["runs"]) == 1
    assert np.asarray(dump["runs"][0]["divergences"]).shape == (3, len(dump["s_grid"]))
    manifest = json.loads((tmp_path / "o" / "manifest_privacy.json").read_text())
    assert all(c["average_le_iterates"] for c in manifest["post_processing_checks"])
    assert manifest["full_joint"] is False


def test_full_joint_option_is_conservative(tmp_path):
    plain = write_cfg(tmp_path, "p.ini", sigma="1.0")
    joint = write_cfg(tmp_path, "j.ini", sigma="1.0")
    joint.write_text(joint.read_text().replace("pairs = 3\n", "pairs = 3\nfull_joint = true\n"))
    assert run("privacy", plain, tmp_path / "p", "--strategy", "iterates") == 0
    assert run("privacy", joint, tmp_path / "j", "--strategy", "iterates") == 0
    e_plain = float(read_csv(tmp_path / "p" / "privacy_iterates.csv")[0]["epsilon"])
    e_joint = float(read_csv(tmp_path / "j" / "privacy_iterates.csv")[0]["epsilon"])
    assert e_joint >= e_plain


def test_gen_data_roundtrip_through_csv_config(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run("gen-data", cfg, tmp_path / "o") == 0
    data = tmp_path / "o" / "data.csv"
    cfg2 = tmp_path / "from_csv.ini"
    text = cfg.read_text().replace("d = 8\nn = 12\n", f"csv = {data}\n")
    cfg2.write_text(text)
    assert run("risk-curve", cfg2, tmp_path / "o2") == 0
    manifest = json.loads((tmp_path / "o2" / "manifest_risk-curve.json").read_text())
    assert manifest["seeds"]["csv_sha256"]


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    res = subprocess.run([sys.executable, "-m", "noisyhsgd.cli", "gen-data", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "noisyhsgd.cli", "nope"], capture_output=True, text=True)
    assert res.returncode == 2
