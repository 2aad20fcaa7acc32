"""JSON container and CSV helpers shared by the command-line runner."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT = "noisyhsgd/v1"


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload: dict) -> str:
    return json.dumps({"format": FORMAT, **payload}, default=_default, sort_keys=True, indent=1) + "\n"


def write_json(path, payload: dict) -> None:
    Path(path).write_text(dumps(payload))


def read_json(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} container")
    return data


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_rows(path, header, rows, comment: str | None = None) -> None:
    """CSV with an optional leading ``# comment`` line; floats at 17 digits."""
    with Path(path).open("w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def law_payload(law, **meta) -> dict:
    return {"kind": "gaussian_law", **meta, "mean": law.mean, "cov": {"shape": list(law.cov.shape),
                                                                      "data": law.cov.ravel()}}


def instance_payload(instance) -> dict:
    return {
        "kind": "problem_instance",
        "d": instance.d,
        "n_samples": instance.n_samples,
        "delta": instance.delta,
        "noise_std": instance.noise_std,
        "noise_second_moment": instance.noise_second_moment,
        "feature_scale": instance.feature_scale,
        "seed": instance.seed,
        "ground_truth": instance.ground_truth,
        "design_sha256": array_digest(instance.design),
        "labels_sha256": array_digest(instance.labels),
        "covariance_sha256": array_digest(instance.covariance),
    }
