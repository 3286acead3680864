"""Checkpoints: one ``.npz`` holding ``(spec descriptor, params)`` per network.

Layout::

    format          -> "csirl-ckpt-v1"
    names           -> array of network names
    spec/<name>     -> MLPSpec.describe() string, e.g. "4:256,256:4:relu"
    params/<name>   -> float64 array, (P,) or (n, P) for an ensemble
    meta            -> optional JSON string
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import MLPSpec, check_params

CKPT_FORMAT = "csirl-ckpt-v1"


def save_checkpoint(path, nets: dict[str, tuple[MLPSpec, np.ndarray]], meta: dict | None = None) -> Path:
    path = Path(path)
    payload = {"format": np.array(CKPT_FORMAT), "names": np.array(sorted(nets))}
    for name, (spec, params) in nets.items():
        params = np.asarray(params, dtype=np.float64)
        check_params(spec, params)
        payload[f"spec/{name}"] = np.array(spec.describe())
        payload[f"params/{name}"] = params
    payload["meta"] = np.array(json.dumps(meta or {}, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


def load_checkpoint(path) -> tuple[dict[str, tuple[MLPSpec, np.ndarray]], dict]:
    with np.load(path, allow_pickle=False) as z:
        fmt = str(z["format"])
        if fmt != CKPT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {fmt!r}")
        nets = {}
        for name in z["names"]:
            name = str(name)
            spec = MLPSpec.parse(str(z[f"spec/{name}"]))
            params = np.array(z[f"params/{name}"], dtype=np.float64)
            check_params(spec, params)
            nets[name] = (spec, params)
        meta = json.loads(str(z["meta"]))
    return nets, meta
