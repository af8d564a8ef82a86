"""Flat JSON checkpoints: ``{"format": ..., "params": {name: {"shape", "data"}}}``.

``data`` is the row-major flattening of the array; ``shape`` its dimensions.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "uavaoi-params/1"


def dump_params(state: dict, meta: dict | None = None) -> str:
    body = {
        "format": FORMAT,
        "meta": meta or {},
        "params": {
            name: {"shape": list(np.shape(a)), "data": np.asarray(a, float).ravel().tolist()}
            for name, a in state.items()
        },
    }
    return json.dumps(body, sort_keys=True)


def load_params(text: str) -> tuple[dict, dict]:
    body = json.loads(text)
    if body.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {body.get('format')!r}")
    params = {
        name: np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in body["params"].items()
    }
    return params, body.get("meta", {})


def save_checkpoint(path, state: dict, meta: dict | None = None) -> None:
    path = Path(path)
    try:
        path.write_text(dump_params(state, meta))
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> tuple[dict, dict]:
    return load_params(Path(path).read_text())
