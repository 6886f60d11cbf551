"""Versioned JSON checkpoints of named parameter tensors.

Values are serialized through Python's shortest-round-trip float repr, so a
save/load cycle reproduces every float64 bit-exactly.
"""

import json

import numpy as np

from .errors import CheckpointError

FORMAT_NAME = "handcontact-params"
FORMAT_VERSION = 1


def save_params(path, named_params, config=None):
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": config or {},
        "tensors": {
            name: {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
            for name, p in sorted(named_params.items())
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_checkpoint(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not a parameter checkpoint")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: version {doc.get('version')} unsupported (expected {FORMAT_VERSION})"
        )
    tensors = {}
    for name, entry in doc["tensors"].items():
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}: tensor {name} has {data.size} values for shape {shape}")
        tensors[name] = data.reshape(shape)
    return doc.get("config", {}), tensors


def load_params_into(path, named_params):
    """Copy checkpointed values into an existing parameter set; the name sets
    and shapes must match exactly."""
    config, tensors = read_checkpoint(path)
    missing = sorted(set(named_params) - set(tensors))
    extra = sorted(set(tensors) - set(named_params))
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing tensors: " + ", ".join(missing))
        if extra:
            parts.append("unexpected tensors: " + ", ".join(extra))
        raise CheckpointError(f"{path}: " + "; ".join(parts))
    for name, p in named_params.items():
        if tensors[name].shape != p.data.shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {tensors[name].shape}, expected {p.data.shape}"
            )
    for name, p in named_params.items():
        p.data = tensors[name]
    return config
