"""Self-describing text format for trained model weights.

A single JSON document holds a format-version field, the architecture
descriptor list, per-parameter shape plus row-major float64 values (written
with full round-trip precision), and a SHA-256 checksum over the canonical
serialization of everything else. Loading verifies the checksum and every
shape against the declared architecture.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .net import Architecture, Conv1d, Dense, Dropout, Flatten, MaxPool, Relu, SpeedNet

FORMAT_VERSION = 1

_DESCRIPTOR_TAGS = {
    Conv1d: "conv1d",
    MaxPool: "maxpool",
    Dense: "dense",
    Relu: "relu",
    Dropout: "dropout",
    Flatten: "flatten",
}


class ModelFormatError(ValueError):
    """Raised for version, checksum, or shape mismatches in a weight file."""


def architecture_to_dict(arch: Architecture) -> dict:
    layers = []
    for spec in arch.layers:
        entry = {"type": _DESCRIPTOR_TAGS[type(spec)]}
        if isinstance(spec, Conv1d):
            entry.update(depth=spec.depth, kernel=spec.kernel)
        elif isinstance(spec, MaxPool):
            entry.update(size=spec.size)
        elif isinstance(spec, Dense):
            entry.update(units=spec.units)
        elif isinstance(spec, Dropout):
            entry.update(prob=spec.prob)
        layers.append(entry)
    return {
        "input_len": arch.input_len,
        "input_depth": arch.input_depth,
        "scale": arch.scale,
        "layers": layers,
    }


def architecture_from_dict(data: dict) -> Architecture:
    layers = []
    for entry in data["layers"]:
        tag = entry["type"]
        if tag == "conv1d":
            layers.append(Conv1d(int(entry["depth"]), int(entry["kernel"])))
        elif tag == "maxpool":
            layers.append(MaxPool(int(entry["size"])))
        elif tag == "dense":
            layers.append(Dense(int(entry["units"])))
        elif tag == "relu":
            layers.append(Relu())
        elif tag == "dropout":
            layers.append(Dropout(float(entry["prob"])))
        elif tag == "flatten":
            layers.append(Flatten())
        else:
            raise ModelFormatError(f"unknown layer type {tag!r}")
    return Architecture(
        int(data["input_len"]), int(data["input_depth"]), tuple(layers), float(data["scale"])
    )


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()


def model_to_json(model: SpeedNet) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "architecture": architecture_to_dict(model.architecture),
        "parameters": [
            {"name": name, "shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in model.parameters()
        ],
    }
    payload["checksum"] = _payload_checksum(
        {k: v for k, v in payload.items() if k != "checksum"}
    )
    return json.dumps(payload, indent=1)


def save_model(model: SpeedNet, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(model_to_json(model))
        f.write("\n")


def model_from_json(text: str) -> SpeedNet:
    payload = json.loads(text)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version!r}")
    expected = payload.get("checksum")
    actual = _payload_checksum({k: v for k, v in payload.items() if k != "checksum"})
    if expected != actual:
        raise ModelFormatError("checksum mismatch; file corrupted or edited")

    arch = architecture_from_dict(payload["architecture"])
    model = SpeedNet(arch, seed=0)
    params = model.parameters()
    entries = payload["parameters"]
    if len(entries) != len(params):
        raise ModelFormatError("parameter count does not match architecture")
    for (name, arr), entry in zip(params, entries):
        shape = tuple(entry["shape"])
        if entry["name"] != name or shape != arr.shape:
            raise ModelFormatError(
                f"parameter {entry['name']!r} shape {shape} does not match architecture"
            )
        arr[...] = np.asarray(entry["data"], dtype=float).reshape(shape)
    return model


def load_model(path) -> SpeedNet:
    with open(path, "r", encoding="ascii") as f:
        return model_from_json(f.read())
