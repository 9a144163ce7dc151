"""Versioned JSON documents for networks; arrays travel as base64 little-endian float64."""
from __future__ import annotations

import base64
import json
from typing import Any

import numpy as np  # type: ignore

from config import Config
from exceptions import DataFormatError, DivergenceError, SchemaVersionError
from neural.layers import layer_from_spec
from neural.network import NeuralNet

DTYPE = "<f8"


def encode_array(array: np.ndarray) -> dict:
    array = np.asarray(array, dtype=np.float64)
    if not np.isfinite(array).all():
        raise DivergenceError("refusing to persist non-finite parameters")
    return {
        "shape": list(array.shape),
        "data": base64.b64encode(array.astype(DTYPE).tobytes()).decode("ascii"),
    }


def decode_array(document: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(document["data"])
        return np.frombuffer(raw, dtype=DTYPE).astype(np.float64).reshape(document["shape"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DataFormatError(f"malformed array document: {exc}")


def net_to_document(net: NeuralNet) -> dict:
    return {
        "name": net.name,
        "layers": [
            {**layer.spec(), "arrays": {name: encode_array(a) for name, a in layer.arrays().items()}}
            for layer in net.layers
        ],
    }


def net_from_document(document: dict) -> NeuralNet:
    layers = []
    for spec in document["layers"]:
        layer = layer_from_spec(spec)
        for name, encoded in spec.get("arrays", {}).items():
            if name not in layer.state_names:
                raise DataFormatError(f"unknown array {name!r} for a {layer.kind.value} layer")
            setattr(layer, name, decode_array(encoded))
        layers.append(layer)
    return NeuralNet(layers, document.get("name", "net"))


def with_version(kind: str, body: dict) -> dict:
    return {"schema_version": Config.schema_version, "kind": kind, **body}


def check_version(document: dict, kind: str) -> dict:
    version = document.get("schema_version")
    if version != Config.schema_version:
        raise SchemaVersionError(f"{kind} document has schema version {version}, expected {Config.schema_version}")
    if document.get("kind") != kind:
        raise DataFormatError(f"expected a {kind} document, got {document.get('kind')!r}")
    return document


def save_json(path: str, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=1)


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc}")


def save_net(net: NeuralNet, path: str) -> None:
    save_json(path, with_version("network", net_to_document(net)))


def load_net(path: str) -> NeuralNet:
    return net_from_document(check_version(load_json(path), "network"))
