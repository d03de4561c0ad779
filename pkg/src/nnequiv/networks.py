"""Feed-forward ReLU networks: loading, validation and concrete evaluation.

Networks are stored as JSON::

    {"layers": [{"weights": [[...]], "bias": [...], "activation": "relu" | "linear"}]}

Input boxes are stored as ``{"lo": [...], "hi": [...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np


class NetworkFormatError(ValueError):
    """Raised for malformed network or box files."""


class Activation(str, Enum):
    RELU = "relu"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise NetworkFormatError(f"weights must be a matrix, got shape {w.shape}")
        if w.shape[0] != b.shape[0]:
            raise NetworkFormatError(
                f"weights have {w.shape[0]} rows but bias has length {b.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NetworkFormatError("non-finite entry in weights or bias")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def is_relu(self) -> bool:
        return self.activation is Activation.RELU


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        validate(self)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def num_relus(self) -> int:
        return sum(layer.out_dim for layer in self.layers if layer.is_relu)

    def __call__(self, x):
        return eval_network(self, x)


def validate(net: Network) -> None:
    """Check dimension chaining and the linear-output rule."""
    if not net.layers:
        raise NetworkFormatError("network has no layers")
    for idx, layer in enumerate(net.layers):
        if not isinstance(layer, Layer):
            raise NetworkFormatError(f"layer {idx} is not a Layer")
        if idx > 0 and layer.in_dim != net.layers[idx - 1].out_dim:
            raise NetworkFormatError(
                f"dimension mismatch at layer {idx}: in_dim {layer.in_dim} "
                f"but layer {idx - 1} has out_dim {net.layers[idx - 1].out_dim}")
    if net.layers[-1].is_relu:
        raise NetworkFormatError("last layer must be linear (trailing ReLU is not supported)")


@dataclass(frozen=True, eq=False)
class InputBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise NetworkFormatError("box bounds must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise NetworkFormatError("non-finite box bound")
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise NetworkFormatError(f"box lower bound exceeds upper bound in dimension {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


def eval_network(net: Network, x) -> np.ndarray:
    """Concrete forward pass. Accepts a single vector or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    if h.shape[1] != net.input_dim:
        raise ValueError(f"input has dimension {h.shape[1]}, network expects {net.input_dim}")
    for layer in net.layers:
        h = h @ layer.weights.T + layer.bias
        if layer.is_relu:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


# -- serialization -----------------------------------------------------------

def _reject_constant(token):
    raise NetworkFormatError(f"non-finite literal {token!r} is not allowed")


def _parse_json(text: str, what: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{what}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _matrix(value, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise NetworkFormatError(f"{field}: expected a non-empty list of rows")
    widths = {len(r) for r in value}
    if len(widths) != 1 or 0 in widths:
        raise NetworkFormatError(f"{field}: rows must be non-empty and of equal length")
    return _numbers(value, field)


def _numbers(value, field: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NetworkFormatError(f"{field}: expected numbers ({exc})") from exc
    if not np.all(np.isfinite(arr)):
        raise NetworkFormatError(f"{field}: non-finite value")
    return arr


def network_from_dict(data: dict) -> Network:
    if not isinstance(data, dict) or "layers" not in data:
        raise NetworkFormatError("network: missing 'layers'")
    if not isinstance(data["layers"], list) or not data["layers"]:
        raise NetworkFormatError("network: 'layers' must be a non-empty list")
    layers = []
    for idx, entry in enumerate(data["layers"]):
        where = f"layers[{idx}]"
        if not isinstance(entry, dict):
            raise NetworkFormatError(f"{where}: expected an object")
        missing = {"weights", "bias", "activation"} - set(entry)
        if missing:
            raise NetworkFormatError(f"{where}: missing field(s) {sorted(missing)}")
        weights = _matrix(entry["weights"], f"{where}.weights")
        if not isinstance(entry["bias"], list):
            raise NetworkFormatError(f"{where}.bias: expected a list")
        bias = _numbers(entry["bias"], f"{where}.bias")
        try:
            act = Activation(entry["activation"])
        except ValueError:
            raise NetworkFormatError(
                f"{where}.activation: expected 'relu' or 'linear', got {entry['activation']!r}") from None
        try:
            layers.append(Layer(weights, bias, act))
        except NetworkFormatError as exc:
            raise NetworkFormatError(f"{where}: {exc}") from None
    return Network(tuple(layers))


def network_to_dict(net: Network) -> dict:
    return {"layers": [{"weights": layer.weights.tolist(),
                        "bias": layer.bias.tolist(),
                        "activation": layer.activation.value} for layer in net.layers]}


def load_network(source) -> Network:
    """Parse a network from JSON text, a dict, or a path to a JSON file."""
    if isinstance(source, dict):
        return network_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        source = Path(source).read_text()
    return network_from_dict(_parse_json(source, "network"))


def dumps_network(net: Network) -> str:
    # repr-precision floats keep the round trip bit exact
    return json.dumps(network_to_dict(net))


def save_network(net: Network, path) -> None:
    Path(path).write_text(dumps_network(net))


def load_box(source) -> InputBox:
    if isinstance(source, dict):
        data = source
    else:
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text()
        data = _parse_json(source, "box")
    if not isinstance(data, dict) or "lo" not in data or "hi" not in data:
        raise NetworkFormatError("box: expected an object with 'lo' and 'hi'")
    return InputBox(_numbers(data["lo"], "box.lo"), _numbers(data["hi"], "box.hi"))


def box_to_dict(box: InputBox) -> dict:
    return {"lo": box.lo.tolist(), "hi": box.hi.tolist()}


def save_box(box: InputBox, path) -> None:
    Path(path).write_text(json.dumps(box_to_dict(box)))


def make_network(spec: Sequence[tuple]) -> Network:
    """Build a network from ``(weights, bias, activation)`` tuples."""
    return Network(tuple(Layer(np.asarray(w, float), np.asarray(b, float), Activation(a))
                         for w, b, a in spec))


def activation_pattern(net: Network, x) -> tuple:
    """Sign pattern of every ReLU pre-activation (True = active)."""
    h = np.asarray(x, dtype=float)
    pattern = []
    for layer in net.layers:
        h = layer.weights @ h + layer.bias
        if layer.is_relu:
            pattern.extend(bool(v > 0) for v in h)
            h = np.maximum(h, 0.0)
    return tuple(pattern)
