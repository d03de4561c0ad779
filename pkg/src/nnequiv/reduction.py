"""Compile Net-Verify instances into epsilon-equivalence instances.

Given a network N, input constraints ``C1 x <= b1``, output constraints
``C2 N(x) <= b2`` and a tolerance eps, build a pair (R, T) with R = N and

    T(x) = N(x) + d*(x) e_0,   d* = max(0, 2 eps - d_max),
    d_max = max over all constraints of max(0, C x - b + eps).

Then ``|R(x) - T(x)|_inf >= eps`` exactly when every constraint holds at x,
so the pair is eps-equivalent iff the Net-Verify instance is infeasible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .networks import (InputBox, Layer, Network, NetworkFormatError, box_to_dict,
                       eval_network, load_box, network_from_dict, network_to_dict)


@dataclass(frozen=True, eq=False)
class NetVerifyInstance:
    net: Network
    C1: np.ndarray
    b1: np.ndarray
    C2: np.ndarray
    b2: np.ndarray
    epsilon: float
    box: InputBox

    def __post_init__(self):
        I, O = self.net.input_dim, self.net.output_dim
        C1 = np.asarray(self.C1, dtype=float).reshape(-1, I)
        C2 = np.asarray(self.C2, dtype=float).reshape(-1, O)
        b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        b2 = np.asarray(self.b2, dtype=float).reshape(-1)
        if C1.shape[0] != b1.shape[0] or C2.shape[0] != b2.shape[0]:
            raise ValueError("constraint matrix and right-hand side lengths differ")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.box.dim != I:
            raise ValueError("box dimension does not match the network input")
        for name, val in (("C1", C1), ("C2", C2), ("b1", b1), ("b2", b2)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def num_constraints(self) -> int:
        return self.C1.shape[0] + self.C2.shape[0]

    def slacks(self, x) -> np.ndarray:
        """``max(0, C x - b + eps)`` for input then output constraints."""
        x = np.asarray(x, dtype=float)
        y = eval_network(self.net, x)
        v = np.concatenate([self.C1 @ x - self.b1, self.C2 @ y - self.b2]) + self.epsilon
        return np.maximum(v, 0.0)

    def satisfied(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        y = eval_network(self.net, x)
        return bool(np.all(self.C1 @ x <= self.b1) and np.all(self.C2 @ y <= self.b2))

    def to_dict(self) -> dict:
        return {"network": network_to_dict(self.net),
                "C1": self.C1.tolist(), "b1": self.b1.tolist(),
                "C2": self.C2.tolist(), "b2": self.b2.tolist(),
                "epsilon": self.epsilon, "box": box_to_dict(self.box)}

    @classmethod
    def from_dict(cls, data: dict) -> "NetVerifyInstance":
        missing = {"network", "epsilon", "box"} - set(data)
        if missing:
            raise NetworkFormatError(f"instance: missing field(s) {sorted(missing)}")
        net = network_from_dict(data["network"])
        return cls(net, data.get("C1", []), data.get("b1", []),
                   data.get("C2", []), data.get("b2", []),
                   data["epsilon"], load_box(data["box"]))


def load_instance(path) -> NetVerifyInstance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"instance: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return NetVerifyInstance.from_dict(data)


def save_instance(inst: NetVerifyInstance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict()))


# -- construction ---------------------------------------------------------------

def _blockdiag(*blocks) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def relumax_gadget(a_row, a_bias, b_row, b_bias) -> tuple:
    """Two ReLU layers computing ``max(0, a + max(0, b - a))`` = ``max(0, a, b)``.

    ``a = a_row . z + a_bias`` and ``b = b_row . z + b_bias`` over a common
    input ``z``. Returns the two layers.
    """
    a_row = np.asarray(a_row, dtype=float)
    b_row = np.asarray(b_row, dtype=float)
    W1 = np.vstack([a_row, -a_row, b_row - a_row])
    b1 = np.array([a_bias, -a_bias, b_bias - a_bias], dtype=float)
    W2 = np.array([[1.0, -1.0, 1.0]])
    return Layer(W1, b1, "relu"), Layer(W2, np.zeros(1), "relu")


def _collapse_linear(net: Network) -> list:
    """Fold linear hidden layers into their successors; returns (W, b, relu)."""
    out = []
    pending = None
    for layer in net.layers:
        W, b = layer.weights, layer.bias
        if pending is not None:
            W, b = W @ pending[0], W @ pending[1] + b
            pending = None
        if layer.is_relu:
            out.append((W, b, True))
        else:
            pending = (W, b)
    out.append((pending[0], pending[1], False))
    return out


def _pyramid(n_vals: int, n_carry: int) -> list:
    """ReLU layers reducing ``n_vals`` non-negative values to their maximum.

    Input layout is ``[carry (n_carry), values (n_vals)]``, all non-negative;
    carried values pass through unchanged. Output layout ``[carry, max]``.
    """
    layers = []
    n = n_vals
    while n > 1:
        pairs, odd = divmod(n, 2)
        width = n_carry + n
        rows1, rows2 = [], []
        eye = np.eye(width)
        for i in range(n_carry):
            rows1.append(eye[i])
        for p in range(pairs):
            a = eye[n_carry + 2 * p]
            b = eye[n_carry + 2 * p + 1]
            g1, _ = relumax_gadget(a, 0.0, b, 0.0)
            rows1.extend(g1.weights)
        if odd:
            rows1.append(eye[n_carry + n - 1])
        W1 = np.array(rows1)
        w1 = W1.shape[0]
        W2 = np.zeros((n_carry + pairs + odd, w1))
        W2[:n_carry, :n_carry] = np.eye(n_carry)
        for p in range(pairs):
            W2[n_carry + p, n_carry + 3 * p:n_carry + 3 * p + 3] = [1.0, -1.0, 1.0]
        if odd:
            W2[-1, -1] = 1.0
        layers.append(Layer(W1, np.zeros(w1), "relu"))
        layers.append(Layer(W2, np.zeros(W2.shape[0]), "relu"))
        n = pairs + odd
    return layers


def _slack_layers(inst: NetVerifyInstance) -> tuple:
    """Layers of T up to ``[y+, y-, d_max]``; returns (layers, O)."""
    if inst.num_constraints == 0:
        raise ValueError("instance has no constraints; d_max is undefined")
    eps = inst.epsilon
    I = inst.net.input_dim
    parts = _collapse_linear(inst.net)
    hidden, (WF, bF, _) = parts[:-1], parts[-1]
    m1, m2 = inst.C1.shape[0], inst.C2.shape[0]
    O = WF.shape[0]
    layers = []
    for idx, (W, b, _) in enumerate(hidden):
        if idx == 0:
            Wt = np.vstack([W, inst.C1])
            bt = np.concatenate([b, -inst.b1 + eps])
        else:
            Wt = _blockdiag(W, np.eye(m1))
            bt = np.concatenate([b, np.zeros(m1)])
        layers.append(Layer(Wt, bt, "relu"))
    # merge layer: [y+, y-, input slacks, output slacks]
    if hidden:
        h_dim = WF.shape[1]
        Wy = np.hstack([WF, np.zeros((O, m1))])
        Ws1 = np.hstack([np.zeros((m1, h_dim)), np.eye(m1)])
        bs1 = np.zeros(m1)
    else:
        Wy = WF
        Ws1 = inst.C1.reshape(m1, I)
        bs1 = -inst.b1 + eps
    Wm = np.vstack([Wy, -Wy, Ws1, inst.C2 @ Wy])
    bm = np.concatenate([bF, -bF, bs1, inst.C2 @ bF - inst.b2 + eps])
    layers.append(Layer(Wm, bm, "relu"))
    layers.extend(_pyramid(m1 + m2, 2 * O))
    return layers, O


def dmax_network(inst: NetVerifyInstance) -> Network:
    """The part of T that computes ``d_max``, with a linear read-out."""
    layers, O = _slack_layers(inst)
    width = layers[-1].out_dim
    read = np.zeros((1, width))
    read[0, 2 * O] = 1.0
    return Network(tuple(layers) + (Layer(read, np.zeros(1), "linear"),))


def pyramid_levels(m: int) -> int:
    return math.ceil(math.log2(m)) if m > 1 else 0


def build_equiv_instance(inst: NetVerifyInstance) -> tuple:
    """Return ``(R, T)``; see the module docstring for the guarantee."""
    layers, O = _slack_layers(inst)
    eps = inst.epsilon
    width = 2 * O + 1
    # d* = max(0, 2 eps - d_max), carrying y+ and y-
    Wd = np.zeros((width, width))
    Wd[:2 * O, :2 * O] = np.eye(2 * O)
    Wd[2 * O, 2 * O] = -1.0
    bd = np.zeros(width)
    bd[2 * O] = 2.0 * eps
    layers.append(Layer(Wd, bd, "relu"))
    Wo = np.hstack([np.eye(O), -np.eye(O), np.zeros((O, 1))])
    Wo[0, 2 * O] = 1.0
    layers.append(Layer(Wo, np.zeros(O), "linear"))
    return inst.net, Network(tuple(layers))
