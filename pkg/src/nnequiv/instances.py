"""Generators for small network pairs and Net-Verify instances.

Equivalent-by-construction pairs apply function-preserving rewrites to a
random network (hidden-neuron permutation, positive rescaling, neuron
duplication). Perturbed pairs add weight noise and pick eps at half the
worst deviation the sampling oracle finds, so they are violated by design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equivalence import EquivProperty
from .networks import InputBox, Layer, Network, eval_network
from .oracle import grid_check, sample_points
from .reduction import NetVerifyInstance


@dataclass(frozen=True, eq=False)
class Case:
    name: str
    net_R: Network
    net_T: Network
    box: InputBox
    prop: EquivProperty
    expect_equivalent: bool


def random_network(sizes, rng, bias_scale: float = 0.5) -> Network:
    layers = []
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = "linear" if k == len(sizes) - 2 else "relu"
        layers.append(Layer(rng.normal(size=(b, a)), bias_scale * rng.normal(size=b), act))
    return Network(tuple(layers))


def permute_hidden(net: Network, rng) -> Network:
    layers = [(l.weights.copy(), l.bias.copy(), l.activation) for l in net.layers]
    for k in range(len(layers) - 1):
        perm = rng.permutation(layers[k][0].shape[0])
        W, b, act = layers[k]
        layers[k] = (W[perm], b[perm], act)
        Wn, bn, actn = layers[k + 1]
        layers[k + 1] = (Wn[:, perm], bn, actn)
    return Network(tuple(Layer(*l) for l in layers))


def rescale_hidden(net: Network, rng, low: float = 0.5, high: float = 2.0) -> Network:
    """relu(s z) = s relu(z) for s > 0: scale a row, unscale the next column."""
    layers = [(l.weights.copy(), l.bias.copy(), l.activation) for l in net.layers]
    for k in range(len(layers) - 1):
        s = rng.uniform(low, high, size=layers[k][0].shape[0])
        W, b, act = layers[k]
        layers[k] = (W * s[:, None], b * s, act)
        Wn, bn, actn = layers[k + 1]
        layers[k + 1] = (Wn / s[None, :], bn, actn)
    return Network(tuple(Layer(*l) for l in layers))


def duplicate_neuron(net: Network, rng, layer: int = 0) -> Network:
    """Copy one hidden neuron and split its outgoing weights between the copies."""
    layers = [(l.weights.copy(), l.bias.copy(), l.activation) for l in net.layers]
    W, b, act = layers[layer]
    i = int(rng.integers(W.shape[0]))
    layers[layer] = (np.vstack([W, W[i]]), np.append(b, b[i]), act)
    Wn, bn, actn = layers[layer + 1]
    col = Wn[:, i].copy()
    Wn = np.hstack([Wn, col[:, None] / 2.0])
    Wn[:, i] = col / 2.0
    layers[layer + 1] = (Wn, bn, actn)
    return Network(tuple(Layer(*l) for l in layers))


def perturb(net: Network, rng, sigma: float = 0.1) -> Network:
    return Network(tuple(Layer(l.weights + sigma * rng.normal(size=l.weights.shape),
                               l.bias + sigma * rng.normal(size=l.bias.shape), l.activation)
                         for l in net.layers))


def unit_box(dim: int) -> InputBox:
    return InputBox(-np.ones(dim), np.ones(dim))


def tiny_suite(n_equiv: int = 25, n_perturbed: int = 25, seed: int = 0,
               equiv_eps: float = 1e-6) -> list:
    """Network pairs with input dim <= 3 and at most 12 ReLUs over both nets."""
    rng = np.random.default_rng(seed)
    shapes = [(1, [3, 2]), (2, [3, 2]), (2, [5]), (3, [3, 2]), (2, [2, 3]), (3, [5])]
    cases = []
    rewrites = [("perm", permute_hidden), ("scale", rescale_hidden), ("dup", duplicate_neuron)]
    for n in range(n_equiv):
        I, hidden = shapes[n % len(shapes)]
        O = 2
        net = random_network([I, *hidden, O], rng)
        name, fn = rewrites[n % len(rewrites)]
        other = fn(net, rng)
        cases.append(Case(f"equiv-{n:02d}-{name}", net, other, unit_box(I),
                          EquivProperty.epsilon_equiv(equiv_eps), True))
    for n in range(n_perturbed):
        I, hidden = shapes[n % len(shapes)]
        net = random_network([I, *hidden, 2], rng)
        other = perturb(net, rng, sigma=0.15)
        box = unit_box(I)
        worst = grid_check(net, other, box, EquivProperty.epsilon_equiv(1.0)).worst_deviation
        cases.append(Case(f"pert-{n:02d}", net, other, box,
                          EquivProperty.epsilon_equiv(0.5 * worst), False))
    return cases


def random_netverify(rng, satisfiable: bool, eps: float = 0.1,
                     margin: float = 0.5) -> NetVerifyInstance:
    """Net-Verify instance satisfiable (or infeasible) with a margin.

    Satisfiable instances are built around an anchor input that meets every
    constraint with slack ``margin``. Infeasible instances put one output
    constraint ``margin`` below the sampled minimum and rely on the oracle
    for confirmation.
    """
    I = int(rng.integers(1, 3))
    net = random_network([I, 3, 2], rng)
    box = unit_box(I)
    if satisfiable:
        x0 = rng.uniform(-0.5, 0.5, size=I)
        y0 = eval_network(net, x0)
        C1 = rng.normal(size=(1, I))
        C2 = rng.normal(size=(2, 2))
        return NetVerifyInstance(net, C1, C1 @ x0 + margin, C2, C2 @ y0 + margin, eps, box)
    X = sample_points(box, resolution=201, n_random=20_000, seed=int(rng.integers(1 << 30)))
    c = rng.normal(size=(1, 2))
    low = float((eval_network(net, X) @ c.T).min())
    C1 = np.eye(I)[:1]
    return NetVerifyInstance(net, C1, [box.hi[0]], c, [low - margin], eps, box)


def netverify_suite(n_each: int = 10, seed: int = 0, eps: float = 0.1) -> list:
    """``[(instance, satisfiable)]`` with satisfiable ones first."""
    rng = np.random.default_rng(seed)
    out = [(random_netverify(rng, True, eps), True) for _ in range(n_each)]
    out += [(random_netverify(rng, False, eps), False) for _ in range(n_each)]
    return out
