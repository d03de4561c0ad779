import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnequiv.instances import random_network
from nnequiv.networks import (InputBox, NetworkFormatError, activation_pattern, dumps_network,
                              eval_network, load_box, load_network, make_network)


def test_identity_network_loads():
    net = load_network('{"layers":[{"weights":[[1]],"bias":[0],"activation":"linear"}]}')
    assert net.input_dim == 1 and net.output_dim == 1
    assert eval_network(net, [-2.0]).tolist() == [-2.0]


def test_dimension_mismatch_names_layer():
    text = json.dumps({"layers": [
        {"weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "relu"},
        {"weights": [[1, 1, 1]], "bias": [0], "activation": "linear"}]})
    with pytest.raises(NetworkFormatError, match="layer 1"):
        load_network(text)


def test_nan_literal_rejected():
    with pytest.raises(NetworkFormatError):
        load_network('{"layers":[{"weights":[[NaN]],"bias":[0],"activation":"linear"}]}')


def test_parse_error_reports_position():
    with pytest.raises(NetworkFormatError, match="line 1 column"):
        load_network('{"layers": [')


@pytest.mark.parametrize("entry,msg", [
    ({"weights": [[1]], "bias": [0]}, "missing"),
    ({"weights": [[1]], "bias": [0], "activation": "tanh"}, "activation"),
    ({"weights": [[1], [2]], "bias": [0], "activation": "linear"}, "bias"),
    ({"weights": [[1, 2], [3]], "bias": [0, 0], "activation": "linear"}, "equal length"),
])
def test_malformed_layers(entry, msg):
    with pytest.raises(NetworkFormatError, match=msg):
        load_network({"layers": [entry]})


def test_trailing_relu_rejected():
    with pytest.raises(NetworkFormatError, match="linear"):
        make_network([([[1.0]], [0.0], "relu")])


def test_relu_clamps(identity_net):
    net = make_network([([[1.0]], [0.0], "relu"), ([[1.0]], [0.0], "linear")])
    assert eval_network(net, [-2.0]).tolist() == [0.0]


def test_abs_gadget(abs_net):
    assert eval_network(abs_net, [3.0]).tolist() == [3.0]
    assert eval_network(abs_net, [-1.5]).tolist() == [1.5]


def test_eval_wrong_dim(abs_net):
    with pytest.raises(ValueError):
        eval_network(abs_net, [1.0, 2.0])


def test_batch_matches_single():
    net = random_network([3, 4, 2], np.random.default_rng(0))
    X = np.random.default_rng(1).normal(size=(20, 3))
    batch = eval_network(net, X)
    for x, y in zip(X, batch):
        np.testing.assert_allclose(eval_network(net, x), y, rtol=0, atol=1e-12)


def test_box_validation():
    with pytest.raises(NetworkFormatError):
        InputBox([1.0], [0.0])
    with pytest.raises(NetworkFormatError):
        InputBox([0.0], [np.inf])
    box = load_box('{"lo": [0, 0], "hi": [1, 2]}')
    assert box.dim == 2 and box.contains([0.5, 2.0])


@given(st.integers(0, 10_000))
def test_round_trip_is_bit_exact(seed):
    rng = np.random.default_rng(seed)
    net = random_network([2, 3, 3, 2], rng)
    again = load_network(dumps_network(net))
    X = rng.uniform(-3, 3, size=(100, 2))
    assert np.array_equal(eval_network(net, X), eval_network(again, X))


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_affine_within_fixed_pattern(seed, lam):
    rng = np.random.default_rng(seed)
    net = random_network([2, 5, 2], rng)
    x = rng.uniform(-1, 1, size=2)
    y = x + 1e-3 * rng.normal(size=2)
    if activation_pattern(net, x) != activation_pattern(net, y):
        return
    z = lam * x + (1 - lam) * y
    if activation_pattern(net, z) != activation_pattern(net, x):
        return
    expect = lam * eval_network(net, x) + (1 - lam) * eval_network(net, y)
    np.testing.assert_allclose(eval_network(net, z), expect, atol=1e-9)
