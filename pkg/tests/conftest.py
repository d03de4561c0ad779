import numpy as np
import pytest
from hypothesis import settings

from nnequiv.networks import InputBox, Layer, Network, make_network

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def shift_last_bias(net: Network, shift) -> Network:
    last = net.layers[-1]
    return Network(net.layers[:-1] + (Layer(last.weights, last.bias + shift, "linear"),))


@pytest.fixture
def abs_net():
    # |x| via two ReLU paths
    return make_network([([[1.0], [-1.0]], [0.0, 0.0], "relu"),
                         ([[1.0, 1.0]], [0.0], "linear")])


@pytest.fixture
def identity_net():
    return make_network([([[1.0]], [0.0], "linear")])


@pytest.fixture
def small_pair():
    from nnequiv.instances import random_network
    rng = np.random.default_rng(7)
    net = random_network([2, 4, 3, 2], rng)
    return net, InputBox([-1.0, -1.0], [1.0, 1.0])
