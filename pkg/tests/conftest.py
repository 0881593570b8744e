"""Shared fixtures for the fracspde test suite."""

import logging

import numpy as np
import pytest

from fracspde.covariance import bifbm, fbm, hermite
from fracspde.neuron import NeuronParams, build_neuron
from fracspde.noise1d import TimeGrid

logging.getLogger("fracspde").setLevel(logging.WARNING)


@pytest.fixture
def grid():
    return TimeGrid(1.0, 64)


@pytest.fixture(params=[fbm(0.75), bifbm(0.8, 0.75)], ids=lambda k: k.label())
def gaussian_kernel(request):
    return request.param


@pytest.fixture
def rosenblatt():
    return hermite(0.7, 2)


@pytest.fixture(scope="module")
def small_neuron():
    """Neuron network with 16 cells per edge and fbm(0.7) noise."""
    return build_neuron(NeuronParams(), n_x=16, kernels=fbm(0.7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
