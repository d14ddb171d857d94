import numpy as np
import pytest

from ncfourier.trajectory import Trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_trajectory(rng, M, dims=1, kmax=0.5):
    """Uniform random k-space samples in [-kmax, kmax]^dims."""
    samples = rng.uniform(-kmax, kmax, size=(M, dims))
    return Trajectory(dims=dims, samples=samples, kmax=kmax)


@pytest.fixture
def make_random_trajectory():
    return random_trajectory
