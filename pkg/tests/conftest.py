import numpy as np
import pytest

from wskit import Architecture, from_matrices


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny():
    """(1, 2, 1) relu network used in several hand-checked cases."""
    arch = Architecture((1, 2, 1))
    return from_matrices(arch, [[[1.0], [2.0]], [[3.0, 4.0]]], [[0.5, -0.3], [0.7]])
