import numpy as np
import pytest

from focklab import FockParams, OneParticleSpace
from focklab.wick import build_pphi2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def space1():
    return OneParticleSpace(np.array([[1.0]]))


@pytest.fixture
def space2():
    return OneParticleSpace(np.array([[1.0, 0.2], [0.2, 1.5]]))


@pytest.fixture
def params_small():
    return FockParams(2, 4, 0.3)


def quartic_symbol(coupling=0.02):
    """Single-mode quartic interaction F_V = coupling * (z + zbar)^4."""
    return build_pphi2([0, 0, 0, 0, 1.0], 1.0, k_grid=[0.0], k_weights=[1.0],
                       x_grid=[0.0], x_weights=[1.0], g_samples=[coupling])


@pytest.fixture
def quartic():
    return quartic_symbol()
