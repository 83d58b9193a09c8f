import numpy as np
import pytest

# two actions, three outcomes; action 0 is bad only on outcome 0, action 1 only on outcome 2
TOY_LOSS = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def toy_loss():
    return TOY_LOSS.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
