import numpy as np
import pytest

from gmmot.synthetic import random_spd


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def spd_from_seed(seed: int, dim: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    b = r.standard_normal((dim, dim))
    return b @ b.T + 0.05 * np.eye(dim)


def well_conditioned_spd(seed: int, dim: int) -> np.ndarray:
    return random_spd(dim, np.random.default_rng(seed), 0.1, 4.0)
