import numpy as np
import pytest
from hypothesis import settings

from pumine import _kernels

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def threads():
    """Restore the kernel thread count after a test changes it."""
    before = _kernels.get_num_threads()
    yield _kernels.set_num_threads
    _kernels.set_num_threads(before)


def two_clusters(n=1000, seed=0, gap=6.0):
    """Two well separated Gaussian blobs in three dimensions."""
    r = np.random.default_rng(seed)
    y = (r.random(n) < 0.5).astype(np.int64)
    X = r.standard_normal((n, 3))
    X[:, 0] += gap * y
    return X, y
