import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_level_order(rng, q, n_cap):
    """Random LevelOrder with q levels and n <= n_cap."""
    from mcmklr.tensor_fft import LevelOrder

    while True:
        dims = [int(rng.integers(1, 9)) for _ in range(q)]
        n = int(np.prod(dims))
        if n <= n_cap:
            return LevelOrder(dims)


def symmetric_column(rng, order):
    """Random multilevel-symmetric column: k(i) = k(-i mod dims)."""
    raw = rng.standard_normal(order.n)
    dims = order.dims
    multi = np.unravel_index(np.arange(order.n), dims)
    neg = tuple((-m) % d for m, d in zip(multi, dims))
    perm = np.ravel_multi_index(neg, dims)
    return raw + raw[perm]
