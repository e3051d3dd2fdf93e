"""Shared fixtures; BLAS is pinned to one thread for reproducible numerics."""

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

import transcorr as tc

_LIMITS = threadpool_limits(limits=1)


@pytest.fixture(scope="session")
def ar_half_p4():
    return tc.build_ar_covariance(0.5, 4)


@pytest.fixture(scope="session")
def mixed_blocks():
    """7-block structure with opposite AR gradients for the two populations."""
    part = tc.BlockPartition.from_sizes([40, 35, 30, 30, 25, 25, 15])
    rhos_x = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    x = tc.build_block_covariance(
        part, [tc.build_ar_covariance(r, s).block_values[0]
               for r, s in zip(rhos_x, part.sizes)])
    z = tc.build_block_covariance(
        part, [tc.build_ar_covariance(r, s).block_values[0]
               for r, s in zip(reversed(rhos_x), part.sizes)])
    return x, z


@pytest.fixture()
def rng():
    return np.random.default_rng(20240715)
