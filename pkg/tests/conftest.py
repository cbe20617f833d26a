import numpy as np
import pytest

from bjscc import kernels
from bjscc.probability import DistortionMatrix, Kernel, Pmf


def rand_pmf(rng, n, zeros=0):
    """Random distribution; optionally force some zero-mass symbols."""
    v = rng.dirichlet(np.ones(n))
    if zeros:
        dead = rng.choice(n, size=zeros, replace=False)
        v[dead] = 0.0
        v = v / v.sum()
    return Pmf(v / v.sum())


def rand_kernel(rng, n, m):
    return Kernel(np.stack([rng.dirichlet(np.ones(m)) for _ in range(n)]))


def rand_distortion(rng, nw, nz, scale=1.0):
    return DistortionMatrix(rng.uniform(0.0, scale, size=(nw, nz)))


@pytest.fixture
def backend_guard():
    """Restore the kernel backend after a test that switches it."""
    before = kernels.get_backend()
    yield
    kernels.set_backend(before)
