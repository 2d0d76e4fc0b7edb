import numpy as np
import pytest

from patchreg.grid import field_linf
from patchreg.spectral import OperatorSpec, apply_smoother


def smooth_random_field(dims, seed, linf_target=1.0, smoothing_alpha=2.0, passes=3):
    """Band-limited random vector field scaled to a given max magnitude."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dims + (3,))
    spec = OperatorSpec(alpha=smoothing_alpha, dims=dims)
    for _ in range(passes):
        v = apply_smoother(v, spec)
    return v * (linf_target / field_linf(v))


def textured_volume(dims, seed=5, fine_period=4.5):
    """Blobby volume with uniform fine texture: misalignment is visible to local NCC."""
    rng = np.random.default_rng(seed)
    x, y, z = np.meshgrid(*(np.arange(n, dtype=float) for n in dims), indexing="ij")
    img = np.zeros(dims)
    for _ in range(40):
        cx, cy, cz = (rng.uniform(3, n - 4) for n in dims)
        sig = rng.uniform(3.0, 8.0)
        img += rng.uniform(0.4, 1.0) * np.exp(
            -((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) / (2 * sig * sig)
        )
    t = fine_period
    img += (
        np.sin(2 * np.pi * x / t + 0.3)
        + np.sin(2 * np.pi * y / (t * 1.18) + 1.1)
        + np.sin(2 * np.pi * z / (t * 0.87) + 2.2)
        + 0.6 * np.sin(2 * np.pi * (x + y) / (t * 1.41) + 0.9)
    )
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def shifted_pair(dims, seed=5):
    """(moving, fixed) where moving is fixed shifted by one voxel along +x."""
    fixed = textured_volume(dims, seed)
    moving = np.empty(dims)
    moving[:-1] = fixed[1:]
    moving[-1] = fixed[-1]
    return moving, fixed


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)
