"""Deterministic synthetic volumes (image + label pairs) for tests and demos."""

from __future__ import annotations

import numpy as np

__all__ = ["make_sphere", "make_ellipsoid", "make_blobs"]

_EDGE_WIDTH = 1.2  # voxels; controls how soft the shape boundary is


def _coord_grids(dims):
    nx, ny, nz = dims
    return np.meshgrid(
        np.arange(nx, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nz, dtype=np.float64),
        indexing="ij",
    )


def _soft_indicator(signed_dist: np.ndarray) -> np.ndarray:
    # ~1 inside (negative distance), ~0 outside, smooth over a few voxels
    return 1.0 / (1.0 + np.exp(signed_dist / _EDGE_WIDTH))


def make_sphere(dims, radius: float = 10.0, center=None):
    """Smooth-edged ball; labels mark the interior as 1."""
    x, y, z = _coord_grids(dims)
    c = center if center is not None else tuple((n - 1) / 2.0 for n in dims)
    r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    image = _soft_indicator(r - radius)
    labels = (r <= radius).astype(np.int32)
    return image, labels


def make_ellipsoid(dims, radii=(8.0, 10.0, 12.0), center=None):
    """Smooth-edged axis-aligned ellipsoid; labels mark the interior as 1."""
    x, y, z = _coord_grids(dims)
    c = center if center is not None else tuple((n - 1) / 2.0 for n in dims)
    rx, ry, rz = radii
    rho = np.sqrt(((x - c[0]) / rx) ** 2 + ((y - c[1]) / ry) ** 2 + ((z - c[2]) / rz) ** 2)
    mean_r = (rx + ry + rz) / 3.0
    image = _soft_indicator((rho - 1.0) * mean_r)
    labels = (rho <= 1.0).astype(np.int32)
    return image, labels


def make_blobs(dims, seed: int = 42, n_blobs: int = 40):
    """Textured volume: random Gaussian bumps over a low-frequency carrier.

    Built so that almost every local window carries usable intensity variance,
    then min-max normalised to [0, 1].  Labels are the bright regions.
    """
    rng = np.random.default_rng(seed)
    x, y, z = _coord_grids(dims)
    nx, ny, nz = dims

    # carrier keeps even the emptiest windows non-constant
    image = 0.35 * (
        np.sin(2.0 * np.pi * 3.0 * x / nx + 0.7)
        + np.sin(2.0 * np.pi * 4.0 * y / ny + 1.9)
        + np.sin(2.0 * np.pi * 5.0 * z / nz + 3.1)
    )
    for _ in range(n_blobs):
        cx, cy, cz = (rng.uniform(3, n - 4) for n in dims)
        sig = rng.uniform(3.0, 8.0)
        amp = rng.uniform(0.4, 1.0)
        image += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) / (2.0 * sig * sig))

    lo, hi = image.min(), image.max()
    image = (image - lo) / (hi - lo)
    labels = (image > 0.6).astype(np.int32)
    return image, labels
