"""Tile volumes into overlapping patches and fuse per-patch velocities back together.

Cores of ``core_size`` tile the volume (padded up to a multiple of the core size);
each core's patch window extends ``pad`` voxels of context on every side, reading
replicated edge values where the window leaves the volume.  Fusion keeps only the
central core of each patch velocity and butt-joins the cores, so every output
voxel comes from exactly one patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PatchGrid", "plan_grid", "extract_patch", "extract_pair", "fuse", "classify_background"]


@dataclass(frozen=True)
class PatchGrid:
    dims: tuple
    patch_size: int
    core_size: int
    pad: int
    counts: tuple
    origins: np.ndarray = field(repr=False)  # (n_cores, 3) core origins in volume coords

    @property
    def n_cores(self) -> int:
        return int(self.origins.shape[0])

    @property
    def padded_dims(self) -> tuple:
        return tuple(c * self.core_size for c in self.counts)


def plan_grid(dims, patch_size: int = 64, core_size: int = 32) -> PatchGrid:
    """Lay out core origins covering ``dims`` padded to a multiple of the core size."""
    if not (patch_size > core_size > 0):
        raise ValueError("need patch_size > core_size > 0")
    if patch_size % 2 or core_size % 2:
        raise ValueError("patch_size and core_size must be even")
    dims = tuple(int(n) for n in dims)
    if min(dims) < 1:
        raise ValueError(f"bad dims {dims}")
    counts = tuple(-(-n // core_size) for n in dims)  # ceil division
    axes = [np.arange(c) * core_size for c in counts]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    origins = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    return PatchGrid(
        dims=dims,
        patch_size=patch_size,
        core_size=core_size,
        pad=(patch_size - core_size) // 2,
        counts=counts,
        origins=origins,
    )


def _window_indices(grid: PatchGrid, index: int):
    if not (0 <= index < grid.n_cores):
        raise IndexError(f"patch index {index} out of range [0, {grid.n_cores})")
    origin = grid.origins[index]
    idx = []
    for axis in range(3):
        start = int(origin[axis]) - grid.pad
        rng = np.arange(start, start + grid.patch_size)
        idx.append(np.clip(rng, 0, grid.dims[axis] - 1))
    return idx


def extract_patch(vol: np.ndarray, grid: PatchGrid, index: int) -> np.ndarray:
    """Cut one patch window, replicating edge values outside the volume."""
    if vol.shape[:3] != grid.dims:
        raise ValueError(f"volume dims {vol.shape[:3]} do not match grid dims {grid.dims}")
    xi, yi, zi = _window_indices(grid, index)
    return vol[np.ix_(xi, yi, zi)]


def extract_pair(moving: np.ndarray, fixed: np.ndarray, grid: PatchGrid, index: int):
    """Matching moving/fixed patches cut from identical coordinates."""
    return extract_patch(moving, grid, index), extract_patch(fixed, grid, index)


def fuse(results, grid: PatchGrid, dims=None) -> np.ndarray:
    """Assemble per-patch velocities into one full-volume field from the core crops."""
    dims = grid.dims if dims is None else tuple(int(n) for n in dims)
    if dims != grid.dims:
        raise ValueError(f"dims {dims} do not match grid dims {grid.dims}")
    if len(results) != grid.n_cores:
        raise ValueError(f"expected {grid.n_cores} patch results, got {len(results)}")
    p = grid.patch_size
    c = grid.core_size
    pad = grid.pad
    out = np.zeros(dims + (3,), dtype=np.float64)
    for i in range(grid.n_cores):
        vel = getattr(results[i], "velocity", results[i])
        if vel.shape != (p, p, p, 3):
            raise ValueError(f"patch {i}: velocity shape {vel.shape}, expected {(p, p, p, 3)}")
        ox, oy, oz = (int(v) for v in grid.origins[i])
        ex = min(ox + c, dims[0])
        ey = min(oy + c, dims[1])
        ez = min(oz + c, dims[2])
        out[ox:ex, oy:ey, oz:ez] = vel[pad:pad + (ex - ox), pad:pad + (ey - oy), pad:pad + (ez - oz)]
    return out


def classify_background(m_patch: np.ndarray, f_patch: np.ndarray, threshold: float = 1e-4) -> bool:
    """True when both patches are flat enough to skip (std below threshold)."""
    return bool(m_patch.std() < threshold and f_patch.std() < threshold)
