"""Core 3D grid math: trilinear sampling, warping, finite differences, field arithmetic.

Conventions used throughout the package:
  * scalar volumes are float64 arrays of shape (nx, ny, nz), indexed [x, y, z]
  * vector fields are float64 arrays of shape (nx, ny, nz, 3), components in voxel units
  * coordinates are in voxel units; sampling outside the grid clamps to the boundary
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "as_volume",
    "as_field",
    "zero_field",
    "trilinear_sample",
    "sample_volume",
    "sample_field",
    "warp_volume",
    "displace_field",
    "central_gradient",
    "field_axpy",
    "field_linf",
    "require_same_dims",
]


def as_volume(data) -> np.ndarray:
    """Coerce to a float64 (nx, ny, nz) scalar volume, validating shape and finiteness."""
    vol = np.ascontiguousarray(data, dtype=np.float64)
    if vol.ndim != 3 or min(vol.shape) < 1:
        raise ValueError(f"expected a 3D scalar volume, got shape {vol.shape}")
    if not np.all(np.isfinite(vol)):
        raise ValueError("volume contains non-finite values")
    return vol


def as_field(data) -> np.ndarray:
    """Coerce to a float64 (nx, ny, nz, 3) vector field, validating shape and finiteness."""
    f = np.ascontiguousarray(data, dtype=np.float64)
    if f.ndim != 4 or f.shape[-1] != 3 or min(f.shape[:3]) < 1:
        raise ValueError(f"expected a (nx, ny, nz, 3) vector field, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("vector field contains non-finite values")
    return f


def zero_field(dims) -> np.ndarray:
    nx, ny, nz = dims
    return np.zeros((nx, ny, nz, 3), dtype=np.float64)


def require_same_dims(*arrays) -> tuple:
    """Check that all arrays share the same spatial dims (first three axes)."""
    dims = arrays[0].shape[:3]
    for a in arrays[1:]:
        if a.shape[:3] != dims:
            raise ValueError(f"incompatible grids: {a.shape[:3]} vs {dims}")
    return dims


@njit(cache=True)
def _sample_volume_flat(vol, px, py, pz, out):
    nx, ny, nz = vol.shape
    for i in range(px.shape[0]):
        x = px[i]
        y = py[i]
        z = pz[i]
        if x < 0.0:
            x = 0.0
        elif x > nx - 1.0:
            x = nx - 1.0
        if y < 0.0:
            y = 0.0
        elif y > ny - 1.0:
            y = ny - 1.0
        if z < 0.0:
            z = 0.0
        elif z > nz - 1.0:
            z = nz - 1.0
        x0 = int(x)
        y0 = int(y)
        z0 = int(z)
        x1 = x0 + 1 if x0 + 1 < nx else nx - 1
        y1 = y0 + 1 if y0 + 1 < ny else ny - 1
        z1 = z0 + 1 if z0 + 1 < nz else nz - 1
        fx = x - x0
        fy = y - y0
        fz = z - z0
        c00 = vol[x0, y0, z0] + fz * (vol[x0, y0, z1] - vol[x0, y0, z0])
        c01 = vol[x0, y1, z0] + fz * (vol[x0, y1, z1] - vol[x0, y1, z0])
        c10 = vol[x1, y0, z0] + fz * (vol[x1, y0, z1] - vol[x1, y0, z0])
        c11 = vol[x1, y1, z0] + fz * (vol[x1, y1, z1] - vol[x1, y1, z0])
        c0 = c00 + fy * (c01 - c00)
        c1 = c10 + fy * (c11 - c10)
        out[i] = c0 + fx * (c1 - c0)


@njit(cache=True)
def _sample_field_flat(field, px, py, pz, out):
    nx, ny, nz, nc = field.shape
    for i in range(px.shape[0]):
        x = px[i]
        y = py[i]
        z = pz[i]
        if x < 0.0:
            x = 0.0
        elif x > nx - 1.0:
            x = nx - 1.0
        if y < 0.0:
            y = 0.0
        elif y > ny - 1.0:
            y = ny - 1.0
        if z < 0.0:
            z = 0.0
        elif z > nz - 1.0:
            z = nz - 1.0
        x0 = int(x)
        y0 = int(y)
        z0 = int(z)
        x1 = x0 + 1 if x0 + 1 < nx else nx - 1
        y1 = y0 + 1 if y0 + 1 < ny else ny - 1
        z1 = z0 + 1 if z0 + 1 < nz else nz - 1
        fx = x - x0
        fy = y - y0
        fz = z - z0
        for c in range(nc):
            c00 = field[x0, y0, z0, c] + fz * (field[x0, y0, z1, c] - field[x0, y0, z0, c])
            c01 = field[x0, y1, z0, c] + fz * (field[x0, y1, z1, c] - field[x0, y1, z0, c])
            c10 = field[x1, y0, z0, c] + fz * (field[x1, y0, z1, c] - field[x1, y0, z0, c])
            c11 = field[x1, y1, z0, c] + fz * (field[x1, y1, z1, c] - field[x1, y1, z0, c])
            c0 = c00 + fy * (c01 - c00)
            c1 = c10 + fy * (c11 - c10)
            out[i, c] = c0 + fx * (c1 - c0)


@njit(cache=True)
def _warp_volume_kernel(vol, disp, out):
    nx, ny, nz = vol.shape
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                x = ix + disp[ix, iy, iz, 0]
                y = iy + disp[ix, iy, iz, 1]
                z = iz + disp[ix, iy, iz, 2]
                if x < 0.0:
                    x = 0.0
                elif x > nx - 1.0:
                    x = nx - 1.0
                if y < 0.0:
                    y = 0.0
                elif y > ny - 1.0:
                    y = ny - 1.0
                if z < 0.0:
                    z = 0.0
                elif z > nz - 1.0:
                    z = nz - 1.0
                x0 = int(x)
                y0 = int(y)
                z0 = int(z)
                x1 = x0 + 1 if x0 + 1 < nx else nx - 1
                y1 = y0 + 1 if y0 + 1 < ny else ny - 1
                z1 = z0 + 1 if z0 + 1 < nz else nz - 1
                fx = x - x0
                fy = y - y0
                fz = z - z0
                c00 = vol[x0, y0, z0] + fz * (vol[x0, y0, z1] - vol[x0, y0, z0])
                c01 = vol[x0, y1, z0] + fz * (vol[x0, y1, z1] - vol[x0, y1, z0])
                c10 = vol[x1, y0, z0] + fz * (vol[x1, y0, z1] - vol[x1, y0, z0])
                c11 = vol[x1, y1, z0] + fz * (vol[x1, y1, z1] - vol[x1, y1, z0])
                c0 = c00 + fy * (c01 - c00)
                c1 = c10 + fy * (c11 - c10)
                out[ix, iy, iz] = c0 + fx * (c1 - c0)


@njit(cache=True)
def _displace_field_kernel(field, disp, out):
    nx, ny, nz, nc = field.shape
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                x = ix + disp[ix, iy, iz, 0]
                y = iy + disp[ix, iy, iz, 1]
                z = iz + disp[ix, iy, iz, 2]
                if x < 0.0:
                    x = 0.0
                elif x > nx - 1.0:
                    x = nx - 1.0
                if y < 0.0:
                    y = 0.0
                elif y > ny - 1.0:
                    y = ny - 1.0
                if z < 0.0:
                    z = 0.0
                elif z > nz - 1.0:
                    z = nz - 1.0
                x0 = int(x)
                y0 = int(y)
                z0 = int(z)
                x1 = x0 + 1 if x0 + 1 < nx else nx - 1
                y1 = y0 + 1 if y0 + 1 < ny else ny - 1
                z1 = z0 + 1 if z0 + 1 < nz else nz - 1
                fx = x - x0
                fy = y - y0
                fz = z - z0
                for c in range(nc):
                    c00 = field[x0, y0, z0, c] + fz * (field[x0, y0, z1, c] - field[x0, y0, z0, c])
                    c01 = field[x0, y1, z0, c] + fz * (field[x0, y1, z1, c] - field[x0, y1, z0, c])
                    c10 = field[x1, y0, z0, c] + fz * (field[x1, y0, z1, c] - field[x1, y0, z0, c])
                    c11 = field[x1, y1, z0, c] + fz * (field[x1, y1, z1, c] - field[x1, y1, z0, c])
                    c0 = c00 + fy * (c01 - c00)
                    c1 = c10 + fy * (c11 - c10)
                    out[ix, iy, iz, c] = c0 + fx * (c1 - c0)


def trilinear_sample(vol: np.ndarray, point) -> float:
    """Trilinear interpolation of ``vol`` at a single voxel-space point (clamped)."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ValueError("point must be a finite 3-vector")
    out = np.empty(1, dtype=np.float64)
    _sample_volume_flat(vol, p[0:1], p[1:2], p[2:3], out)
    return float(out[0])


def sample_volume(vol: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample ``vol`` at an array of points of shape (..., 3); clamps out-of-range coords."""
    pts = np.ascontiguousarray(coords, dtype=np.float64)
    flat = pts.reshape(-1, 3)
    out = np.empty(flat.shape[0], dtype=np.float64)
    _sample_volume_flat(
        vol,
        np.ascontiguousarray(flat[:, 0]),
        np.ascontiguousarray(flat[:, 1]),
        np.ascontiguousarray(flat[:, 2]),
        out,
    )
    return out.reshape(pts.shape[:-1])


def sample_field(field: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample a 3-channel field at points of shape (..., 3), returning (..., 3)."""
    pts = np.ascontiguousarray(coords, dtype=np.float64)
    flat = pts.reshape(-1, 3)
    out = np.empty((flat.shape[0], field.shape[-1]), dtype=np.float64)
    _sample_field_flat(
        field,
        np.ascontiguousarray(flat[:, 0]),
        np.ascontiguousarray(flat[:, 1]),
        np.ascontiguousarray(flat[:, 2]),
        out,
    )
    return out.reshape(pts.shape[:-1] + (field.shape[-1],))


def warp_volume(vol: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Resample ``vol`` through a displacement field: out(x) = vol(x + disp(x))."""
    require_same_dims(vol, disp)
    out = np.empty_like(vol)
    _warp_volume_kernel(vol, disp, out)
    return out


def displace_field(field: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Resample a vector field through a displacement: out(x) = field(x + disp(x))."""
    require_same_dims(field, disp)
    out = np.empty_like(field)
    _displace_field_kernel(field, disp, out)
    return out


def central_gradient(vol: np.ndarray) -> np.ndarray:
    """Per-axis derivative field: central differences inside, one-sided on the faces."""
    if min(vol.shape) < 2:
        raise ValueError("central_gradient needs at least 2 voxels per axis")
    gx, gy, gz = np.gradient(vol)
    return np.stack([gx, gy, gz], axis=-1)


def field_axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return a*x + y for two vector fields of matching dims."""
    require_same_dims(x, y)
    return a * x + y


def field_linf(x: np.ndarray) -> float:
    """Max over voxels of the Euclidean norm of the vector at that voxel."""
    mag2 = np.einsum("...c,...c->...", x, x)
    return float(np.sqrt(mag2.max(initial=0.0)))
