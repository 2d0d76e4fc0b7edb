"""Spectral differential operator (-alpha*Laplacian + Id) and its squared-inverse smoother.

The operator is diagonal in the Fourier basis of the periodic 7-point Laplacian,
so both the operator and the smoother reduce to per-frequency multipliers applied
through a real FFT. Symbol tables are cached per (dims, alpha).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "OperatorSpec",
    "OperatorSymbols",
    "build_symbols",
    "apply_operator",
    "apply_smoother",
    "smoothness_energy",
]


@dataclass(frozen=True)
class OperatorSpec:
    """Smoothness weight alpha (>= 0) and the grid it acts on."""

    alpha: float
    dims: tuple

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"bad dims {self.dims}")
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))


@dataclass(frozen=True)
class OperatorSymbols:
    """Per-frequency multipliers on the half-spectrum grid of a real FFT."""

    lhat: np.ndarray  # operator symbol, >= 1 everywhere, == 1 at DC
    khat: np.ndarray  # smoother symbol, 1 / lhat**2, in (0, 1]


@lru_cache(maxsize=64)
def _symbols_cached(alpha: float, dims: tuple) -> OperatorSymbols:
    nx, ny, nz = dims
    # eigenvalues of the periodic 7-point Laplacian, per axis: 2 - 2*cos(2*pi*k/n)
    wx = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.fftfreq(nx))
    wy = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.fftfreq(ny))
    wz = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.rfftfreq(nz))
    lhat = 1.0 + alpha * (wx[:, None, None] + wy[None, :, None] + wz[None, None, :])
    lhat[0, 0, 0] = 1.0
    khat = 1.0 / (lhat * lhat)
    lhat.setflags(write=False)
    khat.setflags(write=False)
    return OperatorSymbols(lhat=lhat, khat=khat)


def build_symbols(spec: OperatorSpec) -> OperatorSymbols:
    return _symbols_cached(float(spec.alpha), spec.dims)


def _apply_multiplier(data: np.ndarray, spec: OperatorSpec, mult: np.ndarray) -> np.ndarray:
    if data.shape[:3] != spec.dims:
        raise ValueError(f"incompatible grids: {data.shape[:3]} vs {spec.dims}")
    spectrum = np.fft.rfftn(data, axes=(0, 1, 2))
    if data.ndim == 4:
        spectrum *= mult[..., None]
    else:
        spectrum *= mult
    return np.fft.irfftn(spectrum, s=spec.dims, axes=(0, 1, 2))


def apply_operator(data: np.ndarray, spec: OperatorSpec) -> np.ndarray:
    """Apply -alpha*Laplacian + Id to a scalar volume or vector field."""
    return _apply_multiplier(data, spec, build_symbols(spec).lhat)


def apply_smoother(data: np.ndarray, spec: OperatorSpec) -> np.ndarray:
    """Apply the inverse of the squared operator (the smoothing kernel)."""
    return _apply_multiplier(data, spec, build_symbols(spec).khat)


def smoothness_energy(field: np.ndarray, spec: OperatorSpec, weight: float = 1.0) -> float:
    """weight * (voxel-sum of squared vector magnitudes of the operator applied to field).

    For a stationary field the per-step time sum collapses to a single term, so
    this is the full regularity energy of the velocity.
    """
    lv = apply_operator(field, spec)
    return float(weight * np.sum(lv * lv))
