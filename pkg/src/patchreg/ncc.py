"""Local normalized cross-correlation over cubic windows, plus its image derivative.

Per voxel p, over the window W(p) clamped to the volume (truncated, never padded):

    cross = sum (J - Jbar)(F - Fbar),  varJ = sum (J - Jbar)^2,  varF likewise
    score(p) = cross^2 / (varJ * varF + eps)

``ncc_value`` is the mean score over all voxels (in [0, ~1]); the similarity term
used by the optimizer is its negative.  ``ncc_gateaux`` is the exact derivative of
that similarity with respect to the first image, computed with the same truncated
window convention.  The window membership relation is symmetric (q in W(p) iff
p in W(q)), so the adjoint accumulation is the same box sum applied to the
per-window coefficient fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import require_same_dims

__all__ = ["NccConfig", "window_sum", "ncc_value", "ncc_gateaux", "ncc_value_and_gateaux"]


@dataclass(frozen=True)
class NccConfig:
    window: int = 7
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


def _box_sum_axis(a: np.ndarray, w: int, axis: int) -> np.ndarray:
    r = w // 2
    n = a.shape[axis]
    c = np.cumsum(a, axis=axis)
    pad_shape = list(c.shape)
    pad_shape[axis] = 1
    c = np.concatenate([np.zeros(pad_shape, dtype=c.dtype), c], axis=axis)
    hi = np.minimum(np.arange(n) + r + 1, n)
    lo = np.maximum(np.arange(n) - r, 0)
    return np.take(c, hi, axis=axis) - np.take(c, lo, axis=axis)


def window_sum(a: np.ndarray, window: int) -> np.ndarray:
    """Sum of ``a`` over the clamped cubic window centred at each voxel."""
    out = a
    for axis in range(3):
        out = _box_sum_axis(out, window, axis)
    return out


@lru_cache(maxsize=32)
def _window_counts(dims: tuple, window: int) -> np.ndarray:
    counts = window_sum(np.ones(dims, dtype=np.float64), window)
    counts.setflags(write=False)
    return counts


def _window_stats(j: np.ndarray, f: np.ndarray, cfg: NccConfig):
    w = cfg.window
    n = _window_counts(j.shape, w)
    sj = window_sum(j, w)
    sf = window_sum(f, w)
    sjj = window_sum(j * j, w)
    sff = window_sum(f * f, w)
    sjf = window_sum(j * f, w)
    cross = sjf - sj * sf / n
    varj = np.maximum(sjj - sj * sj / n, 0.0)
    varf = np.maximum(sff - sf * sf / n, 0.0)
    return n, sj, sf, cross, varj, varf


def ncc_value(j: np.ndarray, f: np.ndarray, cfg: NccConfig = NccConfig()) -> float:
    """Mean local squared correlation between two volumes."""
    require_same_dims(j, f)
    _, _, _, cross, varj, varf = _window_stats(j, f, cfg)
    score = cross * cross / (varj * varf + cfg.epsilon)
    return float(score.mean())


def ncc_gateaux(j: np.ndarray, f: np.ndarray, cfg: NccConfig = NccConfig()) -> np.ndarray:
    """Derivative of the similarity (negative mean score) with respect to ``j``."""
    return ncc_value_and_gateaux(j, f, cfg)[1]


def ncc_value_and_gateaux(j: np.ndarray, f: np.ndarray, cfg: NccConfig = NccConfig()):
    """Value and derivative together, sharing the windowed moment sums."""
    require_same_dims(j, f)
    w = cfg.window
    n, sj, sf, cross, varj, varf = _window_stats(j, f, cfg)
    denom = varj * varf + cfg.epsilon
    score = cross * cross / denom
    value = float(score.mean())

    jbar = sj / n
    fbar = sf / n
    # d score(p) / d J(q) = A_p (F_q - Fbar_p) + B_p (J_q - Jbar_p) for q in W(p)
    a = 2.0 * cross / denom
    b = -2.0 * score * varf / denom
    acc = f * window_sum(a, w) - window_sum(a * fbar, w)
    acc += j * window_sum(b, w) - window_sum(b * jbar, w)
    nvox = j.size
    gateaux = -acc / nvox
    return value, gateaux
