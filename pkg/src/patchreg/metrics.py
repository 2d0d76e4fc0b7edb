"""Evaluation: Dice overlap across labelled structures and Jacobian topology stats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import jacobian_determinant
from .grid import require_same_dims

__all__ = ["DiceReport", "JacobianReport", "warp_labels", "dice", "jacobian_report"]


@dataclass(frozen=True)
class DiceReport:
    per_label: dict
    avg_dsc: float
    std_dsc: float

    def as_dict(self) -> dict:
        return {
            "per_label": {str(k): v for k, v in self.per_label.items()},
            "avg_dsc": self.avg_dsc,
            "std_dsc": self.std_dsc,
        }


@dataclass(frozen=True)
class JacobianReport:
    nonpositive_count: int
    nonpositive_pct: float
    det_min: float
    det_max: float

    def as_dict(self) -> dict:
        return {
            "nonpositive_count": self.nonpositive_count,
            "nonpositive_pct": self.nonpositive_pct,
            "det_min": self.det_min,
            "det_max": self.det_max,
        }


def warp_labels(labels: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Nearest-neighbour resampling of an integer label volume through a displacement."""
    require_same_dims(labels, disp)
    nx, ny, nz = labels.shape
    ax = np.arange(nx)[:, None, None]
    ay = np.arange(ny)[None, :, None]
    az = np.arange(nz)[None, None, :]
    ix = np.clip(np.rint(ax + disp[..., 0]).astype(np.intp), 0, nx - 1)
    iy = np.clip(np.rint(ay + disp[..., 1]).astype(np.intp), 0, ny - 1)
    iz = np.clip(np.rint(az + disp[..., 2]).astype(np.intp), 0, nz - 1)
    return labels[ix, iy, iz]


def dice(a: np.ndarray, b: np.ndarray) -> DiceReport:
    """Per-label Dice for every nonbackground label present in either volume."""
    if a.shape != b.shape:
        raise ValueError(f"label volumes differ in dims: {a.shape} vs {b.shape}")
    af = np.asarray(a).ravel()
    bf = np.asarray(b).ravel()
    if af.size and (af.min() < 0 or bf.min() < 0):
        raise ValueError("labels must be nonnegative")
    top = int(max(af.max(initial=0), bf.max(initial=0))) + 1
    ca = np.bincount(af, minlength=top)
    cb = np.bincount(bf, minlength=top)
    agree = af == bf
    cboth = np.bincount(af[agree], minlength=top)
    per_label = {}
    for lab in range(1, top):
        denom = int(ca[lab]) + int(cb[lab])
        if denom == 0:
            continue
        per_label[int(lab)] = 2.0 * int(cboth[lab]) / denom
    vals = np.array(list(per_label.values()), dtype=np.float64)
    avg = float(vals.mean()) if vals.size else float("nan")
    std = float(vals.std()) if vals.size else float("nan")
    return DiceReport(per_label=per_label, avg_dsc=avg, std_dsc=std)


def jacobian_report(disp: np.ndarray) -> JacobianReport:
    """Count and percentage of voxels with non-positive Jacobian determinant."""
    det = jacobian_determinant(disp)
    count = int(np.count_nonzero(det <= 0.0))
    return JacobianReport(
        nonpositive_count=count,
        nonpositive_pct=100.0 * count / det.size,
        det_min=float(det.min()),
        det_max=float(det.max()),
    )
