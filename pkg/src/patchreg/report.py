"""Render evaluation reports: JSON, a delimited (CSV) summary and matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["write_report"]


def write_report(out_path, jacobian=None, dice=None, det_volume=None, extra=None, plots=True):
    """Write the metrics JSON at ``out_path`` plus a CSV and PNG figures alongside.

    Returns the list of files written.  ``jacobian``/``dice`` are the report
    dataclasses from :mod:`patchreg.metrics`; ``det_volume`` (optional) feeds the
    determinant histogram figure.
    """
    out_path = Path(out_path)
    payload: dict = {}
    if dice is not None:
        payload.update(dice.as_dict())
    if jacobian is not None:
        payload.update(jacobian.as_dict())
    if extra:
        payload.update(extra)

    written = [out_path]
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    csv_path = out_path.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "label", "value"])
        if dice is not None:
            for lab, val in sorted(dice.per_label.items()):
                writer.writerow(["dice", lab, f"{val:.6f}"])
            writer.writerow(["avg_dsc", "", f"{dice.avg_dsc:.6f}"])
            writer.writerow(["std_dsc", "", f"{dice.std_dsc:.6f}"])
        if jacobian is not None:
            writer.writerow(["nonpositive_count", "", jacobian.nonpositive_count])
            writer.writerow(["nonpositive_pct", "", f"{jacobian.nonpositive_pct:.6g}"])
            writer.writerow(["det_min", "", f"{jacobian.det_min:.6g}"])
            writer.writerow(["det_max", "", f"{jacobian.det_max:.6g}"])
    written.append(csv_path)

    if plots:
        written.extend(_render_figures(out_path, dice, det_volume))
    return written


def _render_figures(out_path: Path, dice, det_volume):
    written = []
    stem = out_path.with_suffix("")
    if dice is not None and dice.per_label:
        fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(dice.per_label) + 2.0), 3.2))
        labs = sorted(dice.per_label)
        ax.bar([str(l) for l in labs], [dice.per_label[l] for l in labs], color="#4878a8")
        ax.axhline(dice.avg_dsc, color="#b04a4a", lw=1.0, ls="--",
                   label=f"mean {dice.avg_dsc:.3f}")
        ax.set_xlabel("label")
        ax.set_ylabel("Dice")
        ax.set_ylim(0.0, 1.05)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        path = Path(f"{stem}_dice.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    if det_volume is not None:
        det = np.asarray(det_volume).ravel()
        fig, ax = plt.subplots(figsize=(4.6, 3.2))
        ax.hist(det, bins=80, color="#4878a8")
        ax.axvline(0.0, color="#b04a4a", lw=1.0)
        ax.set_xlabel("Jacobian determinant")
        ax.set_ylabel("voxels")
        ax.set_yscale("log")
        fig.tight_layout()
        path = Path(f"{stem}_jacobian.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
