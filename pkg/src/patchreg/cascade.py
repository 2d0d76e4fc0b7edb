"""Coarse-to-fine registration: per-stage patch optimisation with decreasing alpha.

Each stage warps the moving image by the accumulated inverse map, estimates a
velocity field patch-by-patch at that stage's smoothness, fuses the core crops,
integrates the fused field and composes it onto the running transformation
(newest stage outermost).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .flow import Diffeomorphism, FlowConfig, compose, integrate_velocity
from .grid import warp_volume, zero_field
from .ncc import NccConfig, ncc_value
from .optimizer import OptimConfig, PatchResult, optimize_patch
from .patches import classify_background, extract_pair, fuse, plan_grid
from .spectral import OperatorSpec

__all__ = [
    "CascadeConfig",
    "StageResult",
    "RegistrationResult",
    "RegistrationCancelled",
    "register",
]


class RegistrationCancelled(RuntimeError):
    """Raised when a cancellation signal is observed between patches."""


@dataclass(frozen=True)
class CascadeConfig:
    alphas: tuple = (0.01, 0.005, 0.001)
    optim: OptimConfig = OptimConfig()
    flow: FlowConfig = FlowConfig()
    ncc: NccConfig = NccConfig()
    patch_size: int = 64
    core_size: int = 32
    background_threshold: float = 1e-4
    # optional per-stage overrides, each len(alphas) when given
    stage_optim: tuple | None = None
    stage_flow: tuple | None = None
    stage_ncc: tuple | None = None

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or any(a <= 0 for a in alphas):
            raise ValueError("alphas must be positive")
        if any(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:])):
            raise ValueError("alphas must be strictly decreasing")
        object.__setattr__(self, "alphas", alphas)
        for name in ("stage_optim", "stage_flow", "stage_ncc"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != len(alphas):
                raise ValueError(f"{name} must have one entry per stage")

    @property
    def n_stages(self) -> int:
        return len(self.alphas)

    def optim_for(self, k: int) -> OptimConfig:
        return self.stage_optim[k] if self.stage_optim else self.optim

    def flow_for(self, k: int) -> FlowConfig:
        return self.stage_flow[k] if self.stage_flow else self.flow

    def ncc_for(self, k: int) -> NccConfig:
        return self.stage_ncc[k] if self.stage_ncc else self.ncc


@dataclass(frozen=True)
class StageResult:
    alpha: float
    velocity: np.ndarray = field(repr=False)
    diffeo: Diffeomorphism = field(repr=False)
    ncc_before: float
    ncc_after: float
    n_patches: int
    n_skipped: int
    runtime_s: float


@dataclass(frozen=True)
class RegistrationResult:
    total: Diffeomorphism
    stages: list

    @property
    def final_ncc(self) -> float:
        return self.stages[-1].ncc_after if self.stages else float("nan")


def _check_cancel(cancel) -> None:
    if cancel is not None and cancel.is_set():
        raise RegistrationCancelled("registration cancelled between patches")


def _zero_patch_result(patch_size: int) -> PatchResult:
    return PatchResult(
        velocity=zero_field((patch_size, patch_size, patch_size)),
        final_loss=0.0,
        final_sim=0.0,
        final_reg=0.0,
        iters_used=0,
        converged=True,
    )


def _stage_patches(warped, fixed, grid, op_spec, optim_cfg, flow_cfg, ncc_cfg,
                   background_threshold, threads, cancel):
    def solve(index: int) -> PatchResult:
        m_i, f_i = extract_pair(warped, fixed, grid, index)
        if classify_background(m_i, f_i, background_threshold):
            return _zero_patch_result(grid.patch_size)
        return optimize_patch(m_i, f_i, optim_cfg, op_spec, flow_cfg, ncc_cfg)

    results: list = [None] * grid.n_cores
    if threads <= 1:
        for i in range(grid.n_cores):
            _check_cancel(cancel)
            results[i] = solve(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {}
            for i in range(grid.n_cores):
                _check_cancel(cancel)
                futures[i] = pool.submit(solve, i)
            for i in range(grid.n_cores):
                results[i] = futures[i].result()
        _check_cancel(cancel)
    return results


def register(
    moving: np.ndarray,
    fixed: np.ndarray,
    cfg: CascadeConfig = CascadeConfig(),
    threads: int = 1,
    cancel=None,
) -> RegistrationResult:
    """Run the full coarse-to-fine cascade on a pre-normalised image pair."""
    if moving.shape != fixed.shape or moving.ndim != 3:
        raise ValueError(f"moving/fixed dims differ or are not 3D: {moving.shape} vs {fixed.shape}")
    for name, img in (("moving", moving), ("fixed", fixed)):
        lo, hi = float(img.min()), float(img.max())
        if lo < -0.01 or hi > 1.01:
            raise ValueError(
                f"{name} image intensities [{lo:g}, {hi:g}] outside [0, 1]; "
                "normalise inputs to [0, 1] first (the CLI does this with min-max scaling)"
            )

    dims = moving.shape
    grid = plan_grid(dims, cfg.patch_size, cfg.core_size)
    patch_dims = (cfg.patch_size,) * 3
    total = Diffeomorphism.identity(dims)
    warped = moving.copy()
    stages = []

    for k, alpha in enumerate(cfg.alphas):
        t0 = time.perf_counter()
        optim_cfg = cfg.optim_for(k)
        flow_cfg = cfg.flow_for(k)
        ncc_cfg = cfg.ncc_for(k)
        op_spec = OperatorSpec(alpha=alpha, dims=patch_dims)

        ncc_before = ncc_value(warped, fixed, ncc_cfg)
        results = _stage_patches(
            warped, fixed, grid, op_spec, optim_cfg, flow_cfg, ncc_cfg,
            cfg.background_threshold, threads, cancel,
        )
        n_skipped = sum(1 for r in results if r.iters_used == 0 and not r.velocity.any())

        velocity = fuse(results, grid)
        diffeo = integrate_velocity(velocity, flow_cfg)
        total = compose(diffeo, total)
        warped = warp_volume(moving, total.inverse_disp)
        ncc_after = ncc_value(warped, fixed, ncc_cfg)

        stages.append(
            StageResult(
                alpha=alpha,
                velocity=velocity,
                diffeo=diffeo,
                ncc_before=ncc_before,
                ncc_after=ncc_after,
                n_patches=grid.n_cores,
                n_skipped=n_skipped,
                runtime_s=time.perf_counter() - t0,
            )
        )

    return RegistrationResult(total=total, stages=stages)
