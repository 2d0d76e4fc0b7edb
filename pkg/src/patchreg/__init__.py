"""Patch-based diffeomorphic 3D image registration with spectral velocity smoothing."""

from .cascade import (
    CascadeConfig,
    RegistrationCancelled,
    RegistrationResult,
    StageResult,
    register,
)
from .flow import (
    Diffeomorphism,
    FlowConfig,
    compose,
    integrate_velocity,
    inverse_displacement,
    jacobian_determinant,
)
from .grid import (
    central_gradient,
    field_axpy,
    field_linf,
    sample_field,
    sample_volume,
    trilinear_sample,
    warp_volume,
)
from .io import FormatError, VolumeHeader, read_volume, write_volume
from .metrics import DiceReport, JacobianReport, dice, jacobian_report, warp_labels
from .ncc import NccConfig, ncc_gateaux, ncc_value, ncc_value_and_gateaux
from .optimizer import OptimConfig, PatchResult, optimize_patch, patch_gradient, patch_loss
from .patches import PatchGrid, classify_background, extract_pair, extract_patch, fuse, plan_grid
from .spectral import OperatorSpec, OperatorSymbols, apply_operator, apply_smoother, build_symbols, smoothness_energy
from .synth import make_blobs, make_ellipsoid, make_sphere

__version__ = "0.1.0"

__all__ = [
    "CascadeConfig",
    "DiceReport",
    "Diffeomorphism",
    "FlowConfig",
    "FormatError",
    "JacobianReport",
    "NccConfig",
    "OperatorSpec",
    "OperatorSymbols",
    "OptimConfig",
    "PatchGrid",
    "PatchResult",
    "RegistrationCancelled",
    "RegistrationResult",
    "StageResult",
    "VolumeHeader",
    "apply_operator",
    "apply_smoother",
    "build_symbols",
    "central_gradient",
    "classify_background",
    "compose",
    "dice",
    "extract_pair",
    "extract_patch",
    "field_axpy",
    "field_linf",
    "fuse",
    "integrate_velocity",
    "inverse_displacement",
    "jacobian_determinant",
    "jacobian_report",
    "make_blobs",
    "make_ellipsoid",
    "make_sphere",
    "ncc_gateaux",
    "ncc_value",
    "ncc_value_and_gateaux",
    "optimize_patch",
    "patch_gradient",
    "patch_loss",
    "plan_grid",
    "read_volume",
    "register",
    "sample_field",
    "sample_volume",
    "smoothness_energy",
    "trilinear_sample",
    "warp_labels",
    "warp_volume",
    "write_volume",
]
