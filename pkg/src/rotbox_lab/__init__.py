"""Rotated-box recovery laboratory.

Recovers oriented boxes from horizontal-box-only supervision: exact box
geometry, the circumscribed-rectangle constraint system, the full loss
family with rotation-consistency, augmented-view generation with label
re-assignment, a per-object gradient-descent recovery simulator, and an
evaluation/ablation harness.
"""

from .geometry import (
    HBox,
    Polygon,
    RBox,
    ViewRotation,
    angle_normalize,
    circumscribed_hbox,
    hbox_iou,
    rbox_corners,
    rbox_iou,
    rotate_point,
    rotate_rbox,
    symmetric_rbox,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "RBox",
    "HBox",
    "ViewRotation",
    "Polygon",
    "angle_normalize",
    "rotate_point",
    "rotate_rbox",
    "circumscribed_hbox",
    "symmetric_rbox",
    "rbox_corners",
    "hbox_iou",
    "rbox_iou",
    "KERNEL_BACKEND",
    "__version__",
]
