"""Keypoint-guided patch selection for ViT pose estimation."""

from .grid import (
    Keypoint,
    KeypointPrediction,
    PatchCoord,
    PatchGrid,
    PatchSet,
    SkeletonPairs,
    flatten,
    to_patch_coord,
    unflatten,
)
from .selection import (
    Method,
    SelectionConfig,
    bresenham,
    neighbors4,
    select,
    select_joint_patches,
    select_skeleton_patches,
)

__version__ = "0.1.0"
