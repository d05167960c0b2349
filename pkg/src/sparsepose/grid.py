"""Patch-grid geometry and the keypoint / patch-set value types."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class PatchGrid:
    """Tiling of an ``image_height x image_width`` frame into square patches."""

    image_height: int
    image_width: int
    patch_size: int = 16

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be positive, got {self.patch_size}")
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise ValueError(
                f"image {self.image_height}x{self.image_width} is not a multiple "
                f"of patch size {self.patch_size}"
            )
        if self.image_height < self.patch_size or self.image_width < self.patch_size:
            raise ValueError("grid must contain at least one patch")

    @property
    def rows(self) -> int:
        return self.image_height // self.patch_size

    @property
    def cols(self) -> int:
        return self.image_width // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    def contains(self, coord: PatchCoord) -> bool:
        return 0 <= coord.x < self.cols and 0 <= coord.y < self.rows


class PatchCoord(NamedTuple):
    x: int  # column
    y: int  # row


class Keypoint(NamedTuple):
    x: float
    y: float
    visible: bool = True


@dataclass(frozen=True)
class KeypointPrediction:
    points: tuple[Keypoint, ...]

    def __post_init__(self):
        pts = tuple(Keypoint(float(p[0]), float(p[1]), bool(p[2]) if len(p) > 2 else True)
                    for p in self.points)
        if not pts:
            raise ValueError("a keypoint prediction needs at least one keypoint")
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"non-finite keypoint {p}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @classmethod
    def from_array(cls, xy, visible=None) -> KeypointPrediction:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        if visible is None:
            visible = np.ones(len(xy), dtype=bool)
        return cls(tuple(Keypoint(float(x), float(y), bool(v))
                         for (x, y), v in zip(xy, visible)))

    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points], dtype=np.float64)

    def visibility(self) -> np.ndarray:
        return np.array([p.visible for p in self.points], dtype=bool)

    def to_json(self) -> dict:
        return {"keypoints": [{"x": p.x, "y": p.y, "v": int(p.visible)} for p in self.points]}

    @classmethod
    def from_json(cls, obj) -> KeypointPrediction:
        if isinstance(obj, dict):
            obj = obj["keypoints"]
        return cls(tuple(Keypoint(float(k["x"]), float(k["y"]), bool(k.get("v", 1)))
                         for k in obj))


@dataclass(frozen=True)
class PatchSet:
    """Strictly ascending, duplicate-free flat patch indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("patch indices must be strictly ascending")
        if idx and idx[0] < 0:
            raise ValueError("patch indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, indices: Iterable[int]) -> PatchSet:
        return cls(tuple(sorted(set(int(i) for i in indices))))

    @classmethod
    def full(cls, grid: PatchGrid) -> PatchSet:
        return cls(tuple(range(grid.num_patches)))

    def check(self, grid: PatchGrid) -> PatchSet:
        if self.indices and self.indices[-1] >= grid.num_patches:
            raise IndexError(f"patch index {self.indices[-1]} outside grid of "
                             f"{grid.num_patches} patches")
        return self

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in set(self.indices)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


@dataclass(frozen=True)
class SkeletonPairs:
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        for a, b in pairs:
            if a == b or a < 0 or b < 0:
                raise ValueError(f"invalid joint pair ({a}, {b})")
        object.__setattr__(self, "pairs", pairs)

    def validate(self, num_keypoints: int) -> SkeletonPairs:
        for a, b in self.pairs:
            if a >= num_keypoints or b >= num_keypoints:
                raise ValueError(f"pair ({a}, {b}) references a joint beyond K={num_keypoints}")
        return self

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def to_patch_coord(point: Sequence[float], grid: PatchGrid) -> PatchCoord:
    """Patch containing a pixel location, clamped onto the grid edge."""
    px, py = float(point[0]), float(point[1])
    if not (math.isfinite(px) and math.isfinite(py)):
        raise ValueError(f"non-finite point {point}")
    x = math.floor(px / grid.patch_size)
    y = math.floor(py / grid.patch_size)
    return PatchCoord(min(max(x, 0), grid.cols - 1), min(max(y, 0), grid.rows - 1))


def flatten(coord: PatchCoord, grid: PatchGrid) -> int:
    if not grid.contains(coord):
        raise IndexError(f"{coord} outside {grid.cols}x{grid.rows} patch grid")
    return coord.y * grid.cols + coord.x


def unflatten(index: int, grid: PatchGrid) -> PatchCoord:
    if not 0 <= index < grid.num_patches:
        raise IndexError(f"flat index {index} outside grid of {grid.num_patches} patches")
    y, x = divmod(int(index), grid.cols)
    return PatchCoord(x, y)


def load_keypoints(path) -> KeypointPrediction:
    with open(path) as fh:
        return KeypointPrediction.from_json(json.load(fh))


def load_keypoint_corpus(path) -> list[KeypointPrediction]:
    """Read either a single ``{"keypoints": ...}`` object or a list of them."""
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        return [KeypointPrediction.from_json(obj)]
    return [KeypointPrediction.from_json(o) for o in obj]
