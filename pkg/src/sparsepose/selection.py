"""Keypoint-guided patch selection.

Two selectors turn a guide network's keypoint prediction into the set of
patches the transformer will process:

* ``select_joint_patches`` keeps each joint's patch and grows a
  breadth-first neighbourhood of ``n`` extra patches around it.
* ``select_skeleton_patches`` additionally rasterises the limb between
  every joint pair with an integer error-accumulating line walk.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass
from importlib import resources

from .grid import (
    KeypointPrediction,
    PatchCoord,
    PatchGrid,
    PatchSet,
    SkeletonPairs,
    flatten,
    to_patch_coord,
)


class Method(str, enum.Enum):
    NONE = "none"
    NEIGHBORS = "neighbors"
    SKELETON = "skeleton"


@dataclass(frozen=True)
class SelectionConfig:
    method: Method = Method.NEIGHBORS
    n: int = 7
    include_joint_neighbors_in_skeleton: bool = True
    include_invisible: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.n < 0:
            raise ValueError(f"neighbour budget must be non-negative, got {self.n}")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "n": self.n,
            "include_joint_neighbors_in_skeleton": self.include_joint_neighbors_in_skeleton,
            "include_invisible": self.include_invisible,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SelectionConfig:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def default_skeleton() -> SkeletonPairs:
    """The 16-edge, 17-joint COCO-style skeleton shipped with the package."""
    text = resources.files("sparsepose.data").joinpath("coco_skeleton.json").read_text()
    return SkeletonPairs(tuple(tuple(p) for p in json.loads(text)["pairs"]))


def load_pairs(path) -> SkeletonPairs:
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        obj = obj["pairs"]
    return SkeletonPairs(tuple(tuple(p) for p in obj))


def neighbors4(coord: PatchCoord, grid: PatchGrid) -> list[PatchCoord]:
    """In-bounds 4-neighbours in the order below, above, left, right."""
    x, y = coord
    cand = (PatchCoord(x, y + 1), PatchCoord(x, y - 1),
            PatchCoord(x - 1, y), PatchCoord(x + 1, y))
    return [c for c in cand if grid.contains(c)]


def _active_joints(kp: KeypointPrediction, grid: PatchGrid, include_invisible: bool):
    return [to_patch_coord((p.x, p.y), grid) if (p.visible or include_invisible) else None
            for p in kp]


def _expand(start: PatchCoord, grid: PatchGrid, n: int, selected: set[int]) -> None:
    # Traversal uses a per-joint seen set; only patches not yet in `selected`
    # count against the budget, so earlier joints never block later searches.
    seen = {start}
    queue = deque(neighbors4(start, grid))
    seen.update(queue)
    added = 0
    while queue and added < n:
        c = queue.popleft()
        idx = flatten(c, grid)
        if idx not in selected:
            selected.add(idx)
            added += 1
        for nb in neighbors4(c, grid):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)


def select_joint_patches(kp: KeypointPrediction, grid: PatchGrid, n: int,
                         include_invisible: bool = False) -> PatchSet:
    """Joint patches plus up to ``n`` breadth-first neighbours per joint.

    Joints are processed in input order against a shared selection, so a
    patch picked for an earlier joint is never counted twice.
    """
    if n < 0:
        raise ValueError(f"neighbour budget must be non-negative, got {n}")
    selected: set[int] = set()
    for joint in _active_joints(kp, grid, include_invisible):
        if joint is None:
            continue
        selected.add(flatten(joint, grid))
        _expand(joint, grid, n, selected)
    return PatchSet.from_iterable(selected)


def bresenham(start: PatchCoord, end: PatchCoord) -> list[PatchCoord]:
    """Integer line walk from ``start`` to ``end``, both endpoints included.

    In the first octant this is the classic update: the error starts at
    ``2*dy - dx``, the minor coordinate steps whenever the error is
    non-negative (paying ``2*dx``), and every major step earns ``2*dy``.
    Other octants are handled by swapping axes and reflecting signs.
    """
    x0, y0 = start
    x1, y1 = end
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x1 >= x0 else -1
    sy = 1 if y1 >= y0 else -1
    steep = dy > dx
    if steep:
        major, minor = dy, dx
    else:
        major, minor = dx, dy

    out = []
    x, y = x0, y0
    err = 2 * minor - major
    for _ in range(major + 1):
        out.append(PatchCoord(x, y))
        if err >= 0:
            if steep:
                x += sx
            else:
                y += sy
            err -= 2 * major
        err += 2 * minor
        if steep:
            y += sy
        else:
            x += sx
    return out


def skeleton_line_patches(kp: KeypointPrediction, pairs: SkeletonPairs, grid: PatchGrid,
                          include_invisible: bool = False) -> set[int]:
    joints = _active_joints(kp, grid, include_invisible)
    pairs.validate(len(kp))
    out: set[int] = set()
    for a, b in pairs:
        if joints[a] is None or joints[b] is None:
            continue
        out.update(flatten(c, grid) for c in bresenham(joints[a], joints[b]))
    return out


def select_skeleton_patches(kp: KeypointPrediction, pairs: SkeletonPairs, grid: PatchGrid,
                            n: int, cfg: SelectionConfig | None = None) -> PatchSet:
    """Joint patches, the limb lines between visible joint pairs, and optionally
    the breadth-first neighbourhoods of :func:`select_joint_patches`."""
    cfg = cfg or SelectionConfig(method=Method.SKELETON, n=n)
    budget = n if cfg.include_joint_neighbors_in_skeleton else 0
    selected = set(select_joint_patches(kp, grid, budget, cfg.include_invisible))
    selected |= skeleton_line_patches(kp, pairs, grid, cfg.include_invisible)
    return PatchSet.from_iterable(selected)


def select(kp: KeypointPrediction, grid: PatchGrid, cfg: SelectionConfig,
           pairs: SkeletonPairs | None = None) -> PatchSet:
    if cfg.method is Method.NONE:
        return PatchSet.full(grid)
    if cfg.method is Method.NEIGHBORS:
        return select_joint_patches(kp, grid, cfg.n, cfg.include_invisible)
    if pairs is None:
        pairs = default_skeleton()
    return select_skeleton_patches(kp, pairs, grid, cfg.n, cfg)


def patch_roles(kp: KeypointPrediction, grid: PatchGrid, cfg: SelectionConfig,
                pairs: SkeletonPairs | None = None) -> dict[int, str]:
    """Label each selected patch ``joint``, ``neighbor`` or ``skeleton``.

    A patch carrying several roles keeps the first in that order.
    """
    if cfg.method is Method.NONE:
        return {i: "joint" for i in range(grid.num_patches)}
    joints = set(select_joint_patches(kp, grid, 0, cfg.include_invisible))
    roles = {i: "joint" for i in joints}
    if cfg.method is Method.NEIGHBORS or cfg.include_joint_neighbors_in_skeleton:
        for i in select_joint_patches(kp, grid, cfg.n, cfg.include_invisible):
            roles.setdefault(i, "neighbor")
    if cfg.method is Method.SKELETON:
        if pairs is None:
            pairs = default_skeleton()
        for i in sorted(skeleton_line_patches(kp, pairs, grid, cfg.include_invisible)):
            roles.setdefault(i, "skeleton")
    return dict(sorted(roles.items()))
