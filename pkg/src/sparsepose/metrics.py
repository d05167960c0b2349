"""Single-instance keypoint accuracy: OKS, OKS-based AP, and PCKh."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .grid import KeypointPrediction

AP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def coco_sigmas() -> np.ndarray:
    text = resources.files("sparsepose.data").joinpath("coco_sigmas.json").read_text()
    return np.array(json.loads(text)["sigmas"])


@dataclass(frozen=True)
class OksParams:
    falloff: tuple[float, ...]
    scale: float

    def __post_init__(self):
        if self.scale <= 0 or any(k <= 0 for k in self.falloff):
            raise ValueError("OKS falloff constants and object scale must be positive")


def _distances(pred: KeypointPrediction, gt: KeypointPrediction) -> tuple[np.ndarray, np.ndarray]:
    if len(pred) != len(gt):
        raise ValueError(f"keypoint count mismatch: {len(pred)} vs {len(gt)}")
    vis = gt.visibility()
    if not vis.any():
        raise ValueError("ground truth has no visible keypoints")
    d = np.linalg.norm(pred.xy() - gt.xy(), axis=1)
    return d[vis], vis


def oks(pred: KeypointPrediction, gt: KeypointPrediction, params: OksParams) -> float:
    d, vis = _distances(pred, gt)
    k = np.asarray(params.falloff, dtype=np.float64)
    if len(k) != len(gt):
        raise ValueError(f"{len(k)} falloff constants for {len(gt)} keypoints")
    e = d ** 2 / (2 * params.scale ** 2 * k[vis] ** 2)
    return float(np.mean(np.exp(-e)))


def pckh(pred: KeypointPrediction, gt: KeypointPrediction, head_size: float,
         tau: float = 0.5) -> float:
    """Percentage of visible joints within ``tau * head_size`` (boundary inclusive)."""
    if head_size <= 0:
        raise ValueError("head_size must be positive")
    d, _ = _distances(pred, gt)
    return 100.0 * float(np.mean(d <= tau * head_size))


def average_precision(scores: Sequence[float], thresholds: Sequence[float] = AP_THRESHOLDS) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no OKS scores")
    return float(np.mean([np.mean(scores >= t) for t in thresholds]))


def bbox_scale(gt: KeypointPrediction) -> float:
    """Square root of the visible keypoints' bounding-box area."""
    xy = gt.xy()[gt.visibility()]
    w, h = np.ptp(xy, axis=0) if len(xy) else (0.0, 0.0)
    return float(np.sqrt(max(w * h, 1.0)))


def evaluate(preds: Sequence[KeypointPrediction], gts: Sequence[KeypointPrediction],
             scales: Sequence[float] | None = None, head_sizes: Sequence[float] | None = None,
             falloff: Sequence[float] | None = None, tau: float = 0.5) -> dict:
    if len(preds) != len(gts) or not preds:
        raise ValueError("need equal, non-zero numbers of predictions and ground truths")
    if scales is None:
        scales = [bbox_scale(g) for g in gts]
    if head_sizes is None:
        head_sizes = [s / 4 for s in scales]
    scores, pck = [], []
    for p, g, s, hs in zip(preds, gts, scales, head_sizes):
        if falloff is not None:
            k = falloff
        elif len(g) == 17:
            k = coco_sigmas()
        else:
            raise ValueError(f"no default OKS constants for K={len(g)}; pass falloff")
        scores.append(oks(p, g, OksParams(tuple(k), s)))
        pck.append(pckh(p, g, hs, tau))
    return {
        "oks_mean": float(np.mean(scores)),
        "ap": average_precision(scores),
        "pckh": float(np.mean(pck)),
    }
