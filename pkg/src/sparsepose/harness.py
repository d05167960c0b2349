"""End-to-end pipeline, synthetic poses, the noisy guide, and the n-sweep."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .complexity import MODELS, FlopReport, ModelSpec, pipeline_flops
from .decoder import (
    DecoderWeights,
    decode_head,
    decode_heatmap,
    init_decoder,
    scatter_zero_fill,
)
from .encoder import (
    EncoderConfig,
    EncoderWeights,
    gather,
    init_weights,
    patch_embed,
    transformer_forward,
)
from .grid import (
    KeypointPrediction,
    PatchCoord,
    PatchGrid,
    PatchSet,
    SkeletonPairs,
    flatten,
    to_patch_coord,
)
from .selection import Method, SelectionConfig, bresenham, default_skeleton, patch_roles, select


@dataclass(frozen=True)
class PipelineConfig:
    height: int = 256
    width: int = 192
    patch_size: int = 16
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    decoder_channels: int = 32
    num_keypoints: int = 17
    sigma: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.encoder.patch_size != self.patch_size:
            raise ValueError("encoder patch size must match the grid patch size")
        self.grid  # validates dims

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.height, self.width, self.patch_size)

    def to_dict(self) -> dict:
        return {
            "height": self.height, "width": self.width, "patch_size": self.patch_size,
            "encoder": self.encoder.to_dict(), "selection": self.selection.to_dict(),
            "decoder_channels": self.decoder_channels, "num_keypoints": self.num_keypoints,
            "sigma": self.sigma, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        d = dict(d)
        patch = d.get("patch_size", 16)
        enc = dict(d.pop("encoder", {}))
        enc.setdefault("patch_size", patch)
        d["encoder"] = EncoderConfig.from_dict(enc)
        d["selection"] = SelectionConfig.from_dict(d.pop("selection", {}))
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.encoder, self.decoder_channels, self.num_keypoints,
                         self.height, self.width)


@dataclass
class Pipeline:
    cfg: PipelineConfig
    encoder: EncoderWeights
    decoder: DecoderWeights

    @classmethod
    def build(cls, cfg: PipelineConfig) -> Pipeline:
        return cls(cfg, init_weights(cfg.encoder, cfg.grid),
                   init_decoder(cfg.encoder.channels, cfg.decoder_channels,
                                cfg.num_keypoints, rngmod.derive_seed(cfg.seed, 3)))


@dataclass
class PipelineResult:
    heatmap: np.ndarray
    keypoints: KeypointPrediction
    confidence: np.ndarray
    flops: FlopReport
    selection: PatchSet
    featuremap: np.ndarray


def run_pipeline(image: np.ndarray, guide: KeypointPrediction, cfg: PipelineConfig,
                 pipeline: Pipeline | None = None,
                 pairs: SkeletonPairs | None = None) -> PipelineResult:
    """select -> embed -> gather -> encode -> zero-fill -> decode -> argmax."""
    pipeline = pipeline or Pipeline.build(cfg)
    grid = cfg.grid
    sel = select(guide, grid, cfg.selection, pairs)
    tokens = gather(patch_embed(image, grid, pipeline.encoder), sel)
    out = transformer_forward(tokens, pipeline.encoder, cfg.encoder)
    fmap = scatter_zero_fill(out, grid)
    heat = decode_head(fmap, pipeline.decoder)
    kp, conf = decode_heatmap(heat, stride=cfg.patch_size // 4)
    return PipelineResult(heat, kp, conf, pipeline_flops(cfg.model, len(sel)), sel, fmap)


def dense_forward(image: np.ndarray, pipeline: Pipeline) -> np.ndarray:
    """Reference heatmap with no selection step at all."""
    cfg = pipeline.cfg
    tokens = patch_embed(image, cfg.grid, pipeline.encoder)
    out = transformer_forward(tokens, pipeline.encoder, cfg.encoder)
    fmap = out.features.reshape(cfg.grid.rows, cfg.grid.cols, -1)
    return decode_head(fmap, pipeline.decoder)


# -- synthetic data ---------------------------------------------------------

def _fit_into_frame(xy: np.ndarray, grid: PatchGrid, gen: np.random.Generator,
                    margin: float = 2.0) -> np.ndarray:
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    room = np.array([grid.image_width, grid.image_height], dtype=np.float64) - 2 * margin - 1
    scale = min(1.0, float(np.min(room / span)))
    xy = (xy - lo) * scale
    slack = room - (hi - lo) * scale
    return xy + margin + gen.uniform(0, 1, size=2) * slack


def _coco_figure(gen: np.random.Generator, height: float) -> np.ndarray:
    """17 COCO joints of a randomly articulated stick figure, y pointing down."""
    def unit(theta):  # angle measured from straight down
        return np.array([math.sin(theta), math.cos(theta)])

    lean = gen.uniform(-0.15, 0.15)
    up = -unit(lean)
    side = np.array([-up[1], up[0]])  # figure's left, image right
    mid_hip = np.zeros(2)
    mid_sh = mid_hip + 0.30 * up
    j = np.zeros((17, 2))
    j[5], j[6] = mid_sh + 0.11 * side, mid_sh - 0.11 * side
    j[11], j[12] = mid_hip + 0.09 * side, mid_hip - 0.09 * side
    head_dir = -unit(lean + gen.uniform(-0.25, 0.25))
    j[0] = mid_sh + 0.13 * head_dir
    j[1], j[2] = j[0] + [0.025, -0.02], j[0] + [-0.025, -0.02]
    j[3], j[4] = j[0] + [0.05, -0.005], j[0] + [-0.05, -0.005]
    for sign, sh, el, wr in ((1, 5, 7, 9), (-1, 6, 8, 10)):
        a = gen.uniform(-0.3, 2.6)
        b = a + gen.uniform(-0.3, 1.8)
        j[el] = j[sh] + 0.16 * unit(sign * a)
        j[wr] = j[el] + 0.14 * unit(sign * b)
    for sign, hp, kn, an in ((1, 11, 13, 15), (-1, 12, 14, 16)):
        a = gen.uniform(-0.2, 0.6)
        b = a - gen.uniform(0.0, 0.8)
        j[kn] = j[hp] + 0.24 * unit(sign * a)
        j[an] = j[kn] + 0.24 * unit(sign * b)
    return j * height


def _chain_figure(gen: np.random.Generator, K: int, height: float) -> np.ndarray:
    step = height / K
    heading = gen.uniform(0, 2 * math.pi)
    pts = [np.zeros(2)]
    for _ in range(K - 1):
        heading += gen.uniform(-0.8, 0.8)
        pts.append(pts[-1] + gen.uniform(0.6, 1.0) * step * np.array([math.cos(heading), math.sin(heading)]))
    return np.array(pts)


def _draw_line(img: np.ndarray, a, b, value: float, width: int = 1) -> None:
    h, w = img.shape[:2]
    p0 = PatchCoord(int(round(a[0])), int(round(a[1])))
    p1 = PatchCoord(int(round(b[0])), int(round(b[1])))
    for x, y in bresenham(p0, p1):
        img[max(y - width, 0):min(y + width + 1, h), max(x - width, 0):min(x + width + 1, w)] = value


def synth_pose(seed: int, grid: PatchGrid, K: int = 17):
    """Noise image with a rendered stick figure, its keypoints and limb pairs."""
    if K < 2:
        raise ValueError("a synthetic pose needs at least two joints")
    gen = rngmod.generator(seed, rngmod.STREAM_POSE)
    body = gen.uniform(0.55, 0.9) * grid.image_height
    if K == 17:
        xy = _coco_figure(gen, body)
        pairs = default_skeleton()
    else:
        xy = _chain_figure(gen, K, body)
        pairs = SkeletonPairs(tuple((i, i + 1) for i in range(K - 1)))
    xy = _fit_into_frame(xy, grid, gen)

    H, W = grid.image_height, grid.image_width
    img = gen.uniform(0.0, 0.15, size=(H, W, 3))
    tone = gen.uniform(0.6, 0.9, size=3)
    for a, b in pairs:
        _draw_line(img, xy[a], xy[b], 1.0, width=1)
    img *= np.where(img == 1.0, tone, 1.0)
    vv, uu = np.mgrid[0:H, 0:W]
    for x, y in xy:
        img += 0.8 * np.exp(-((uu - x) ** 2 + (vv - y) ** 2) / (2 * 2.5 ** 2))[..., None]
    return np.clip(img, 0.0, 1.0), KeypointPrediction.from_array(xy), pairs


def noisy_oracle(gt: KeypointPrediction, sigma_noise: float, seed: int,
                 grid: PatchGrid) -> KeypointPrediction:
    """Ground truth plus isotropic Gaussian pixel noise, clamped to the frame.

    Stands in for a cheap, inaccurate pose network. Invisible joints pass
    through untouched.
    """
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be non-negative")
    gen = rngmod.generator(seed, rngmod.STREAM_GUIDE)
    xy = gt.xy()
    vis = gt.visibility()
    noise = gen.normal(0.0, 1.0, size=xy.shape) * sigma_noise
    out = np.where(vis[:, None], xy + noise, xy)
    out[:, 0] = np.clip(out[:, 0], 0.0, np.nextafter(grid.image_width, 0))
    out[:, 1] = np.clip(out[:, 1], 0.0, np.nextafter(grid.image_height, 0))
    return KeypointPrediction.from_array(out, vis)


def joint_coverage(gt: KeypointPrediction, sel: PatchSet, grid: PatchGrid) -> float:
    """Fraction of distinct ground-truth joint patches present in ``sel``."""
    joints = {flatten(to_patch_coord((p.x, p.y), grid), grid) for p in gt if p.visible}
    if not joints:
        return 1.0
    chosen = set(sel.indices)
    return len(joints & chosen) / len(joints)


# -- benchmark --------------------------------------------------------------

BENCH_COLUMNS = ("n", "avg_tokens", "gflops", "coverage", "wall_time_ms")


@dataclass(frozen=True)
class BenchRow:
    n: int
    avg_tokens: float
    gflops: float
    coverage: float
    wall_time_ms: float


def make_corpus(samples: int, grid: PatchGrid, noise: float, seed: int, K: int = 17):
    corpus = []
    for i in range(samples):
        item_seed = rngmod.derive_seed(seed, i)
        image, gt, pairs = synth_pose(item_seed, grid, K)
        guide = noisy_oracle(gt, noise, item_seed, grid)
        corpus.append((image, gt, guide, pairs))
    return corpus


def _resize_model(spec: ModelSpec, grid: PatchGrid) -> ModelSpec:
    enc = EncoderConfig(**{**spec.encoder.to_dict(), "patch_size": grid.patch_size})
    return ModelSpec(enc, spec.decoder_channels, spec.num_keypoints,
                     grid.image_height, grid.image_width)


def bench_sweep(n_values: Sequence[int], samples: int = 100, noise: float = 6.0,
                model: str = "toy", method: str | Method = Method.NEIGHBORS, seed: int = 0,
                timing: bool = True, height: int = 256, width: int = 192,
                patch_size: int = 16, corpus=None) -> list[BenchRow]:
    """Token count, compute and guide coverage for each neighbour budget.

    GFLOPs come from the analytic count of ``model``; wall time is measured
    on the toy pipeline, which is the only size this package executes.
    """
    n_values = list(n_values)
    if not n_values:
        raise ValueError("need at least one n value")
    grid = PatchGrid(height, width, patch_size)
    spec = _resize_model(MODELS[model], grid)
    if corpus is None:
        corpus = make_corpus(samples, grid, noise, seed)
    toy = _resize_model(MODELS["toy"], grid)
    pipe_cfg = PipelineConfig(height, width, patch_size, toy.encoder,
                              decoder_channels=toy.decoder_channels, seed=seed)
    pipeline = Pipeline.build(pipe_cfg) if timing else None

    rows = []
    for n in n_values:
        sel_cfg = SelectionConfig(method=method, n=n)
        tokens, flops, cover, elapsed = [], [], [], []
        for image, gt, guide, pairs in corpus:
            sel = select(guide, grid, sel_cfg, pairs)
            tokens.append(len(sel))
            flops.append(pipeline_flops(spec, len(sel)).total_flops / 1e9)
            cover.append(joint_coverage(gt, sel, grid))
            if timing:
                cfg = PipelineConfig(height, width, patch_size, pipe_cfg.encoder, sel_cfg,
                                     pipe_cfg.decoder_channels, seed=seed)
                t0 = time.perf_counter()
                run_pipeline(image, guide, cfg, pipeline, pairs)
                elapsed.append((time.perf_counter() - t0) * 1e3)
        rows.append(BenchRow(n, float(np.mean(tokens)), float(np.mean(flops)),
                             float(np.mean(cover)),
                             float(np.mean(elapsed)) if timing else float("nan")))
    return rows


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in rows:
        writer.writerow([r.n, f"{r.avg_tokens:.4f}", f"{r.gflops:.6f}", f"{r.coverage:.6f}",
                         "nan" if math.isnan(r.wall_time_ms) else f"{r.wall_time_ms:.3f}"])
    return buf.getvalue()


# -- visualisation ----------------------------------------------------------

ROLE_COLORS = {
    "joint": (230, 40, 40),
    "neighbor": (255, 150, 0),
    "skeleton": (40, 90, 230),
}


def render_overlay(image: np.ndarray, kp: KeypointPrediction, cfg: SelectionConfig,
                   grid: PatchGrid, pairs: SkeletonPairs | None = None,
                   alpha: float = 0.55) -> np.ndarray:
    """uint8 copy of ``image`` with the patch grid and colour-coded selection.

    Grid lines run along each patch's top row and left column, so patch
    centres show only the selection tint.
    """
    base = np.asarray(image, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat(base[..., None], 3, axis=2)
    if base.shape[:2] != (grid.image_height, grid.image_width):
        raise ValueError("image does not match grid")
    out = base.copy()
    P = grid.patch_size
    for idx, role in patch_roles(kp, grid, cfg, pairs).items():
        y, x = divmod(idx, grid.cols)
        color = np.array(ROLE_COLORS[role]) / 255.0
        cell = out[y * P:(y + 1) * P, x * P:(x + 1) * P]
        cell[:] = (1 - alpha) * cell + alpha * color
    out[::P, :, :] *= 0.5
    out[:, ::P, :] *= 0.5
    return np.round(np.clip(out, 0, 1) * 255).astype(np.uint8)
