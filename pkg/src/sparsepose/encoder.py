"""Toy-scale ViT encoder that attends over a subset of patch tokens.

Patch embedding runs over the full image; the transformer stack only
sees the gathered tokens. Every token keeps the positional code of its
original grid cell, so dropping tokens does not shift geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .grid import PatchGrid, PatchSet

LN_EPS = 1e-6
INIT_STD = 0.02


@dataclass(frozen=True)
class EncoderConfig:
    channels: int = 64
    layers: int = 4
    heads: int = 4
    mlp_ratio: int = 4
    patch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("encoder needs at least one layer")
        if self.heads < 1 or self.channels % self.heads:
            raise ValueError(f"channels={self.channels} not divisible by heads={self.heads}")
        if self.mlp_ratio < 1:
            raise ValueError("mlp_ratio must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> EncoderConfig:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class TokenSequence:
    """``features[i]`` is the token living at flat patch ``positions[i]``."""

    features: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.positions):
            raise ValueError("features must be N x C with one position per row")
        if len(self.positions) == 0:
            raise ValueError("token sequence is empty")

    def __len__(self):
        return len(self.positions)


@dataclass
class LayerWeights:
    ln1_scale: np.ndarray
    ln1_offset: np.ndarray
    w_qkv: np.ndarray  # C x 3C, columns ordered query | key | value
    b_qkv: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    ln2_scale: np.ndarray
    ln2_offset: np.ndarray
    w_fc1: np.ndarray
    b_fc1: np.ndarray
    w_fc2: np.ndarray
    b_fc2: np.ndarray


@dataclass
class EncoderWeights:
    patch_proj: np.ndarray  # (P*P*3) x C
    patch_bias: np.ndarray
    pos_table: np.ndarray  # (rows*cols) x C
    layers: list[LayerWeights] = field(default_factory=list)


def trunc_normal(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) truncated at two standard deviations by resampling."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def _sincos_1d(dim: int, pos: np.ndarray) -> np.ndarray:
    omega = 1.0 / 10000 ** (np.arange(dim // 2, dtype=np.float64) / (dim / 2.0))
    angles = np.outer(pos.astype(np.float64), omega)
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def sincos_pos_table(channels: int, grid: PatchGrid) -> np.ndarray:
    """Fixed 2-D sinusoidal codes; first half encodes the row, second the column."""
    if channels % 4:
        raise ValueError(f"sinusoidal codes need channels divisible by 4, got {channels}")
    ys, xs = np.divmod(np.arange(grid.num_patches), grid.cols)
    return np.concatenate([_sincos_1d(channels // 2, ys), _sincos_1d(channels // 2, xs)], axis=1)


def init_weights(cfg: EncoderConfig, grid: PatchGrid) -> EncoderWeights:
    if cfg.patch_size != grid.patch_size:
        raise ValueError(f"encoder patch size {cfg.patch_size} != grid patch size {grid.patch_size}")
    rng = np.random.default_rng(cfg.seed)
    C, hidden = cfg.channels, cfg.channels * cfg.mlp_ratio
    patch_dim = cfg.patch_size * cfg.patch_size * 3
    weights = EncoderWeights(
        patch_proj=trunc_normal(rng, (patch_dim, C)),
        patch_bias=np.zeros(C),
        pos_table=sincos_pos_table(C, grid),
    )
    for _ in range(cfg.layers):
        weights.layers.append(LayerWeights(
            ln1_scale=np.ones(C), ln1_offset=np.zeros(C),
            w_qkv=trunc_normal(rng, (C, 3 * C)), b_qkv=np.zeros(3 * C),
            w_out=trunc_normal(rng, (C, C)), b_out=np.zeros(C),
            ln2_scale=np.ones(C), ln2_offset=np.zeros(C),
            w_fc1=trunc_normal(rng, (C, hidden)), b_fc1=np.zeros(hidden),
            w_fc2=trunc_normal(rng, (hidden, C)), b_fc2=np.zeros(C),
        ))
    return weights


def patchify(image: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """H x W x 3 image -> (rows*cols) x (P*P*3), row-major over patches."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (grid.image_height, grid.image_width, 3):
        raise ValueError(f"image shape {image.shape} does not match grid "
                         f"{grid.image_height}x{grid.image_width}x3")
    P = grid.patch_size
    x = image.reshape(grid.rows, P, grid.cols, P, 3).transpose(0, 2, 1, 3, 4)
    return x.reshape(grid.num_patches, P * P * 3)


def patch_embed(image: np.ndarray, grid: PatchGrid, weights: EncoderWeights) -> TokenSequence:
    feats = patchify(image, grid) @ weights.patch_proj + weights.patch_bias + weights.pos_table
    return TokenSequence(feats, np.arange(grid.num_patches))


def gather(full: TokenSequence, sel: PatchSet) -> TokenSequence:
    idx = np.searchsorted(full.positions, sel.to_array())
    idx = np.clip(idx, 0, len(full) - 1)
    if len(sel) == 0 or not np.array_equal(full.positions[idx], sel.to_array()):
        missing = sorted(set(sel.indices) - set(full.positions.tolist()))
        raise KeyError(f"selected patches not present in token sequence: {missing[:10]}")
    return TokenSequence(full.features[idx], full.positions[idx])


def layer_norm(x: np.ndarray, scale: np.ndarray, offset: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * scale + offset


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _qkv(x: np.ndarray, lw: LayerWeights, heads: int) -> np.ndarray:
    N, C = x.shape
    return (x @ lw.w_qkv + lw.b_qkv).reshape(N, 3, heads, C // heads).transpose(1, 2, 0, 3)


def attention_weights(x: np.ndarray, lw: LayerWeights, heads: int) -> np.ndarray:
    """Per-head softmax attention matrices, shape heads x N x N."""
    q, k, _ = _qkv(x, lw, heads)
    return softmax(q @ k.transpose(0, 2, 1) / np.sqrt(q.shape[-1]))


def mhsa(x: np.ndarray, lw: LayerWeights, heads: int) -> np.ndarray:
    N, C = x.shape
    q, k, v = _qkv(x, lw, heads)
    attn = softmax(q @ k.transpose(0, 2, 1) / np.sqrt(q.shape[-1]))
    out = (attn @ v).transpose(1, 0, 2).reshape(N, C)
    return out @ lw.w_out + lw.b_out


def ffn(x: np.ndarray, lw: LayerWeights) -> np.ndarray:
    return gelu(x @ lw.w_fc1 + lw.b_fc1) @ lw.w_fc2 + lw.b_fc2


def transformer_forward(tokens: TokenSequence, weights: EncoderWeights,
                        cfg: EncoderConfig) -> TokenSequence:
    """Run the pre-norm transformer stack over whichever tokens are present."""
    if len(weights.layers) != cfg.layers:
        raise ValueError(f"weights hold {len(weights.layers)} layers, config says {cfg.layers}")
    x = tokens.features
    if not np.isfinite(x).all():
        raise FloatingPointError("non-finite token features at encoder input")
    for i, lw in enumerate(weights.layers):
        x = x + mhsa(layer_norm(x, lw.ln1_scale, lw.ln1_offset), lw, cfg.heads)
        x = x + ffn(layer_norm(x, lw.ln2_scale, lw.ln2_offset), lw)
        if not np.isfinite(x).all():
            raise FloatingPointError(f"non-finite activations after encoder layer {i}")
    return TokenSequence(x, tokens.positions.copy())
