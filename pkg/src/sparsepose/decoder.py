"""Zero-fill reassembly, deconvolution heatmap head, and heatmap targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import TokenSequence, trunc_normal
from .grid import KeypointPrediction, PatchGrid

KERNEL = 4
STRIDE = 2
PADDING = 1
BN_EPS = 1e-5
HEATMAP_STRIDE = 4  # input pixels per heatmap cell at 16-px patches


@dataclass
class DeconvBlock:
    kernel: np.ndarray  # Cin x Cout x 4 x 4
    bn_mean: np.ndarray
    bn_var: np.ndarray
    bn_scale: np.ndarray
    bn_offset: np.ndarray


@dataclass
class DecoderWeights:
    blocks: list[DeconvBlock]
    head_w: np.ndarray  # D x K
    head_b: np.ndarray

    @property
    def in_channels(self) -> int:
        return self.blocks[0].kernel.shape[0]

    @property
    def num_keypoints(self) -> int:
        return self.head_w.shape[1]


def init_decoder(in_channels: int, channels: int, num_keypoints: int, seed: int) -> DecoderWeights:
    """Two deconv blocks with inference-mode unit normalisation statistics."""
    rng = np.random.default_rng(seed)
    blocks = []
    cin = in_channels
    for _ in range(2):
        blocks.append(DeconvBlock(
            kernel=trunc_normal(rng, (cin, channels, KERNEL, KERNEL)),
            bn_mean=np.zeros(channels), bn_var=np.ones(channels),
            bn_scale=np.ones(channels), bn_offset=np.zeros(channels),
        ))
        cin = channels
    return DecoderWeights(blocks, trunc_normal(rng, (channels, num_keypoints)),
                          trunc_normal(rng, (num_keypoints,)))


def scatter_zero_fill(tokens: TokenSequence, grid: PatchGrid) -> np.ndarray:
    """Place each token at its grid cell; every other cell is exactly zero."""
    pos = tokens.positions
    if len(np.unique(pos)) != len(pos):
        raise ValueError("duplicate token positions")
    if pos.min() < 0 or pos.max() >= grid.num_patches:
        raise IndexError("token position outside the patch grid")
    fmap = np.zeros((grid.num_patches, tokens.features.shape[1]))
    fmap[pos] = tokens.features
    return fmap.reshape(grid.rows, grid.cols, -1)


def conv_transpose2d(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Stride-2, kernel-4, padding-1 transposed convolution on an H x W x Cin map."""
    h, w, cin = x.shape
    if kernel.shape[0] != cin:
        raise ValueError(f"deconv expects {kernel.shape[0]} input channels, got {cin}")
    cout = kernel.shape[1]
    # one GEMM for all taps, then scatter each tap onto the strided output
    flat_kernel = kernel.transpose(0, 2, 3, 1).reshape(cin, -1)
    taps = (x.reshape(h * w, cin) @ flat_kernel).reshape(h, w, KERNEL, KERNEL, cout)
    taps = np.ascontiguousarray(taps.transpose(2, 3, 0, 1, 4))
    full = np.zeros((STRIDE * (h - 1) + KERNEL, STRIDE * (w - 1) + KERNEL, cout))
    for ki in range(KERNEL):
        for kj in range(KERNEL):
            full[ki:ki + STRIDE * h:STRIDE, kj:kj + STRIDE * w:STRIDE] += taps[ki, kj]
    return full[PADDING:PADDING + STRIDE * h, PADDING:PADDING + STRIDE * w]


def deconv_block(x: np.ndarray, block: DeconvBlock) -> np.ndarray:
    y = conv_transpose2d(x, block.kernel)
    y = (y - block.bn_mean) / np.sqrt(block.bn_var + BN_EPS) * block.bn_scale + block.bn_offset
    return np.maximum(y, 0.0)


def decode_head(fmap: np.ndarray, weights: DecoderWeights, return_intermediate: bool = False):
    """rows x cols x C featuremap -> K x 4rows x 4cols heatmap."""
    if fmap.ndim != 3 or fmap.shape[2] != weights.in_channels:
        raise ValueError(f"featuremap shape {fmap.shape} does not match decoder "
                         f"input channels {weights.in_channels}")
    inter = []
    x = fmap
    for block in weights.blocks:
        x = deconv_block(x, block)
        inter.append(x)
    heat = (x @ weights.head_w + weights.head_b).transpose(2, 0, 1)
    return (heat, inter) if return_intermediate else heat


def gaussian_target(kp: KeypointPrediction, shape: tuple[int, int], sigma: float = 2.0,
                    stride: int = HEATMAP_STRIDE) -> np.ndarray:
    """K x h x w Gaussian heatmaps centred at pixel coordinates divided by ``stride``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((len(kp), h, w))
    for k, p in enumerate(kp):
        if not p.visible:
            continue
        cu, cv = p.x / stride, p.y / stride
        out[k] = np.exp(-((u - cu) ** 2 + (v - cv) ** 2) / (2 * sigma ** 2))
    return out


def decode_heatmap(heat: np.ndarray, stride: int = HEATMAP_STRIDE):
    """Argmax decode; ties go to the first cell in row-major order.

    Returns the keypoints (cell centres in input pixels) and per-channel
    peak values.
    """
    heat = np.asarray(heat, dtype=np.float64)
    if not np.isfinite(heat).all():
        raise ValueError("heatmap contains non-finite values")
    K, h, w = heat.shape
    flat = heat.reshape(K, -1)
    idx = flat.argmax(axis=1)
    rows, cols = np.divmod(idx, w)
    xy = np.stack([(cols + 0.5) * stride, (rows + 0.5) * stride], axis=1)
    return KeypointPrediction.from_array(xy), flat[np.arange(K), idx]
