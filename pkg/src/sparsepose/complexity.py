"""Analytic multiply-accumulate counts for dense and patch-selected pipelines.

One multiply-accumulate is counted as one FLOP. Normalisation, softmax and
activation costs are left out.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .decoder import KERNEL
from .encoder import EncoderConfig
from .grid import KeypointPrediction, PatchGrid
from .selection import SelectionConfig, SkeletonPairs, select


@dataclass(frozen=True)
class ModelSpec:
    encoder: EncoderConfig
    decoder_channels: int
    num_keypoints: int = 17
    image_height: int = 256
    image_width: int = 192

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.image_height, self.image_width, self.encoder.patch_size)


MODELS = {
    "toy": ModelSpec(EncoderConfig(channels=64, layers=4, heads=4), decoder_channels=32),
    "vitb": ModelSpec(EncoderConfig(channels=768, layers=12, heads=12), decoder_channels=256),
    "vitl": ModelSpec(EncoderConfig(channels=1024, layers=24, heads=16), decoder_channels=256),
}


@dataclass(frozen=True)
class FlopReport:
    token_count: int
    embed_flops: int
    per_layer_attention_flops: int
    per_layer_ffn_flops: int
    encoder_flops: int
    decoder_flops: int
    total_flops: int

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("tokens", f"{self.token_count}"),
            ("embed", _g(self.embed_flops)),
            ("attention / layer", _g(self.per_layer_attention_flops)),
            ("ffn / layer", _g(self.per_layer_ffn_flops)),
            ("encoder", _g(self.encoder_flops)),
            ("decoder", _g(self.decoder_flops)),
            ("total", _g(self.total_flops)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>12}" for k, v in rows)


def _g(x: int) -> str:
    return f"{x / 1e9:.3f} G"


def attention_flops(channels: int, n_tokens: int) -> int:
    # q/k/v/out projections + score and aggregation products
    return 4 * n_tokens * channels ** 2 + 2 * n_tokens ** 2 * channels


def ffn_flops(channels: int, n_tokens: int, mlp_ratio: int) -> int:
    return 2 * mlp_ratio * n_tokens * channels ** 2


def encoder_flops(cfg: EncoderConfig, n_tokens: int, decoder: int = 0) -> FlopReport:
    """Embedding and transformer cost for ``n_tokens`` tokens.

    ``decoder`` is added to the total unchanged; see :func:`decoder_flops`.
    """
    if n_tokens < 1:
        raise ValueError("need at least one token")
    C = cfg.channels
    attn = attention_flops(C, n_tokens)
    mlp = ffn_flops(C, n_tokens, cfg.mlp_ratio)
    embed = n_tokens * cfg.patch_size ** 2 * 3 * C
    enc = cfg.layers * (attn + mlp)
    return FlopReport(n_tokens, embed, attn, mlp, enc, decoder, embed + enc + decoder)


def deconv_flops(in_h: int, in_w: int, cin: int, cout: int, kernel: int = KERNEL) -> int:
    # every input cell scatters a k x k x cin x cout stencil
    return in_h * in_w * cin * cout * kernel * kernel


def decoder_flops(in_channels: int, channels: int, grid: PatchGrid, num_keypoints: int) -> int:
    """Two deconv blocks plus the 1x1 head, over the dense featuremap."""
    h, w = grid.rows, grid.cols
    total = deconv_flops(h, w, in_channels, channels)
    total += deconv_flops(2 * h, 2 * w, channels, channels)
    total += 4 * h * 4 * w * channels * num_keypoints
    return total


def pipeline_flops(model: ModelSpec, n_tokens: int) -> FlopReport:
    dec = decoder_flops(model.encoder.channels, model.decoder_channels, model.grid,
                        model.num_keypoints)
    return encoder_flops(model.encoder, n_tokens, decoder=dec)


def effective_tokens(corpus: Sequence[KeypointPrediction], cfg: SelectionConfig,
                     grid: PatchGrid, pairs: SkeletonPairs | None = None) -> float:
    if not corpus:
        raise ValueError("empty keypoint corpus")
    return sum(len(select(kp, grid, cfg, pairs)) for kp in corpus) / len(corpus)


def tokens_for_encoder_flops(cfg: EncoderConfig, target: float) -> float:
    """Real token count at which the encoder costs ``target`` MACs."""
    C, L = cfg.channels, cfg.layers
    a = 2 * C * L
    b = (4 + 2 * cfg.mlp_ratio) * C * C * L
    return (-b + math.sqrt(b * b + 4 * a * target)) / (2 * a)
