import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import count_decoder_macs
from sparsepose.complexity import (
    MODELS,
    decoder_flops,
    effective_tokens,
    encoder_flops,
    pipeline_flops,
    tokens_for_encoder_flops,
)
from sparsepose.encoder import EncoderConfig
from sparsepose.grid import KeypointPrediction, PatchGrid
from sparsepose.selection import Method, SelectionConfig

VITB = MODELS["vitb"]
VITL = MODELS["vitl"]


def test_vitl_encoder_matches_table():
    rep = encoder_flops(VITL.encoder, 192)
    per_layer = 12 * 192 * 1024 ** 2 + 2 * 192 ** 2 * 1024
    assert rep.encoder_flops == 24 * per_layer
    assert abs(rep.encoder_flops / 59.8e9 - 1) < 0.02


def test_vitb_total_matches_table():
    rep = pipeline_flops(VITB, 192)
    assert abs(rep.encoder_flops / 17.0e9 - 1) < 0.01
    assert abs(rep.total_flops / 17.9e9 - 1) < 0.10


def test_report_identities():
    rep = pipeline_flops(VITB, 100)
    assert rep.encoder_flops == 12 * (rep.per_layer_attention_flops + rep.per_layer_ffn_flops)
    assert rep.total_flops == rep.embed_flops + rep.encoder_flops + rep.decoder_flops
    assert rep.embed_flops == 100 * 16 * 16 * 3 * 768


def test_single_token_quadratic_term():
    rep = encoder_flops(EncoderConfig(channels=768, layers=12, heads=12), 1)
    assert rep.per_layer_attention_flops - 4 * 768 ** 2 == 2 * 768


@given(st.integers(1, 2000))
def test_monotone_superlinear(n):
    cfg = VITL.encoder
    f = lambda k: encoder_flops(cfg, k).encoder_flops  # noqa: E731
    assert f(n + 1) > f(n)
    assert f(2 * n) > 2 * f(n)


def test_zero_tokens_rejected():
    with pytest.raises(ValueError):
        encoder_flops(VITB.encoder, 0)


def test_decoder_flops_vs_counting_oracle():
    g = PatchGrid(32, 32, 16)  # 2 x 2 featuremap
    assert decoder_flops(6, 5, g, 3) == count_decoder_macs(2, 2, 6, 5, 3)


def test_decoder_flops_scales_with_area():
    small = decoder_flops(64, 32, PatchGrid(128, 96, 16), 17)
    big = decoder_flops(64, 32, PatchGrid(256, 192, 16), 17)
    assert big == 4 * small


def test_decoder_flops_head_term_vanishes():
    g = PatchGrid(256, 192, 16)
    assert decoder_flops(64, 32, g, 0) == decoder_flops(64, 32, g, 17) - 64 * 48 * 32 * 17


def test_effective_tokens():
    g = PatchGrid(256, 192, 16)
    corpus = [KeypointPrediction.from_array([[10, 10], [100, 200]])]
    assert effective_tokens(corpus, SelectionConfig(Method.NONE), g) == 192
    crowded = KeypointPrediction.from_array([[(x * 48) % 192 + 8, (x // 4) * 56 + 8] for x in range(17)])
    assert effective_tokens([crowded], SelectionConfig(Method.NEIGHBORS, n=7), g) <= min(17 * 8, 192)
    with pytest.raises(ValueError):
        effective_tokens([], SelectionConfig(), g)


def test_effective_tokens_no_overlap_exact():
    # joints 9 patches apart on a wide strip: neighbourhoods cannot touch
    g = PatchGrid(16 * 9, 16 * 9 * 17, 16)
    kp = KeypointPrediction.from_array([[16 * (9 * i + 4) + 8, 16 * 4 + 8] for i in range(17)])
    assert effective_tokens([kp], SelectionConfig(Method.NEIGHBORS, n=7), g) == 136


def test_invert_table_neighbors_row():
    n = tokens_for_encoder_flops(VITL.encoder, 35.6e9)
    assert 110 <= n <= 125
    assert encoder_flops(VITL.encoder, round(n)).encoder_flops == pytest.approx(35.6e9, rel=0.01)


def test_reduction_ratio():
    dense = pipeline_flops(VITL, 192).total_flops
    for n in (1, 50, 116, 191):
        assert pipeline_flops(VITL, n).total_flops / dense < 1


def test_table_renders():
    text = pipeline_flops(VITB, 192).table()
    assert "encoder" in text and "G" in text
