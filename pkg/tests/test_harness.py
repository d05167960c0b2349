import numpy as np
import pytest

from sparsepose.grid import KeypointPrediction, PatchSet, flatten, to_patch_coord
from sparsepose.harness import (
    Pipeline,
    PipelineConfig,
    bench_sweep,
    dense_forward,
    joint_coverage,
    noisy_oracle,
    ROLE_COLORS,
    render_overlay,
    rows_to_csv,
    run_pipeline,
    synth_pose,
)
from sparsepose.rng import derive_seed, splitmix64
from sparsepose.selection import Method, SelectionConfig, default_skeleton, patch_roles, select


def test_splitmix_reference_values():
    # first outputs of the reference SplitMix64 stream seeded with 0
    state = 0
    outs = []
    for _ in range(2):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & (2 ** 64 - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]


def test_derive_seed_independent_keys():
    assert derive_seed(0, 1) != derive_seed(0, 2) != derive_seed(1, 1)
    assert derive_seed(5, 3, 4) == derive_seed(5, 3, 4)


def test_synth_pose(grid):
    img, kp, pairs = synth_pose(11, grid)
    img2, kp2, _ = synth_pose(11, grid)
    assert np.array_equal(img, img2) and kp == kp2
    assert img.shape == (256, 192, 3) and 0 <= img.min() and img.max() <= 1
    xy = kp.xy()
    assert (xy >= 0).all() and (xy[:, 0] < 192).all() and (xy[:, 1] < 256).all()
    assert len(kp) == 17 and pairs == default_skeleton()
    _, other, _ = synth_pose(12, grid)
    assert other != kp


def test_synth_chain(grid):
    _, kp, pairs = synth_pose(3, grid, K=5)
    assert len(kp) == 5 and len(pairs) == 4
    with pytest.raises(ValueError):
        synth_pose(0, grid, K=1)


def test_synth_joints_are_bright(grid):
    img, kp, _ = synth_pose(2, grid)
    for p in kp:
        assert img[int(p.y), int(p.x)].mean() > 0.5


def test_noisy_oracle_identity_and_bounds(grid):
    _, gt, _ = synth_pose(4, grid)
    assert noisy_oracle(gt, 0.0, 9, grid) == gt
    wild = noisy_oracle(gt, 500.0, 9, grid).xy()
    assert (wild >= 0).all() and (wild[:, 0] < 192).all() and (wild[:, 1] < 256).all()
    with pytest.raises(ValueError):
        noisy_oracle(gt, -1.0, 0, grid)


def test_noisy_oracle_keeps_invisible(grid):
    gt = KeypointPrediction.from_array([[50, 50], [60, 60]], visible=[True, False])
    out = noisy_oracle(gt, 5.0, 1, grid)
    assert out[1] == gt[1] and out[0] != gt[0]


def test_noisy_oracle_monte_carlo_std(grid):
    gt = KeypointPrediction.from_array([[96.0, 128.0]])
    draws = np.array([noisy_oracle(gt, 6.0, s, grid).xy()[0] for s in range(10_000)])
    std = (draws - [96.0, 128.0]).std(axis=0)
    assert np.all(np.abs(std / 6.0 - 1) < 0.05)


def test_coverage(grid):
    gt = KeypointPrediction.from_array([[8, 8], [100, 100]])
    idx = flatten(to_patch_coord((8, 8), grid), grid)
    assert joint_coverage(gt, PatchSet((idx,)), grid) == 0.5


def test_pipeline_method_none_is_dense(grid, toy_pipeline):
    img, gt, pairs = synth_pose(7, grid)
    cfg = PipelineConfig(selection=SelectionConfig(Method.NONE))
    res = run_pipeline(img, gt, cfg, toy_pipeline)
    assert np.array_equal(res.heatmap, dense_forward(img, toy_pipeline))
    assert res.flops.token_count == 192


def test_pipeline_token_count_and_zero_fill(grid, toy_pipeline):
    img, gt, pairs = synth_pose(8, grid)
    for n in (0, 3):
        cfg = PipelineConfig(selection=SelectionConfig(Method.NEIGHBORS, n=n))
        res = run_pipeline(img, gt, cfg, toy_pipeline)
        sel = select(gt, grid, cfg.selection)
        assert res.flops.token_count == len(sel) == len(res.selection)
        if n == 0:
            assert len(sel) <= 17
        mask = np.ones(192, bool)
        mask[list(sel)] = False
        assert not res.featuremap.reshape(192, -1)[mask].any()
        assert res.heatmap.shape == (17, 64, 48)


def test_saturated_neighbors_equals_none(grid, toy_pipeline):
    img, gt, _ = synth_pose(9, grid)
    big = run_pipeline(img, gt, PipelineConfig(selection=SelectionConfig(Method.NEIGHBORS, n=200)),
                       toy_pipeline)
    none = run_pipeline(img, gt, PipelineConfig(selection=SelectionConfig(Method.NONE)), toy_pipeline)
    assert np.array_equal(big.heatmap, none.heatmap)


def test_pipeline_deterministic(grid):
    img, gt, _ = synth_pose(10, grid)
    cfg = PipelineConfig(selection=SelectionConfig(Method.SKELETON, n=2))
    a = run_pipeline(img, gt, cfg)
    b = run_pipeline(img, gt, cfg)
    assert np.array_equal(a.heatmap, b.heatmap)


def test_pipeline_config_roundtrip():
    cfg = PipelineConfig(selection=SelectionConfig(Method.SKELETON, n=3), seed=4)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        PipelineConfig(height=250)


def test_bench_small(grid):
    rows = bench_sweep([0, 2, 4], samples=5, noise=0.0, timing=False)
    assert [r.n for r in rows] == [0, 2, 4]
    assert all(r.coverage == 1.0 for r in rows)
    assert rows[0].gflops < rows[1].gflops < rows[2].gflops
    assert all(np.isnan(r.wall_time_ms) for r in rows)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "n,avg_tokens,gflops,coverage,wall_time_ms"


def test_bench_timing_and_model(grid):
    rows = bench_sweep([1], samples=2, model="vitl", timing=True)
    assert rows[0].wall_time_ms > 0
    assert rows[0].gflops > 10


def test_bench_skeleton_costs_more():
    nb = bench_sweep([2], samples=10, method="neighbors", timing=False)[0]
    sk = bench_sweep([2], samples=10, method="skeleton", timing=False)[0]
    assert sk.avg_tokens >= nb.avg_tokens


def test_bench_needs_n():
    with pytest.raises(ValueError):
        bench_sweep([], samples=1)


def test_coverage_single_keypoint_tradeoff(grid):
    gt = KeypointPrediction.from_array([[100.0, 120.0]])
    guides = [noisy_oracle(gt, 20.0, s, grid) for s in range(50)]
    prev = (-1.0, -1.0)
    for n in range(0, 12):
        sel = [select(g, grid, SelectionConfig(Method.NEIGHBORS, n=n)) for g in guides]
        cov = np.mean([joint_coverage(gt, s, grid) for s in sel])
        gfl = np.mean([len(s) for s in sel])
        assert cov >= prev[0] and gfl >= prev[1]
        prev = (cov, gfl)


def test_render_overlay(grid):
    img, kp, pairs = synth_pose(5, grid)
    for method, n in (("neighbors", 0), ("neighbors", 4), ("skeleton", 2)):
        cfg = SelectionConfig(method, n=n)
        out = render_overlay(img, kp, cfg, grid, pairs)
        assert out.shape == img.shape and out.dtype == np.uint8
        roles = patch_roles(kp, grid, cfg, pairs)
        assert set(roles) == set(select(kp, grid, cfg, pairs))
        if n == 0 and method == "neighbors":
            assert set(roles.values()) == {"joint"}
        for idx in range(grid.num_patches):
            y, x = divmod(idx, grid.cols)
            cy, cx = y * 16 + 8, x * 16 + 8
            px = img[cy, cx]
            if idx in roles:
                px = 0.45 * px + 0.55 * np.array(ROLE_COLORS[roles[idx]]) / 255
            np.testing.assert_array_equal(out[cy, cx], np.round(px * 255).astype(np.uint8))
