"""``sparsepose`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .complexity import MODELS, effective_tokens, pipeline_flops
from .decoder import decode_heatmap, scatter_zero_fill
from .encoder import gather, init_weights, patch_embed, transformer_forward
from .grid import (
    KeypointPrediction,
    PatchGrid,
    PatchSet,
    load_keypoint_corpus,
    load_keypoints,
)
from .harness import (
    Pipeline,
    PipelineConfig,
    bench_sweep,
    noisy_oracle,
    render_overlay,
    rows_to_csv,
    run_pipeline,
    synth_pose,
)
from .metrics import evaluate
from .selection import Method, SelectionConfig, default_skeleton, load_pairs, select


def _read_json(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _read_image(path) -> np.ndarray:
    if Path(path).suffix.lower() in (".ppm", ".pgm", ".pnm"):
        return fileio.read_ppm(path)
    return fileio.read_tensor(path)


def _load_config(path) -> PipelineConfig:
    return PipelineConfig.from_dict(_read_json(path)) if path else PipelineConfig()


def _grid_args(p):
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=192)
    p.add_argument("--patch-size", type=int, default=16)


def _selection_args(p, default_method="neighbors"):
    p.add_argument("--method", choices=[m.value for m in Method], default=default_method)
    p.add_argument("--n", type=int, default=7, help="neighbouring patches per joint")
    p.add_argument("--no-skeleton-neighbors", action="store_true",
                   help="skeleton method: lines and joints only")
    p.add_argument("--include-invisible", action="store_true")
    p.add_argument("--pairs", help="JSON list of joint index pairs (default: COCO skeleton)")


def _selection_cfg(args) -> SelectionConfig:
    return SelectionConfig(method=args.method, n=args.n,
                           include_joint_neighbors_in_skeleton=not args.no_skeleton_neighbors,
                           include_invisible=args.include_invisible)


def _pairs(args):
    return load_pairs(args.pairs) if args.pairs else default_skeleton()


def _parse_n(spec: str) -> list[int]:
    """``a:b`` is inclusive; otherwise a comma-separated list."""
    if ":" in spec:
        lo, hi = (int(s) for s in spec.split(":"))
        return list(range(lo, hi + 1))
    return [int(s) for s in spec.split(",") if s]


def cmd_select(args) -> int:
    grid = PatchGrid(args.height, args.width, args.patch_size)
    kp = KeypointPrediction.from_json(_read_json(args.keypoints))
    sel = select(kp, grid, _selection_cfg(args), _pairs(args))
    _emit(json.dumps(list(sel.indices)) + "\n", args.out)
    return 0


def cmd_encode(args) -> int:
    cfg = _load_config(args.config)
    grid = cfg.grid
    image = _read_image(args.image)
    weights = init_weights(cfg.encoder, grid)
    full = patch_embed(image, grid, weights)
    sel = PatchSet.from_iterable(_read_json(args.select)) if args.select else PatchSet.full(grid)
    out = transformer_forward(gather(full, sel.check(grid)), weights, cfg.encoder)
    fileio.write_tensor(args.out, scatter_zero_fill(out, grid))
    return 0


def cmd_decode(args) -> int:
    heat = fileio.read_tensor(args.heatmap).transpose(2, 0, 1)
    kp, conf = decode_heatmap(heat, stride=args.stride)
    obj = kp.to_json()
    obj["scores"] = [float(c) for c in conf]
    _emit(_dumps(obj), args.out)
    return 0


def cmd_flops(args) -> int:
    model = MODELS[args.model]
    if args.tokens is not None:
        n = args.tokens
    elif args.keypoints:
        sel_cfg = SelectionConfig.from_dict(_read_json(args.select_config)) if args.select_config \
            else SelectionConfig()
        corpus = load_keypoint_corpus(args.keypoints)
        avg = effective_tokens(corpus, sel_cfg, model.grid, default_skeleton())
        n = max(1, round(avg))
    else:
        n = model.grid.num_patches
    report = pipeline_flops(model, n)
    print(f"model {args.model}", file=sys.stderr)
    print(report.table(), file=sys.stderr)
    _emit(_dumps({"model": args.model, **report.to_dict()}), args.out)
    return 0


def _load_instances(path):
    obj = _read_json(path)
    items = obj if isinstance(obj, list) else [obj]
    return [KeypointPrediction.from_json(o) for o in items], items


def cmd_metrics(args) -> int:
    preds, _ = _load_instances(args.pred)
    gts, raw = _load_instances(args.gt)
    scales = heads = None
    if args.scale is not None:
        scales = [args.scale] * len(gts)
    elif all(isinstance(r, dict) and "scale" in r for r in raw):
        scales = [float(r["scale"]) for r in raw]
    if args.head_size is not None:
        heads = [args.head_size] * len(gts)
    elif all(isinstance(r, dict) and "head_size" in r for r in raw):
        heads = [float(r["head_size"]) for r in raw]
    _emit(_dumps(evaluate(preds, gts, scales, heads, tau=args.tau)), args.out)
    return 0


def cmd_bench(args) -> int:
    rows = bench_sweep(_parse_n(args.n), samples=args.samples, noise=args.noise,
                       model=args.model, method=args.method, seed=args.seed,
                       timing=not args.no_timing)
    _emit(rows_to_csv(rows), args.out)
    if not args.no_figure and args.out and args.out != "-":
        from .plotting import plot_tradeoff

        figure = args.figure or str(Path(args.out).with_suffix(".png"))
        plot_tradeoff(rows, figure, title=f"{args.model} / {args.method}, noise {args.noise:g}px")
    return 0


def cmd_viz(args) -> int:
    grid = PatchGrid(args.height, args.width, args.patch_size)
    if args.image:
        image = _read_image(args.image)
        grid = PatchGrid(image.shape[0], image.shape[1], args.patch_size)
    else:
        image = np.full((grid.image_height, grid.image_width, 3), 0.5)
    kp = load_keypoints(args.keypoints)
    fileio.write_ppm(args.out, render_overlay(image, kp, _selection_cfg(args), grid, _pairs(args)))
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    image = _read_image(args.image)
    guide = load_keypoints(args.keypoints)
    res = run_pipeline(image, guide, cfg, Pipeline.build(cfg), _pairs(args))
    if args.heatmap_out:
        fileio.write_tensor(args.heatmap_out, res.heatmap.transpose(1, 2, 0))
    if args.figure:
        from .plotting import plot_heatmaps

        plot_heatmaps(image, res.heatmap, res.keypoints, args.figure, res.selection,
                      cfg.patch_size)
    obj = res.keypoints.to_json()
    obj["scores"] = [float(c) for c in res.confidence]
    obj["selection"] = list(res.selection.indices)
    obj["flops"] = res.flops.to_dict()
    _emit(_dumps(obj), args.out)
    return 0


def cmd_synth(args) -> int:
    grid = PatchGrid(args.height, args.width, args.patch_size)
    image, gt, _ = synth_pose(args.seed, grid, args.joints)
    fileio.write_ppm(args.image_out, image)
    Path(args.keypoints_out).write_text(_dumps(gt.to_json()))
    if args.guide_out:
        guide = noisy_oracle(gt, args.noise, args.seed, grid)
        Path(args.guide_out).write_text(_dumps(guide.to_json()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsepose",
                                     description="Patch-selected ViT pose estimation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="keypoints JSON -> selected flat patch indices")
    p.add_argument("--keypoints", default="-")
    _grid_args(p)
    _selection_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("encode", help="run the encoder on selected patches")
    p.add_argument("--config")
    p.add_argument("--select", help="JSON array of flat patch indices (default: all)")
    p.add_argument("--image", required=True, help="PPM or raw tensor file")
    p.add_argument("--out", required=True, help="zero-filled featuremap tensor file")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="heatmap tensor -> keypoint JSON")
    p.add_argument("--heatmap", required=True)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("flops", help="analytic compute report")
    p.add_argument("--model", choices=sorted(MODELS), default="vitb")
    p.add_argument("--tokens", type=int)
    p.add_argument("--select-config", help="JSON selection config")
    p.add_argument("--keypoints", help="keypoint corpus JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("metrics", help="OKS / AP / PCKh for paired keypoint files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--scale", type=float, help="object scale in pixels")
    p.add_argument("--head-size", type=float)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="neighbour-budget sweep on a synthetic corpus")
    p.add_argument("--n", default="0:16", help="inclusive range a:b or comma list")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--noise", type=float, default=6.0, help="guide noise sigma, pixels")
    p.add_argument("--model", choices=sorted(MODELS), default="toy")
    p.add_argument("--method", choices=["neighbors", "skeleton"], default="neighbors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true",
                   help="skip wall-clock measurement (byte-reproducible CSV)")
    p.add_argument("--out")
    p.add_argument("--figure", help="trade-off plot path (default: <out>.png)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("viz", help="patch-selection overlay as PPM")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--image")
    _grid_args(p)
    _selection_args(p, default_method="skeleton")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("run", help="full pipeline on one image")
    p.add_argument("--image", required=True)
    p.add_argument("--keypoints", required=True, help="guide keypoints JSON")
    p.add_argument("--config")
    p.add_argument("--pairs")
    p.add_argument("--heatmap-out")
    p.add_argument("--figure")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write a synthetic pose image and its keypoints")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--joints", type=int, default=17)
    _grid_args(p)
    p.add_argument("--noise", type=float, default=6.0)
    p.add_argument("--image-out", required=True)
    p.add_argument("--keypoints-out", required=True)
    p.add_argument("--guide-out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, IndexError, KeyError, FileNotFoundError) as exc:
        print(f"sparsepose {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
