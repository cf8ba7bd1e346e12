"""Command-line surface tying the pipeline together.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .checks import run_gradchecks
from .config import resolve_config
from .decouple import (DecoupledFeatures, decouple_all, decouple_all_pairs,
                       dynamic_heatmap, select_references)
from .errors import DS4DError
from .features import FeatureSet, extract_feature_set
from .metrics import MetricReport
from .points import GaussianPointSet
from .render import splat_render
from .scene import SceneSpec, default_cameras, generate_scene, render_dataset
from .train import (TrainConfig, checkpoint_arrays, evaluate, model_forward,
                    model_from_checkpoint, prepare_features, run_ablation,
                    train_full)
from .visualize import export_heatmap, export_scoremap

PRESETS = {"oscillate": "oscillation", "swing": "swing", "occlusion": "occlusion"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="ds4d", description="Video-to-4D reconstruction on synthetic scenes")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="oscillate")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--train-views", type=int, default=4)
    p.add_argument("--holdout-views", type=int, default=2)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--fraction-static", type=float, default=0.6)
    p.add_argument("--amplitude", type=float, default=0.3)

    p = sub.add_parser("extract", help="extract frame features to a .ftr file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patches", type=int, default=8)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--views", type=int, default=0, help="first N views only (0 = all)")

    p = sub.add_parser("decouple", help="decouple a .ftr file against references")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["mid", "avg", "concat-both"], default="concat-both")
    p.add_argument("--combine", choices=["concat", "sum"], default="concat")
    p.add_argument("--granularity", choices=["token", "flat"], default="token")

    p = sub.add_parser("bench-decouple", help="time reference vs pairwise decoupling")
    p.add_argument("--t", type=int, default=30)
    p.add_argument("--v", type=int, default=6)
    p.add_argument("--p", type=int, default=256, help="token count per frame")
    p.add_argument("--d", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="key=value")

    p = sub.add_parser("render", help="render one frame from a trained run")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--time", type=int, required=True)
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scoremap", default=None,
                   help="also write the fusion score map for this view (PGM)")

    p = sub.add_parser("eval", help="evaluate a trained run on held-out views")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--views", default=None, help="comma-separated view indices")

    p = sub.add_parser("heatmap", help="export a dynamic-feature heatmap")
    p.add_argument("--features", required=True, help="decoupled .ftr file")
    p.add_argument("--base-dim", type=int, default=64)
    p.add_argument("--time", type=int, required=True)
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)

    p = sub.add_parser("ablate", help="train the ablation ladder")
    p.add_argument("--data", required=True)
    p.add_argument("--variants", default="frame-features,dsfd,tssf-avg,tssf-ga")
    p.add_argument("--out", default=None, help="optional CSV output path")
    p.add_argument("--config", default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="key=value")

    sub.add_parser("gradcheck", help="run all registered gradient checks")
    return parser


def _load_run(run_dir, data_dir):
    run = Path(run_dir)
    rc = resolve_config(run / "run.cfg")
    dataset = io.load_dataset(data_dir, n_train_views=rc.run["n_train_views"])
    arrays = io.read_checkpoint(run / "checkpoint.ckpt")
    dec_path = run / "decoupled.ftr"
    dec_tokens = io.read_ftr(dec_path) if dec_path.exists() else None
    if dec_tokens is None and rc.train.use_frame_features:
        dec_tokens = prepare_features(dataset, rc.train)
    width = dec_tokens.shape[3] if dec_tokens is not None else 0
    model = model_from_checkpoint(arrays, rc.train, width)
    return model, dataset, dec_tokens, rc


def cmd_synth(args) -> int:
    spec = SceneSpec(family=PRESETS[args.preset], n_points=args.points,
                     fraction_static=args.fraction_static, amplitude=args.amplitude)
    scene = generate_scene(spec, args.seed)
    cams, n_train = default_cameras(args.train_views, args.holdout_views,
                                    width=args.size, height=args.size)
    dataset = render_dataset(scene, cams, args.frames, n_train_views=n_train)
    mid_t = dataset.time_norm(dataset.middle_index())
    io.save_dataset(args.out, dataset, gt_points=scene.point_set_at(mid_t))
    print(f"wrote {dataset.n_frames} frames x {dataset.n_views} views to {args.out}")
    return 0


def cmd_extract(args) -> int:
    dataset = io.load_dataset(args.data)
    images = dataset.images
    if args.views:
        images = images[:, :args.views]
    feats = extract_feature_set(images, args.patches, args.dim)
    io.write_ftr(args.out, feats.tokens)
    print(f"wrote features {feats.tokens.shape} to {args.out}")
    return 0


def cmd_decouple(args) -> int:
    tokens = io.read_ftr(args.features)
    p = int(round(np.sqrt(tokens.shape[2])))
    feats = FeatureSet(tokens=tokens, grid_size=p)
    refs = select_references(feats)
    dec = decouple_all(feats, refs, mode=args.mode, combine=args.combine,
                       granularity=args.granularity)
    io.write_ftr(args.out, dec.tokens)
    print(f"decoupled {tokens.shape} -> width {dec.width} "
          f"({dec.provenance}) in {dec.elapsed_seconds*1e3:.2f} ms")
    return 0


def cmd_bench_decouple(args) -> int:
    rng = np.random.default_rng(args.seed)
    tokens = rng.standard_normal((args.t, args.v, args.p, args.d))
    p = max(int(round(np.sqrt(args.p))), 1)
    feats = FeatureSet(tokens=tokens, grid_size=p)
    refs = select_references(feats)
    dec = decouple_all(feats, refs)
    pairwise = decouple_all_pairs(feats)
    ref_ms = dec.elapsed_seconds * 1e3
    pair_ms = pairwise.elapsed_seconds * 1e3
    print(f"reference decoupling: {ref_ms:.3f} ms")
    print(f"pairwise decoupling:  {pair_ms:.3f} ms")
    print(f"speedup: {pair_ms / ref_ms:.2f}x")
    return 0


def cmd_train(args) -> int:
    rc = resolve_config(args.config, args.overrides)
    dataset = io.load_dataset(args.data, n_train_views=rc.run["n_train_views"])
    cloud = io.load_gt_cloud(args.data) if rc.train.point_init else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    model, log = train_full(dataset, rc.train, cloud=cloud)
    elapsed = time.perf_counter() - start
    io.write_checkpoint(out / "checkpoint.ckpt", checkpoint_arrays(model))
    (out / "run.cfg").write_text(rc.dump())
    with open(out / "train_log.csv", "w") as fh:
        fh.write(io.LOG_HEADER + "\n")
        for row in log:
            fh.write(row.csv() + "\n")
    dec_tokens = prepare_features(dataset, rc.train)
    if dec_tokens is not None:
        io.write_ftr(out / "decoupled.ftr", dec_tokens)
    print(f"trained {len(log)} iterations in {elapsed:.1f}s; "
          f"{len(model.points)} points -> {out}")
    return 0


def cmd_render(args) -> int:
    model, dataset, dec_tokens, rc = _load_run(args.run, args.data)
    moved = model_forward(model, dataset, dec_tokens, args.time)
    frame = splat_render(moved, dataset.cameras[args.view])
    io.write_ppm(args.out, frame.rgb_array())
    if args.scoremap:
        scores = _fusion_scores(model, dataset, dec_tokens, args.time)
        if scores is None:
            print("no fusion scores for this model (feature path disabled)",
                  file=sys.stderr)
            return 2
        export_scoremap(scores[:, min(args.view, scores.shape[1] - 1)], model.points,
                        dataset.cameras[args.view], args.scoremap)
    print(f"wrote {args.out}")
    return 0


def _fusion_scores(model, dataset, dec_tokens, i):
    from .fusion import average_fuse, da_fuse, ga_fuse
    from .points import retrieve_point_features
    from .autodiff import Tensor

    if not model.feature_width or dec_tokens is None:
        return None
    cams = [dataset.cameras[j] for j in dataset.train_views()]
    pf = retrieve_point_features(model.points, dec_tokens[i], cams, i)
    feats = Tensor(pf.features)
    if model.fusion_mode == "ga":
        return ga_fuse(feats, pf.valid, model.scorer).scores.data
    if model.fusion_mode == "da":
        return da_fuse(feats, pf.valid, model.scorer_a, model.scorer_b).scores.data
    if model.fusion_mode == "avg":
        return average_fuse(feats, pf.valid).scores.data
    return None


def cmd_eval(args) -> int:
    model, dataset, dec_tokens, rc = _load_run(args.run, args.data)
    views = None
    if args.views:
        views = [int(x) for x in args.views.split(",")]
    report = evaluate(model, dataset, dec_tokens, views=views)
    for i, j, p, s, d in report.rows():
        print(f"frame {i} view {j}: psnr={p:.3f} ssim={s:.4f} dssim={d:.4f}")
    print(f"mean: psnr={report.mean_psnr:.3f} ssim={report.mean_ssim:.4f} "
          f"dssim={report.mean_dssim:.4f}")
    return 0


def cmd_heatmap(args) -> int:
    tokens = io.read_ftr(args.features)
    p = int(round(np.sqrt(tokens.shape[2])))
    dec = DecoupledFeatures(tokens=tokens, grid_size=p, base_dim=args.base_dim,
                            provenance="file", elapsed_seconds=0.0)
    grid = dynamic_heatmap(dec, args.time, args.view)
    export_heatmap(grid, args.out, out_size=args.size)
    print(f"wrote {args.out}")
    return 0


def cmd_ablate(args) -> int:
    rc = resolve_config(args.config, args.overrides)
    dataset = io.load_dataset(args.data, n_train_views=rc.run["n_train_views"])
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    cloud = None
    if (Path(args.data) / "scene_gt.pts").exists():
        cloud = io.load_gt_cloud(args.data)
    rows = run_ablation(dataset, variants, rc.train, cloud=cloud)
    header = f"{'variant':16s} {'psnr':>8s} {'ssim':>8s} {'dssim':>8s} {'points':>7s}"
    print(header)
    for r in rows:
        print(f"{r.variant:16s} {r.psnr:8.3f} {r.ssim:8.4f} {r.dssim:8.4f} "
              f"{r.num_points:7d}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("variant,psnr,ssim,dssim,num_points\n")
            for r in rows:
                fh.write(f"{r.variant},{r.psnr:.17g},{r.ssim:.17g},"
                         f"{r.dssim:.17g},{r.num_points}\n")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_gradchecks()
    worst_fail = False
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:24s} max_rel_err={r.max_error:.3e} tol={r.tolerance:.0e} {status}")
    worst_fail = any(not r.passed for r in results)
    return 2 if worst_fail else 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "decouple": cmd_decouple,
    "bench-decouple": cmd_bench_decouple,
    "train": cmd_train,
    "render": cmd_render,
    "eval": cmd_eval,
    "heatmap": cmd_heatmap,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
}


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except DS4DError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
