"""Command-line entry points.

Option precedence is flags over environment (``BLOBVID_*``) over ``--config``
JSON over built-in defaults. Exit codes: 0 success, 1 operational failure
(bad input data, validation violations, failed checks), 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .blobs import BlobParams, FrameGeometry, rasterize
from .config import Config, load_config
from .errors import BlobvidError
from .fitting import fit_ellipse, interpolate_blob_params
from .gradcheck import run_gradcheck
from .metrics import (
    COSINE_MODES,
    load_frame_evals,
    load_region_embeddings,
    mean_iou,
    region_cosine_metrics,
)
from .parallel import parallel_map
from .pipeline import run_attend_block
from .pnm import read_mask_pgm, write_mask_pgm, write_ppm
from .video import densify, validate, video_from_json
from .embedding import write_embedding

_PALETTE = (
    (230, 80, 80),
    (80, 180, 90),
    (80, 120, 220),
    (230, 200, 70),
    (170, 90, 200),
    (80, 200, 200),
    (240, 140, 60),
    (150, 150, 150),
)

_CONFIG_FIELDS = (
    "feature_h", "feature_w", "anchor_interval", "rescale", "fourier_freqs",
    "seed", "dense_cap", "interp_method", "interp_orientation",
)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _load_video(path: str):
    return video_from_json(Path(path).read_text(encoding="utf-8"))


def _cfg_from_args(args: argparse.Namespace) -> Config:
    overrides = {f: getattr(args, f, None) for f in _CONFIG_FIELDS}
    return load_config(config_file=args.config, env=os.environ, overrides=overrides)


def _parse_frames(selector: str | None, num_frames: int) -> list[int]:
    if selector is None:
        return list(range(num_frames))
    return [int(tok) for tok in selector.split(",") if tok.strip()]


def _cmd_fit(args: argparse.Namespace) -> int:
    mask = read_mask_pgm(args.mask)
    width = args.width if args.width is not None else mask.w
    height = args.height if args.height is not None else mask.h
    result = fit_ellipse(mask, FrameGeometry(width, height), max_iter=args.max_iter)
    _print_json({
        "params": list(result.params.as_array()),
        "iou": result.iou,
        "iterations": result.iterations,
    })
    return 0


def _cmd_interp(args: argparse.Namespace) -> int:
    p1 = BlobParams.from_sequence(args.p1)
    p2 = BlobParams.from_sequence(args.p2)
    mid = interpolate_blob_params(p1, p2, args.alpha)
    _print_json({"params": list(mid.as_array())})
    return 0


def _cmd_mask(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args)
    v = densify(_load_video(args.video))
    frames = _parse_frames(args.frames, v.num_frames)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def job(t: int):
        return [
            (track.object_id,
             rasterize(track.params[t], v.geom, cfg.feature_h, cfg.feature_w, cfg.rescale))
            for track in v.tracks
        ]

    count = 0
    for t, files in zip(frames, parallel_map(job, frames, args.threads)):
        for object_id, m in files:
            write_mask_pgm(out_dir, t, object_id, m)
            count += 1
    _print_json({"written": count, "dir": str(out_dir)})
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args)
    v = densify(_load_video(args.video))
    frames = _parse_frames(args.frames, v.num_frames)
    h = args.render_h if args.render_h is not None else v.geom.height
    w = args.render_w if args.render_w is not None else v.geom.width
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def job(t: int):
        img = np.zeros((h, w, 3), dtype=np.uint8)
        for n, track in enumerate(v.tracks):
            m = rasterize(track.params[t], v.geom, h, w, cfg.rescale)
            img[m.bits] = _PALETTE[n % len(_PALETTE)]
        return f"f{t:04d}.ppm", img

    count = 0
    for name, img in parallel_map(job, frames, args.threads):
        write_ppm(out_dir / name, img)
        count += 1
    _print_json({"written": count, "dir": str(out_dir)})
    return 0


def _cmd_attend(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args)
    v = _load_video(args.video)
    out, stats = run_attend_block(v, cfg, dim=args.dim, n_tokens=args.tokens,
                                  threads=args.threads)
    if args.out is not None:
        write_embedding(args.out, out)
    _print_json(stats.to_dict())
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    v = _load_video(args.video)
    violations = validate(v)
    for item in violations:
        sys.stderr.write(str(item) + "\n")
    if violations:
        return 1
    _print_json({"ok": True, "tracks": v.num_tracks, "frames": v.num_frames})
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    if args.kind == "miou":
        if args.detections is None or args.ground_truth is None:
            raise BlobvidError("miou needs --detections and --ground-truth")
        evals = load_frame_evals(args.detections, args.ground_truth)
        frames = [int(tok) for tok in args.frames.split(",")] if args.frames else sorted(
            e.frame for e in evals
        )
        value = mean_iou(evals, frames, method=args.match)
        _print_json({
            "metric": "miou",
            "value": value,
            "averaging": "pooled",
            "match": args.match,
            "frames": frames,
        })
    else:
        if args.embeddings is None:
            raise BlobvidError("cosine metrics need --embeddings")
        embs = load_region_embeddings(args.embeddings)
        report = region_cosine_metrics(embs, args.kind)
        _print_json(dataclasses.asdict(report))
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = _cfg_from_args(args)
    report = run_gradcheck(seed=cfg.seed, instances=args.instances,
                           step=args.step, tolerance=args.tolerance)
    _print_json({
        "passed": report.passed,
        "max_rel_err": report.max_rel_err,
        "per_op": report.per_op,
        "instances": report.instances,
        "tolerance": report.tolerance,
    })
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    for field, kind in (("feature-h", int), ("feature-w", int), ("anchor-interval", int),
                        ("rescale", float), ("fourier-freqs", int), ("dense-cap", int)):
        common.add_argument(f"--{field}", type=kind, default=None,
                            dest=field.replace("-", "_"))
    common.add_argument("--interp-method", choices=("linear", "slerp"), default=None)
    common.add_argument("--interp-orientation", choices=("as_printed", "standard"),
                        default=None)

    parser = argparse.ArgumentParser(prog="blobvid")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit an ellipse to a mask PGM")
    p.add_argument("mask")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=200)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("interp", parents=[common], help="interpolate two blob params")
    p.add_argument("--p1", type=float, nargs=5, required=True,
                   metavar=("CX", "CY", "A", "B", "THETA"))
    p.add_argument("--p2", type=float, nargs=5, required=True,
                   metavar=("CX", "CY", "A", "B", "THETA"))
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(fn=_cmd_interp)

    p = sub.add_parser("mask", parents=[common], help="write per-object mask PGMs")
    p.add_argument("video")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", default=None, help="comma-separated frame indices")
    p.set_defaults(fn=_cmd_mask)

    p = sub.add_parser("render", parents=[common], help="write composite PPM frames")
    p.add_argument("video")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", default=None)
    p.add_argument("--render-h", type=int, default=None)
    p.add_argument("--render-w", type=int, default=None)
    p.set_defaults(fn=_cmd_render)

    p = sub.add_parser("attend", parents=[common],
                       help="run the attention demo block on a video")
    p.add_argument("video")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--tokens", type=int, default=4)
    p.add_argument("--out", default=None, help="write output features (f32le + sidecar)")
    p.set_defaults(fn=_cmd_attend)

    p = sub.add_parser("validate", parents=[common], help="check a video JSON")
    p.add_argument("video")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("metrics", parents=[common], help="layout-control metrics")
    p.add_argument("kind", choices=("miou",) + COSINE_MODES)
    p.add_argument("--detections", default=None)
    p.add_argument("--ground-truth", default=None)
    p.add_argument("--frames", default=None)
    p.add_argument("--match", choices=("hungarian", "greedy"), default="hungarian")
    p.add_argument("--embeddings", default=None)
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of the analytic gradients")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BlobvidError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
