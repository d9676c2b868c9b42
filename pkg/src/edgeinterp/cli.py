"""Operator command line: training, evaluation, interpolation, edge extraction
and flow inspection.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime error. The
environment variable EA_INTERP_SEED overrides any configured seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import synthetic, trainer
from .flow_algebra import flow_to_color, write_flo
from .imaging import canny_edges, load_image, save_gray, save_image, soft_edges, to_tensor
from .trainer import (
    CheckpointError,
    ConfigError,
    TrainConfig,
    apply_overrides,
    evaluate,
    load_checkpoint,
    parse_config,
    predict_details,
    predict_flows,
    restore_models,
    serialize_config,
)

SEED_ENV_VAR = "EA_INTERP_SEED"


class UsageError(Exception):
    """Bad flags or argument domains; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


def _load_frame(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise UsageError(f"input frame not found: {path}")
    return load_image(path)


def _restore(checkpoint: str):
    state = load_checkpoint(checkpoint)
    models = restore_models(state)
    for module in models.all_modules().values():
        module.eval()
    return models, state.config


def _warn_padding(frame: np.ndarray) -> None:
    h, w = frame.shape[:2]
    if h % 32 or w % 32:
        print(
            f"warning: resolution {w}x{h} is not divisible by 32; "
            "padding reflectively and cropping the output back",
            file=sys.stderr,
        )


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    if args.config is not None:
        if not os.path.isfile(args.config):
            raise UsageError(f"config file not found: {args.config}")
        config = parse_config(args.config)
    else:
        config = TrainConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(TrainConfig)
        if getattr(args, f.name) is not None
    }
    config = apply_overrides(config, overrides)
    env_seed = _env_seed()
    if env_seed is not None:
        config.seed = env_seed
    print("resolved configuration:")
    print(serialize_config(config), end="")
    run_dir = trainer.train(config, resume_from=args.resume)
    print(f"run directory: {run_dir}")
    return 0


def cmd_interp(args) -> int:
    if (args.t is None) == (args.factor is None):
        raise UsageError("exactly one of --t or --factor is required")
    if args.t is not None and not 0.0 < args.t < 1.0:
        raise UsageError(f"--t must lie strictly between 0 and 1, got {args.t}")
    if args.factor is not None and args.factor < 2:
        raise UsageError(f"--factor must be at least 2, got {args.factor}")
    models, config = _restore(args.checkpoint)
    i0 = _load_frame(args.frame0)
    i1 = _load_frame(args.frame1)
    if i0.shape != i1.shape:
        raise UsageError(f"input frames differ in resolution: {i0.shape[:2]} vs {i1.shape[:2]}")
    _warn_padding(i0)

    if args.factor is not None:
        times = [i / args.factor for i in range(1, args.factor)]
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"out_{i}.png" for i in range(1, args.factor)]
        stems = [out_dir / f"out_{i}" for i in range(1, args.factor)]
    else:
        times = [args.t]
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        paths = [out_path]
        stems = [out_path.with_suffix("")]

    predictions = predict_details(models, config, i0, i1, times)
    for pred, path, stem in zip(predictions, paths, stems):
        save_image(pred.frame, path)
        if args.dump_flow:
            peak = max(
                float(np.hypot(pred.flow_t0[..., 0], pred.flow_t0[..., 1]).max()),
                float(np.hypot(pred.flow_t1[..., 0], pred.flow_t1[..., 1]).max()),
            )
            write_flo(pred.flow_t0, f"{stem}_flow_t0.flo")
            write_flo(pred.flow_t1, f"{stem}_flow_t1.flo")
            save_image(flow_to_color(pred.flow_t0, peak or None), f"{stem}_flow_t0.png")
            save_image(flow_to_color(pred.flow_t1, peak or None), f"{stem}_flow_t1.png")
        if args.dump_attention:
            if pred.att0 is None:
                print("warning: refinement disabled, no attention maps to dump", file=sys.stderr)
            else:
                save_gray(pred.att0, f"{stem}_att_a0.png")
                save_gray(pred.att1, f"{stem}_att_a1.png")
    return 0


def _scan_for_eval(args) -> list:
    from .data import scan_clips, scan_triplets

    if args.mode == "multi_frame":
        samples = scan_clips(args.dataset_root, args.group, args.stride)
        if samples:
            return samples
        try:
            scan_triplets(args.dataset_root)
        except (FileNotFoundError, ValueError):
            raise UsageError(f"no usable clips under {args.dataset_root}")
        raise UsageError(
            f"no usable clips under {args.dataset_root}; the layout looks like a "
            "triplet dataset (im1/im2/im3) - try --mode single_frame"
        )
    try:
        return scan_triplets(args.dataset_root, args.split or None)
    except ValueError:
        if scan_clips(args.dataset_root, args.group, args.stride):
            raise UsageError(
                f"no triplet sequences under {args.dataset_root}; the layout looks "
                "like a clip dataset - try --mode multi_frame"
            )
        raise UsageError(f"zero usable samples under {args.dataset_root}")


def cmd_eval(args) -> int:
    if not os.path.isdir(args.dataset_root):
        raise UsageError(f"dataset root not found: {args.dataset_root}")
    samples = _scan_for_eval(args)
    result = evaluate(args.checkpoint, samples, args.mode, report_path=args.report)
    print(f"PSNR={result.mean_psnr:.4f} SSIM={result.mean_ssim:.6f}")
    return 0


def cmd_edges(args) -> int:
    frame = _load_frame(args.in_path)
    if args.method == "canny":
        if not args.low < args.high:
            raise UsageError(f"--low must be below --high, got {args.low} >= {args.high}")
        if args.sigma <= 0:
            raise UsageError(f"--sigma must be positive, got {args.sigma}")
        edges = canny_edges(frame, args.low, args.high, args.sigma)
    else:
        edges = soft_edges(to_tensor(frame).unsqueeze(0))[0, 0].numpy()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_gray(edges, args.out)
    return 0


def cmd_flow(args) -> int:
    if args.out_flo is None and args.out_viz is None:
        raise UsageError("at least one of --out-flo or --out-viz is required")
    models, config = _restore(args.checkpoint)
    i0 = _load_frame(args.frame0)
    i1 = _load_frame(args.frame1)
    if i0.shape != i1.shape:
        raise UsageError(f"input frames differ in resolution: {i0.shape[:2]} vs {i1.shape[:2]}")
    _warn_padding(i0)
    f01, f10 = predict_flows(models, config, i0, i1)
    if args.out_flo is not None:
        Path(args.out_flo).parent.mkdir(parents=True, exist_ok=True)
        write_flo(f01, f"{args.out_flo}_f01.flo")
        write_flo(f10, f"{args.out_flo}_f10.flo")
    if args.out_viz is not None:
        Path(args.out_viz).parent.mkdir(parents=True, exist_ok=True)
        peak = max(
            float(np.hypot(f01[..., 0], f01[..., 1]).max()),
            float(np.hypot(f10[..., 0], f10[..., 1]).max()),
        )
        save_image(flow_to_color(f01, peak or None), f"{args.out_viz}_f01.png")
        save_image(flow_to_color(f10, peak or None), f"{args.out_viz}_f10.png")
    return 0


def cmd_synth(args) -> int:
    try:
        h, w = (int(part) for part in args.size.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like 64x64, got {args.size!r}")
    if h < 32 or w < 32:
        raise UsageError(f"--size must be at least 32x32, got {args.size}")
    seed = _env_seed()
    if seed is None:
        seed = args.seed
    if args.kind == "triplets":
        synthetic.write_triplet_dataset(args.out, args.count, (h, w), seed, args.max_speed)
    else:
        synthetic.write_clip_dataset(args.out, args.count, (h, w), seed, args.frames, args.max_speed)
    print(f"wrote {args.count} synthetic {args.kind} under {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="edgeinterp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", parser_class=_Parser, help="train a model from a config file and/or flags")
    p.add_argument("--config", help="key = value config file; flags override its values")
    p.add_argument("--resume", help="checkpoint to resume from")
    for f in fields(TrainConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None, metavar="V")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("interp", parser_class=_Parser, help="synthesize intermediate frames")
    p.add_argument("--frame0", required=True)
    p.add_argument("--frame1", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t", type=float, help="single time point in (0, 1)")
    p.add_argument("--factor", type=int, help="write factor-1 frames at i/factor")
    p.add_argument("--out", required=True, help="output file (--t) or directory (--factor)")
    p.add_argument("--dump-flow", action="store_true", help="write intermediate flows (.flo and color PNGs)")
    p.add_argument("--dump-attention", action="store_true", help="write attention maps as PNGs")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("eval", parser_class=_Parser, help="evaluate a checkpoint on a dataset")
    p.add_argument("--dataset-root", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("single_frame", "multi_frame"), default="single_frame")
    p.add_argument("--report", required=True, help="CSV report path (a PNG figure lands next to it)")
    p.add_argument("--split", help="optional split file selecting a subset")
    p.add_argument("--group", type=int, default=9)
    p.add_argument("--stride", type=int, default=9)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("edges", parser_class=_Parser, help="extract an edge map from an image")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("canny", "sobel"), default="canny")
    p.add_argument("--low", type=float, default=0.1)
    p.add_argument("--high", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=1.4)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("flow", parser_class=_Parser, help="estimate bidirectional flow between two frames")
    p.add_argument("--frame0", required=True)
    p.add_argument("--frame1", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-flo", help="prefix for <prefix>_f01.flo and <prefix>_f10.flo")
    p.add_argument("--out-viz", help="prefix for <prefix>_f01.png and <prefix>_f10.png")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("synth", parser_class=_Parser, help="generate a synthetic rectangle dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("triplets", "clips"), default="triplets")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--size", default="64x64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-speed", type=float, default=4.0)
    p.add_argument("--frames", type=int, default=9, help="frames per clip (clips only)")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        return args.func(args) or 0
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
