"""``useanet`` command line: segment, profile, verify, gradcheck, overfit, eval.

Exit codes: 0 success, 1 a check or acceptance condition failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path


from .checkpoint import load_checkpoint, save_checkpoint
from .config import PRESETS, RunConfig
from .data import quantize
from .errors import UseaError
from .images import load_mask, read_pixels, save_gray, save_mask
from .inference import segment_pixels
from .metrics import mean_report, metrics
from .model import ModelConfig, USEANet

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
OVERFIT_TARGET_IOU = 0.9


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _model_options(p: argparse.ArgumentParser, preset: str = "full") -> None:
    p.add_argument("--config", help="RunConfig JSON; flags below override it")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help=f"model preset when no --config is given (default {preset})")
    p.add_argument("--no-attention", action="store_true", help="drop ECA and EAA")
    p.add_argument("--no-multi-branch", action="store_true", help="single LConv instead of MBFP")
    p.add_argument("--no-ultrasound-specific", action="store_true",
                   help="generic three-branch MBFP without Laplacian terms")
    p.add_argument("--two-layer", action="store_true", help="supervise scales 2 and 5 only")
    p.set_defaults(default_preset=preset)


def _run_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig(model=PRESETS[args.preset or args.default_preset]())
    m = cfg.model
    m.attention &= not args.no_attention
    m.multi_branch &= not args.no_multi_branch
    m.ultrasound_specific &= not args.no_ultrasound_specific
    m.multi_scale &= not args.two_layer
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------


def cmd_segment(args) -> int:
    cfg = _run_config(args)
    weights = args.weights or cfg.weights
    src = args.input or cfg.input
    dst = args.output or cfg.output
    threshold = cfg.threshold if args.threshold is None else args.threshold
    if not (weights and src and dst):
        raise UsageError("segment needs --weights, --input and --output (or the same keys in --config)")
    model = USEANet(cfg.model, seed=cfg.seed)
    model.load_state_dict(load_checkpoint(weights))
    t0 = time.perf_counter()
    pixels = read_pixels(src)
    mask, _ = segment_pixels(model, pixels, threshold)
    h, w = mask.shape
    save_mask(mask, dst)
    ms = 1000 * (time.perf_counter() - t0)
    print(f"wrote {dst} ({w}x{h}, {int(mask.sum())} foreground px) in {ms:.1f} ms")
    return EXIT_OK


def cmd_profile(args) -> int:
    from .profiler import count_store, profile

    cfg = _run_config(args)
    t0 = time.perf_counter()
    report = profile(cfg.model, args.input_size or cfg.model.input_size, seed=cfg.seed)
    out = report.to_dict()
    out["seconds"] = round(time.perf_counter() - t0, 3)
    if args.recount:
        out["recount"] = count_store(USEANet(cfg.model, seed=cfg.seed).state_dict())
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verify

    if args.inject_fault:
        with verify.inject_fault(args.inject_fault):
            results = verify.run(args.seed)
    else:
        results = verify.run(args.seed)
    verify.report(results, sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_gradcheck(args) -> int:
    from . import gradchecks

    precisions = ["float64", "float32"] if args.precision == "both" else [args.precision]
    ok = True
    for prec in precisions:
        for case in gradchecks.cases_for(prec):
            if args.case and case.name not in args.case:
                continue
            t0 = time.perf_counter()
            r = gradchecks.run_case(case, args.seed, prec)
            ok &= r.passed
            extra = f", {r.skipped} kinked entries redrawn" if r.skipped else ""
            print(f"{'PASS' if r.passed else 'FAIL'}  {prec}  {case.name:18s} max rel err {r.max_error:.2e} "
                  f"(tol {r.tolerance:.0e}, {len(r.errors)} tensors{extra}) {time.perf_counter() - t0:.1f}s")
    print("all gradient checks passed" if ok else "gradient check FAILED")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_overfit(args) -> int:
    from .losses import LossConfig
    from .train import overfit

    if args.size % 32:
        raise UsageError(f"--size must be divisible by 32, got {args.size}")
    model_cfg = ModelConfig.tiny(input_size=args.size)
    model_cfg.attention &= not args.no_attention
    model_cfg.multi_branch &= not args.no_multi_branch
    model_cfg.ultrasound_specific &= not args.no_ultrasound_specific
    model_cfg.multi_scale &= not args.two_layer
    loss_cfg = LossConfig()
    t0 = time.perf_counter()
    result = overfit(model_cfg, steps=args.steps, seed=args.seed, lr=args.lr, loss_config=loss_cfg,
                     every=args.log_every)
    iou = result.final.iou
    print(f"final train IoU {iou:.4f} after {args.steps} steps "
          f"(loss {result.losses[0]:.4f} -> {result.losses[-1]:.4f}) in {time.perf_counter() - t0:.1f} s")
    if args.out_weights:
        save_checkpoint(result.model.state_dict(), args.out_weights)
        run = RunConfig(model=model_cfg, loss=loss_cfg, weights=Path(args.out_weights).name,
                        seed=args.seed)
        run.save(Path(args.out_weights).with_suffix(".json"))
        print(f"saved weights to {args.out_weights}")
    if args.fixture_dir:
        out = Path(args.fixture_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_gray(quantize(result.sample.image), out / "fixture.pgm")
        save_mask(result.sample.mask, out / "fixture_mask.pgm")
    ok = iou >= OVERFIT_TARGET_IOU
    print(f"{'PASS' if ok else 'FAIL'}: IoU {iou:.4f} {'>=' if ok else '<'} {OVERFIT_TARGET_IOU}")
    return EXIT_OK if ok else EXIT_FAIL


def _mask_files(directory) -> dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"not a directory: {directory}")
    return {p.name: p for p in sorted(d.iterdir()) if p.suffix.lower() in (".pgm", ".png")}


def cmd_eval(args) -> int:
    preds, gts = _mask_files(args.pred_dir), _mask_files(args.gt_dir)
    missing = sorted(set(preds) ^ set(gts))
    if missing:
        name = missing[0]
        side = "ground truth" if name in preds else "prediction"
        raise UsageError(f"no {side} counterpart for {name}")
    if not preds:
        raise UsageError(f"no masks found in {args.pred_dir}")
    per_image = {name: metrics(load_mask(preds[name]), load_mask(gts[name])) for name in sorted(preds)}
    out = {"mean": mean_report(list(per_image.values())),
           "per_image": {k: v.to_dict() for k, v in per_image.items()}}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


class UsageError(UseaError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="useanet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one image with a checkpoint")
    _model_options(p)
    p.add_argument("--weights")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--threshold", type=_unit_interval, default=None, help="in [0, 1] (default 0.5)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("profile", help="parameter and FLOP report as JSON")
    _model_options(p)
    p.add_argument("--input-size", type=int, default=None)
    p.add_argument("--recount", action="store_true", help="also count parameters from the state dict")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", help="kernel oracles and architectural invariants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=["laplacian-stencil"], default=None,
                   help="break a component on purpose to exercise the harness")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=["float64", "float32", "both"], default="both")
    p.add_argument("--case", action="append", help="restrict to named cases (repeatable)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("overfit", help="train the tiny config on one synthetic fixture")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--out-weights", help="checkpoint path; the run config is written next to it")
    p.add_argument("--fixture-dir", help="write the training image and mask here as PGM")
    p.add_argument("--no-attention", action="store_true")
    p.add_argument("--no-multi-branch", action="store_true")
    p.add_argument("--no-ultrasound-specific", action="store_true")
    p.add_argument("--two-layer", action="store_true")
    p.set_defaults(func=cmd_overfit)

    p = sub.add_parser("eval", help="mean IoU/F1/accuracy over matching mask files")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UseaError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"useanet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
