"""Overfit the tiny config on one synthetic fixture and report the learning curve.

Writes the checkpoint, its run config, the fixture and the predicted mask to
--out, then prints per-step loss and IoU. Equivalent to ``useanet overfit``
followed by ``useanet segment`` on the fixture.

    python3 scripts/overfit_demo.py --out /tmp/overfit [--steps 300] [--seed 0]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from useanet import kernels as K
from useanet.checkpoint import save_checkpoint
from useanet.config import RunConfig
from useanet.data import quantize
from useanet.images import save_gray, save_mask
from useanet.inference import segment_pixels
from useanet.metrics import metrics
from useanet.model import ModelConfig
from useanet.train import overfit


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="overfit_run")
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lr", type=float, default=1e-4)
    ap.add_argument("--preset", choices=["tiny", "micro"], default="tiny")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    config = getattr(ModelConfig, args.preset)()
    t0 = time.perf_counter()
    with K.threads(0):
        result = overfit(config, steps=args.steps, seed=args.seed, lr=args.lr, every=25)
    print(f"trained in {time.perf_counter() - t0:.1f} s")

    save_checkpoint(result.model.state_dict(), out / "weights.usea")
    RunConfig(model=config, weights="weights.usea", seed=args.seed).save(out / "weights.json")
    save_gray(quantize(result.sample.image), out / "fixture.pgm")
    save_mask(result.sample.mask, out / "fixture_mask.pgm")

    pixels = np.rint(quantize(result.sample.image)[0] * 255).astype(np.uint8)
    mask, _ = segment_pixels(result.model, pixels)
    save_mask(mask, out / "prediction.pgm")
    rep = metrics(mask, result.sample.mask[0])
    print(f"prediction vs fixture mask: IoU {rep.iou:.4f}, F1 {rep.f1:.4f}, acc {rep.acc:.4f}")
    print(f"files written to {out}/")
    return 0 if rep.iou >= 0.9 else 1


if __name__ == "__main__":
    raise SystemExit(main())
