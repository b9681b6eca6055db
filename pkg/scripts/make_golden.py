"""Regenerate the committed golden checkpoint, fixture image and expected mask.

Run only when the checkpoint format or the forward pass changes on purpose;
tests/test_golden.py compares against these files byte for byte.

    python3 scripts/make_golden.py [--out tests/golden]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from useanet import kernels as K
from useanet.checkpoint import save_checkpoint
from useanet.config import RunConfig
from useanet.data import quantize
from useanet.images import encode_pgm, save_mask
from useanet.inference import segment_pixels
from useanet.model import ModelConfig
from useanet.train import overfit

TRAIN_STEPS = 150
TRAIN_LR = 1e-3
# the golden image is larger than the model input so the resize path is exercised
FIXTURE_SIZE = 80
# probabilities this close to 0.5 could flip under a different BLAS build
MIN_MARGIN = 1e-4


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "golden"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with K.threads(0):
        config = ModelConfig.micro()
        result = overfit(config, steps=TRAIN_STEPS, seed=0, lr=TRAIN_LR, every=50)
        model = result.model
        save_checkpoint(model.state_dict(), out / "micro.usea")
        RunConfig(model=config, weights="micro.usea").save(out / "micro.json")

        # the training image upsampled, so the expected mask is a recognisable lesion
        big = K.bilinear_resize(quantize(result.sample.image)[None], FIXTURE_SIZE, FIXTURE_SIZE)[0, 0]
        pixels = np.rint(big * 255.0).astype(np.uint8)
        (out / "fixture.pgm").write_bytes(encode_pgm(pixels))
        mask, prob = segment_pixels(model, pixels)
        save_mask(mask, out / "expected_mask.pgm")

    margin = float(np.abs(prob - 0.5).min())
    print(f"train IoU {result.final.iou:.4f}; golden mask has {int(mask.sum())} foreground px; "
          f"closest probability to the threshold is {margin:.2e} away")
    if margin < MIN_MARGIN:
        print(f"warning: margin below {MIN_MARGIN:.0e}; the byte-exact mask may not be portable")


if __name__ == "__main__":
    main()
