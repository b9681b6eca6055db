import numpy as np

from useanet import kernels as K
from useanet.checkpoint import dumps, load_checkpoint
from useanet.config import RunConfig
from useanet.images import encode_pgm, read_pixels
from useanet.inference import segment_pixels
from useanet.model import USEANet


def load_golden(golden_dir):
    cfg = RunConfig.load(golden_dir / "micro.json")
    model = USEANet(cfg.model)
    model.load_state_dict(load_checkpoint(cfg.weights))
    return cfg, model


def test_golden_checkpoint_bytes_are_stable(golden_dir):
    raw = (golden_dir / "micro.usea").read_bytes()
    assert dumps(load_checkpoint(golden_dir / "micro.usea")) == raw


def test_golden_fixture_segments_byte_identically(golden_dir):
    cfg, model = load_golden(golden_dir)
    with K.threads(0):
        mask, prob = segment_pixels(model, read_pixels(golden_dir / "fixture.pgm"), cfg.threshold)
    produced = encode_pgm(np.where(mask > 0, 255, 0).astype(np.uint8))
    assert produced == (golden_dir / "expected_mask.pgm").read_bytes()


def test_golden_mask_is_not_trivial(golden_dir):
    m = read_pixels(golden_dir / "expected_mask.pgm")
    assert 0.1 < (m > 0).mean() < 0.9
