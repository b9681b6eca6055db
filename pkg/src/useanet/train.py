"""Desk-scale training: overfit one synthetic fixture."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .data import SampleRecord, quantize, synth_fixture
from .errors import TrainingError
from .images import standardize
from .losses import LossConfig, total_loss
from .metrics import MetricsReport, metrics
from .model import ModelConfig, USEANet, predict_mask


@dataclass
class OverfitResult:
    model: USEANet
    sample: SampleRecord
    losses: list[float] = field(default_factory=list)
    ious: list[tuple[int, float]] = field(default_factory=list)
    final: MetricsReport | None = None


def fixture_input(sample: SampleRecord) -> np.ndarray:
    """Network input for a fixture, quantized exactly as its PGM file would be."""
    return standardize(quantize(sample.image))[None]


def evaluate(model: USEANet, x: np.ndarray, mask: np.ndarray, threshold: float = 0.5) -> MetricsReport:
    was_training = model.training
    model.eval()
    with ad.no_grad():
        prob = model(x).final.value
    model.train(was_training)
    return metrics(predict_mask(prob[0, 0], threshold), mask[0])


def overfit(config: ModelConfig | None = None, steps: int = 300, seed: int = 0, lr: float = 1e-4,
            max_norm: float = 1.0, loss_config: LossConfig | None = None, every: int = 10,
            log: Callable[[str], None] | None = print) -> OverfitResult:
    config = config or ModelConfig.tiny()
    sample = synth_fixture("speckled-disk", size=config.input_size, seed=seed)
    x = fixture_input(sample)
    gt = sample.mask[None].astype(x.dtype)
    model = USEANet(config, seed=seed)
    model.train()
    opt = ad.Adam(dict(model.named_parameters()), lr=lr, max_norm=max_norm)
    result = OverfitResult(model, sample)
    for step in range(steps):
        opt.zero_grad()
        loss = total_loss(model(x), gt, loss_config)
        value = float(loss.value)
        if not math.isfinite(value):
            raise TrainingError(f"loss became {value} at step {step}")
        result.losses.append(value)
        ad.backward(loss)
        opt.step()
        if every and (step % every == 0 or step == steps - 1):
            iou = evaluate(model, x, sample.mask).iou
            result.ious.append((step, iou))
            if log:
                log(f"step {step:4d}  loss {value:.5f}  iou {iou:.4f}")
    result.final = evaluate(model, x, sample.mask)
    return result
