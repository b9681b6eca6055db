"""Boundary-weighted BCE + IoU loss with foreground/background deep supervision."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .errors import ConfigurationError, InputError, ShapeError

SMOOTH = 1.0


@dataclass
class LossConfig:
    weights: dict[int, float] = field(default_factory=lambda: {2: 1.0, 3: 1.0, 4: 1.0, 5: 1.0})
    boundary_amplitude: float = 5.0
    boundary_window: int = 15
    # "input": logits are bilinearly upsampled to the ground-truth resolution;
    # "scale": the ground truth is nearest-downsampled to each scale instead
    resolution: str = "input"

    def validate(self) -> None:
        if any(w < 0 for w in self.weights.values()):
            raise ConfigurationError("scale weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ConfigurationError("at least one scale weight must be positive")
        if set(self.weights) - {2, 3, 4, 5}:
            raise ConfigurationError(f"scales must be within 2..5, got {sorted(self.weights)}")
        if self.boundary_window < 1 or self.boundary_window % 2 == 0:
            raise ConfigurationError("boundary_window must be odd and positive")
        if self.resolution not in ("input", "scale"):
            raise ConfigurationError(f"resolution must be 'input' or 'scale', got {self.resolution!r}")

    def to_dict(self) -> dict:
        return {"weights": {str(k): v for k, v in self.weights.items()},
                "boundary_amplitude": self.boundary_amplitude,
                "boundary_window": self.boundary_window,
                "resolution": self.resolution}

    @classmethod
    def from_dict(cls, data: dict) -> "LossConfig":
        unknown = set(data) - {"weights", "boundary_amplitude", "boundary_window", "resolution"}
        if unknown:
            raise ConfigurationError(f"unknown loss config keys: {sorted(unknown)}")
        data = dict(data)
        if "weights" in data:
            data["weights"] = {int(k): float(v) for k, v in data["weights"].items()}
        cfg = cls(**data)
        cfg.validate()
        return cfg


def _check_binary(target: np.ndarray) -> None:
    if not np.isin(target, (0, 1)).all():
        raise InputError("targets must be binary (0/1)")


def boundary_weight(target: np.ndarray, amplitude: float = 5.0, window: int = 15) -> np.ndarray:
    """w = 1 + amplitude * |avgpool(target) - target| (stride 1, zero padding counted)."""
    pooled = K.pool2d(target, "avg", window, 1, window // 2)
    return 1.0 + amplitude * np.abs(pooled - target)


def weighted_bce_iou(logits: ad.Var, target: np.ndarray, weight: np.ndarray | None = None) -> ad.Var:
    """Per-sample weighted BCE plus weighted soft-IoU loss, averaged over the batch."""
    target = np.asarray(target, dtype=logits.dtype)
    if target.shape != logits.shape:
        raise ShapeError(f"target {target.shape} does not match logits {logits.shape}")
    _check_binary(target)
    if weight is None:
        weight = boundary_weight(target)
    weight = np.asarray(weight, dtype=logits.dtype)
    axes = (1, 2, 3)
    wsum = weight.sum(axis=axes)
    bce = ad.sum_(ad.bce_with_logits(logits, target) * weight, axis=axes) / wsum
    prob = ad.sigmoid(logits)
    inter = ad.sum_(prob * (target * weight), axis=axes)
    union = ad.sum_(prob * weight + target * weight, axis=axes) - inter
    iou = 1.0 - (inter + SMOOTH) / (union + SMOOTH)
    return ad.mean(bce + iou)


def downsample_target(gt: np.ndarray, h: int, w: int) -> np.ndarray:
    """Nearest-neighbour downsample, re-binarized at 0.5."""
    return (K.nearest_resize(gt, h, w) >= 0.5).astype(gt.dtype)


def scale_loss(fg: ad.Var, bg: ad.Var, gt: np.ndarray, config: LossConfig) -> ad.Var:
    """L_fg + L_bg for one scale; the background head is scored against 1 - G."""
    if config.resolution == "input":
        h, w = gt.shape[2:]
        fg, bg = ad.resize(fg, h, w), ad.resize(bg, h, w)
        g = gt
    else:
        g = downsample_target(gt, *fg.shape[2:])
    inv = 1.0 - g
    amp, win = config.boundary_amplitude, config.boundary_window
    return (weighted_bce_iou(fg, g, boundary_weight(g, amp, win))
            + weighted_bce_iou(bg, inv, boundary_weight(inv, amp, win)))


def total_loss(predictions, gt: np.ndarray, config: LossConfig | None = None) -> ad.Var:
    """Sum over supervised scales of weight_s * (L_fg + L_bg).

    ``gt`` is [N, 1, H, W] at input resolution.
    """
    config = config or LossConfig()
    config.validate()
    gt = np.asarray(gt, dtype=predictions.final.dtype)
    if gt.shape != predictions.final.shape:
        raise ShapeError(f"ground truth {gt.shape} does not match prediction {predictions.final.shape}")
    _check_binary(gt)
    active = [s for s, w in sorted(config.weights.items()) if w > 0]
    missing = [s for s in active if s not in predictions.logits]
    if len(missing) == len(active):
        raise ConfigurationError(f"no supervised scale among {active} is produced by the model")
    total = None
    for s in active:
        if s not in predictions.logits:
            continue
        fg, bg = predictions.logits[s]
        term = scale_loss(fg, bg, gt, config) * config.weights[s]
        total = term if total is None else total + term
    return total
