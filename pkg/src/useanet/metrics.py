"""Pixel-level segmentation metrics: IoU, F1 (Dice) and accuracy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, ShapeError


@dataclass
class MetricsReport:
    iou: float
    f1: float
    acc: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _binary(mask) -> np.ndarray:
    m = np.asarray(mask)
    if not np.isin(m, (0, 1)).all():
        raise InputError("masks must be binary (0/1)")
    return m.astype(bool)


def metrics(pred, gt) -> MetricsReport:
    """Foreground IoU/F1 and accuracy. Two empty masks score IoU = F1 = 1."""
    p, g = _binary(pred), _binary(gt)
    if p.shape != g.shape:
        raise ShapeError(f"mask shapes differ: {p.shape} vs {g.shape}")
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(np.sum(~p & ~g))
    if tp + fp + fn == 0:
        iou = f1 = 1.0
    else:
        iou = tp / (tp + fp + fn)
        f1 = 2 * tp / (2 * tp + fp + fn)
    return MetricsReport(iou, f1, (tp + tn) / p.size, tp, fp, fn, tn)


def mean_report(reports: list[MetricsReport]) -> dict:
    """Means scaled to percentages, as result tables report them."""
    if not reports:
        raise InputError("no reports to average")
    return {
        "iou": 100.0 * float(np.mean([r.iou for r in reports])),
        "f1": 100.0 * float(np.mean([r.f1 for r in reports])),
        "acc": 100.0 * float(np.mean([r.acc for r in reports])),
        "count": len(reports),
    }
