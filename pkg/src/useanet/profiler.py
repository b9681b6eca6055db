"""Parameter and MAC counting by tracing one forward pass.

Counted ops: convolution and linear MACs plus the attention matmuls.
Normalizations, activations and elementwise ops are not counted. One MAC
is reported as one FLOP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .model import ModelConfig, USEANet

CATEGORIES = ("encoder", "mbfp", "attention", "hfa", "decoder", "heads")


class Recorder:
    """Collects MACs and first-touch parameter counts keyed by the innermost module category."""

    def __init__(self):
        self.stack: list = []
        self.macs: dict[str, int] = {}
        self.params: dict[str, int] = {}
        self.ops: dict[str, int] = {}
        self._seen: set[int] = set()

    def _category(self) -> str:
        for mod in reversed(self.stack):
            if mod.category is not None:
                return mod.category
        return "other"

    def enter(self, module) -> None:
        self.stack.append(module)

    def exit(self) -> None:
        self.stack.pop()

    def add_macs(self, op: str, macs: int) -> None:
        cat = self._category()
        self.macs[cat] = self.macs.get(cat, 0) + macs
        self.ops[op] = self.ops.get(op, 0) + macs

    def touch(self, param) -> None:
        if id(param) in self._seen:
            return
        self._seen.add(id(param))
        cat = self._category()
        self.params[cat] = self.params.get(cat, 0) + int(param.value.size)


@dataclass
class ProfileReport:
    params: int
    flops: int
    input_size: int
    breakdown: dict[str, dict[str, int]] = field(default_factory=dict)
    by_op: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "params_m": round(self.params / 1e6, 4),
            "flops": self.flops,
            "flops_g": round(self.flops / 1e9, 4),
            "input_size": self.input_size,
            "breakdown": self.breakdown,
            "by_op": self.by_op,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def trace(model, x: np.ndarray) -> Recorder:
    rec = Recorder()
    with ad.no_grad(), ad.recording(rec):
        model(ad.Var(x))
    return rec


def profile_module(module, input_shape) -> ProfileReport:
    """Trace any module on a zero input of ``input_shape`` (NCHW)."""
    module.eval()
    x = np.zeros(tuple(input_shape), dtype=K.default_dtype())
    rec = trace(module, x)
    cats = list(CATEGORIES) + sorted((set(rec.macs) | set(rec.params)) - set(CATEGORIES))
    breakdown = {c: {"params": rec.params.get(c, 0), "flops": rec.macs.get(c, 0)} for c in cats}
    return ProfileReport(
        params=sum(v["params"] for v in breakdown.values()),
        flops=sum(v["flops"] for v in breakdown.values()),
        input_size=int(input_shape[-1]),
        breakdown=breakdown,
        by_op=dict(sorted(rec.ops.items())),
    )


def profile_model(model, input_size: int) -> ProfileReport:
    return profile_module(model, (1, model.config.encoder.in_channels, input_size, input_size))


def profile(config: ModelConfig | None = None, input_size: int | None = None, seed: int = 0) -> ProfileReport:
    config = config or ModelConfig()
    model = USEANet(config, seed=seed)
    return profile_model(model, input_size or config.input_size)


def count_store(store) -> int:
    """Independent recount: trainable entries of a ParameterStore (buffers excluded)."""
    return int(sum(np.asarray(v).size for k, v in store.items() if not store.is_buffer(k)))
