"""Finite-difference checks for every differentiable op class and the assembled loss.

Each case builds fresh parameters from a seeded generator, so a case can be
rerun at either precision. Inputs to kinked ops (relu, max) are kept away from
their kinks so a central difference never straddles one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .blocks import LConv, laplacian_kernel
from .encoder import SRAttention
from .losses import total_loss, weighted_bce_iou
from .model import ModelConfig, USEANet


@dataclass
class GradcheckCase:
    name: str
    build: Callable[[np.random.Generator], tuple[Callable[[], ad.Var], dict[str, ad.Var]]]
    max_samples: int | None = 24
    # float64 (step, order) override for deep graphs; see ``ad.gradcheck``
    f64_stencil: tuple[float, int] | None = None
    # composite losses reduce in float32 internally, which puts their rounding
    # noise above the float32 tolerance; they are checked in float64 only
    precisions: tuple[str, ...] = ("float64", "float32")


def _p(rng, *shape, low=None):
    """Random parameter; with ``low`` the magnitudes are drawn from [low, 1]."""
    if low is None:
        v = rng.standard_normal(shape)
    else:
        v = rng.uniform(low, 1.0, shape) * rng.choice([-1.0, 1.0], shape)
    return ad.Parameter(v.astype(K.default_dtype()))


def _distinct(rng, *shape):
    """Values with pairwise gaps of at least 0.05, so max selections are stable."""
    n = int(np.prod(shape))
    v = rng.permutation(n).reshape(shape) * 0.05 - 0.025 * n
    return ad.Parameter(v.astype(K.default_dtype()))


def _probe(rng, shape) -> np.ndarray:
    return rng.standard_normal(shape)


def _weighted(out: ad.Var, probe: np.ndarray) -> ad.Var:
    # reduced in float64 so rounding of untouched terms cancels between the +h and -h passes
    return ad.sum_(ad.cast(out, np.float64) * probe)


def _unary(op):
    def build(rng):
        x = _p(rng, 2, 3, 4, low=0.1)
        w = _probe(rng, op(x).shape)
        return (lambda: _weighted(op(x), w)), {"x": x}
    return build


def _arith(rng):
    a, b = _p(rng, 2, 3), _p(rng, 2, 3, low=0.5)
    c = _p(rng, 1, 3)
    return (lambda: ad.sum_(((a + c) * b - a) / b)), {"a": a, "b": b, "c": c}


def _bce(rng):
    z = _p(rng, 2, 1, 4, 4)
    t = (rng.random((2, 1, 4, 4)) > 0.5).astype(K.default_dtype())
    w = _probe(rng, (2, 1, 4, 4))
    return (lambda: _weighted(ad.bce_with_logits(z, t), w)), {"z": z}


def _reductions(rng):
    x = _distinct(rng, 2, 3, 4)
    w = _probe(rng, (2, 1, 4))
    return (lambda: ad.sum_(ad.reduce_max(x, axis=1) * w) + ad.mean(x * x) + ad.sum_(x, axis=0).mean()), {"x": x}


def _structure(rng):
    a, b = _p(rng, 1, 2, 3, 3), _p(rng, 1, 1, 3, 3)
    w = _probe(rng, (1, 9, 3))

    def f():
        cat = ad.concat([a, b], axis=1)
        picked = ad.index_channel(cat, 2) + ad.index_channel(cat, 0)
        t = ad.transpose(ad.reshape(cat, (1, 3, 9)), (0, 2, 1))
        return _weighted(t, w) + ad.sum_(picked * picked)
    return f, {"a": a, "b": b}


def _matmul(rng):
    a, b = _p(rng, 2, 3, 4), _p(rng, 4, 5)
    w = _probe(rng, (2, 3, 5))
    return (lambda: _weighted(ad.matmul(a, b), w)), {"a": a, "b": b}


def _linear(rng):
    x, wt, bias = _p(rng, 2, 3, 4), _p(rng, 5, 4), _p(rng, 5)
    w = _probe(rng, (2, 3, 5))
    return (lambda: _weighted(ad.linear(x, wt, bias), w)), {"x": x, "weight": wt, "bias": bias}


def _conv(cin, cout, k, stride, padding, groups):
    def build(rng):
        x = _p(rng, 1, cin, 5, 5)
        wt = _p(rng, cout, cin // groups, k, k)
        bias = _p(rng, cout)
        out_shape = ad.conv2d(x, wt, bias, stride, padding, groups).shape
        w = _probe(rng, out_shape)
        return (lambda: _weighted(ad.conv2d(x, wt, bias, stride, padding, groups), w)), \
            {"x": x, "weight": wt, "bias": bias}
    return build


def _laplacian(rng):
    x = _p(rng, 1, 3, 5, 5)
    w = _probe(rng, (1, 3, 5, 5))
    return (lambda: _weighted(ad.stencil3x3(x, laplacian_kernel(3, x.dtype)), w)), {"x": x}


def _pool(mode):
    def build(rng):
        x = _distinct(rng, 1, 2, 5, 5) if mode == "max" else _p(rng, 1, 2, 5, 5)
        out_shape = ad.pool2d(x, mode, 3, 2, 1).shape
        w = _probe(rng, out_shape)
        return (lambda: _weighted(ad.pool2d(x, mode, 3, 2, 1), w)), {"x": x}
    return build


def _global_pools(rng):
    x = _distinct(rng, 2, 3, 4, 4)
    w1, w2 = _probe(rng, (2, 3, 1, 1)), _probe(rng, (2, 3, 1, 1))
    return (lambda: _weighted(ad.global_avg_pool(x), w1) + _weighted(ad.global_max_pool(x), w2)), {"x": x}


def _resize(rng):
    x = _p(rng, 1, 2, 4, 5)
    w1, w2 = _probe(rng, (1, 2, 7, 9)), _probe(rng, (1, 2, 3, 2))
    return (lambda: _weighted(ad.resize(x, 7, 9), w1) + _weighted(ad.resize(x, 3, 2), w2)), {"x": x}


def _batch_norm(rng):
    x, gamma, beta = _p(rng, 2, 3, 3, 3), _p(rng, 3), _p(rng, 3)
    rm, rv = np.zeros(3, K.default_dtype()), np.ones(3, K.default_dtype())
    w = _probe(rng, (2, 3, 3, 3))
    return (lambda: _weighted(ad.batch_norm(x, gamma, beta, rm, rv, training=True, update_stats=False), w)), \
        {"x": x, "gamma": gamma, "beta": beta}


def _layer_norm(rng):
    x, gamma, beta = _p(rng, 2, 3, 6), _p(rng, 6), _p(rng, 6)
    w = _probe(rng, (2, 3, 6))
    return (lambda: _weighted(ad.layer_norm(x, gamma, beta), w)), {"x": x, "gamma": gamma, "beta": beta}


def _weighted_loss(rng):
    z = _p(rng, 1, 1, 8, 8)
    t = np.zeros((1, 1, 8, 8), K.default_dtype())
    t[..., 2:6, 3:7] = 1
    return (lambda: weighted_bce_iou(z, t)), {"z": z}



def _lconv_gap(rng):
    module = LConv(3, 4, 3, rng=rng)
    module.train()
    x = ad.Var(rng.standard_normal((2, 3, 5, 5)).astype(K.default_dtype()))
    w = _probe(rng, (2, 4, 1, 1))
    return (lambda: _weighted(ad.global_avg_pool(module(x)), w)), dict(module.named_parameters())


def _attention(rng):
    module = SRAttention(8, 2, 2, rng=rng)
    x = ad.Var(rng.standard_normal((1, 16, 8)).astype(K.default_dtype()))
    w = _probe(rng, (1, 16, 8))
    return (lambda: _weighted(module(x, 4, 4), w)), dict(module.named_parameters())


def _full_loss(rng):
    cfg = ModelConfig.tiny()
    model = USEANet(cfg, rng=rng)
    model.train()
    x = rng.standard_normal((1, 3, cfg.input_size, cfg.input_size)).astype(K.default_dtype())
    yy, xx = np.mgrid[0:cfg.input_size, 0:cfg.input_size]
    c = cfg.input_size / 2
    gt = (((yy + 0.5 - c) ** 2 + (xx + 0.5 - c) ** 2) <= (0.3 * cfg.input_size) ** 2)
    gt = gt[None, None].astype(K.default_dtype())
    return (lambda: total_loss(model(ad.Var(x)), gt)), dict(model.named_parameters())


CASES: list[GradcheckCase] = [
    GradcheckCase("arithmetic", _arith),
    GradcheckCase("relu", _unary(ad.relu)),
    GradcheckCase("sigmoid", _unary(ad.sigmoid)),
    GradcheckCase("gelu", _unary(ad.gelu)),
    GradcheckCase("softmax", _unary(lambda x: ad.softmax(x, axis=-1))),
    GradcheckCase("bce-with-logits", _bce),
    GradcheckCase("reductions", _reductions),
    GradcheckCase("structure", _structure),
    GradcheckCase("matmul", _matmul),
    GradcheckCase("linear", _linear),
    GradcheckCase("conv2d-dense", _conv(2, 3, 3, 1, 1, 1)),
    GradcheckCase("conv2d-strided", _conv(2, 2, 3, 2, 0, 1)),
    GradcheckCase("conv2d-pointwise", _conv(3, 2, 1, 1, 0, 1)),
    GradcheckCase("conv2d-depthwise", _conv(3, 3, 3, 1, 1, 3)),
    GradcheckCase("conv2d-grouped", _conv(4, 2, 3, 1, 1, 2)),
    GradcheckCase("laplacian", _laplacian),
    GradcheckCase("avg-pool", _pool("avg")),
    GradcheckCase("max-pool", _pool("max")),
    GradcheckCase("global-pools", _global_pools),
    GradcheckCase("resize", _resize),
    GradcheckCase("batch-norm", _batch_norm),
    GradcheckCase("layer-norm", _layer_norm),
    GradcheckCase("weighted-bce-iou", _weighted_loss, precisions=("float64",)),
    GradcheckCase("lconv-gap", _lconv_gap),
    GradcheckCase("sr-attention", _attention),
    GradcheckCase("tiny-model-loss", _full_loss, max_samples=64, f64_stencil=(1e-4, 4),
                  precisions=("float64",)),
]


def run_case(case: GradcheckCase, seed: int = 0, dtype=np.float64) -> ad.GradcheckReport:
    with K.precision(dtype):
        builder, params = case.build(np.random.default_rng(seed))
        step, order = None, 2
        if np.dtype(dtype) == np.float64 and case.f64_stencil:
            step, order = case.f64_stencil
        return ad.gradcheck(builder, params, seed=seed, max_samples=case.max_samples, step=step, order=order,
                            skip_nonsmooth=case.f64_stencil is not None)


def cases_for(dtype) -> list[GradcheckCase]:
    return [c for c in CASES if np.dtype(dtype).name in c.precisions]


def run_all(seed: int = 0, dtype=np.float64, names=None) -> dict[str, ad.GradcheckReport]:
    cases = [c for c in cases_for(dtype) if names is None or c.name in names]
    return {c.name: run_case(c, seed, dtype) for c in cases}
