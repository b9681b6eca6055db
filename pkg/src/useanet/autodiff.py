"""Reverse-mode differentiation over the kernels in :mod:`useanet.kernels`.

A :class:`Var` wraps an ndarray value plus the closure that maps its output
gradient to gradients of its parents. ``backward`` walks the graph once in
reverse topological order.
"""

from __future__ import annotations

import contextlib
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels as K
from .errors import ContractError, ShapeError, TrainingError

_local = threading.local()


def grad_enabled() -> bool:
    return getattr(_local, "grad", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _local.grad = False
    try:
        yield
    finally:
        _local.grad = prev


# Set by the profiler while it traces a forward pass.
def _recorder():
    return getattr(_local, "recorder", None)


@contextlib.contextmanager
def recording(recorder):
    prev = _recorder()
    _local.recorder = recorder
    try:
        yield recorder
    finally:
        _local.recorder = prev


def _count_macs(op: str, macs: int) -> None:
    rec = _recorder()
    if rec is not None:
        rec.add_macs(op, int(macs))


class Var:
    """A graph node: value, op tag, parents and a gradient slot."""

    __array_priority__ = 100

    def __init__(self, value, requires_grad: bool = False, op: str = "leaf", name: str | None = None):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=K.default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op = op
        self.name = name
        self._parents: tuple[Var, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def dtype(self):
        return self.value.dtype

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


class Parameter(Var):
    """A trainable leaf."""

    def __init__(self, value, name: str | None = None):
        super().__init__(np.ascontiguousarray(value), requires_grad=True, op="param", name=name)


def as_var(x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(np.asarray(x, dtype=K.default_dtype()))


def _result(value: np.ndarray, parents: Sequence[Var], backward: Callable, op: str) -> Var:
    rec = _recorder()
    if rec is not None:
        for p in parents:
            if isinstance(p, Parameter):
                rec.touch(p)
    rg = grad_enabled() and any(p.requires_grad for p in parents)
    out = Var(value, rg, op=op)
    if rg:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _result(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _result(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _result(a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
                   "mul")


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)

    def back(g):
        return (_unbroadcast(g / b.value, a.shape),
                _unbroadcast(-g * a.value / (b.value * b.value), b.shape))

    return _result(a.value / b.value, (a, b), back, "div")


def relu(x: Var) -> Var:
    mask = x.value > 0
    return _result(K.relu(x.value), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Var) -> Var:
    y = K.sigmoid(x.value)
    return _result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def gelu(x: Var) -> Var:
    return _result(K.gelu(x.value), (x,), lambda g: (g * K.gelu_grad(x.value),), "gelu")


def softmax(x: Var, axis: int = -1) -> Var:
    y = K.softmax(x.value, axis)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (x,), back, "softmax")


def bce_with_logits(z: Var, target: np.ndarray) -> Var:
    """Elementwise binary cross-entropy of sigmoid(z) against ``target``."""
    zv = z.value
    loss = np.maximum(zv, 0) - zv * target + np.log1p(np.exp(-np.abs(zv)))
    return _result(loss.astype(zv.dtype, copy=False), (z,),
                   lambda g: (g * (K.sigmoid(zv) - target),), "bce_with_logits")


# ---------------------------------------------------------------------------
# reductions and structure


def sum_(x: Var, axis=None, keepdims=False) -> Var:
    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.asarray(x.value.sum(axis=axis, keepdims=keepdims)), (x,), back, "sum")


def mean(x: Var, axis=None, keepdims=False) -> Var:
    n = x.value.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)

    return _result(np.asarray(x.value.mean(axis=axis, keepdims=keepdims)), (x,), back, "mean")


def reduce_max(x: Var, axis, keepdims=True) -> Var:
    """Max over ``axis``; the gradient goes to the first maximum in scan order."""
    out = x.value.max(axis=axis, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        mask = K.first_argmax_mask(x.value, axis)
        return (np.where(mask, g, 0).astype(x.dtype),)

    return _result(out, (x,), back, "reduce_max")


def reshape(x: Var, shape) -> Var:
    return _result(x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Var, axes) -> Var:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(np.ascontiguousarray(x.value.transpose(axes)), (x,),
                   lambda g: (g.transpose(inv),), "transpose")


def concat(xs: Sequence[Var], axis: int = 1) -> Var:
    xs = [as_var(x) for x in xs]
    if axis == 1:
        value = K.concat_channels([x.value for x in xs])
    else:
        value = np.concatenate([x.value for x in xs], axis=axis)
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(value, xs, back, "concat")


def cast(x: Var, dtype) -> Var:
    """Change precision; the gradient is cast back to the input's dtype."""
    return _result(x.value.astype(dtype), (x,), lambda g: (g.astype(x.dtype),), "cast")


def index_channel(x: Var, i: int) -> Var:
    """Slice ``x[:, i:i+1]`` keeping rank."""
    def back(g):
        full = np.zeros_like(x.value)
        full[:, i : i + 1] = g
        return (full,)

    return _result(x.value[:, i : i + 1].copy(), (x,), back, "index")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Var, b: Var) -> Var:
    """Batched matmul with numpy broadcasting over leading axes."""
    a, b = as_var(a), as_var(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.value, b.value)
    _count_macs("matmul", out.size * a.shape[-1])

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.value, -1, -2))
        gb = np.matmul(np.swapaxes(a.value, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(out, (a, b), back, "matmul")


def linear(x: Var, weight: Var, bias: Var | None = None) -> Var:
    """``x @ weight.T + bias`` over the last axis; weight is [out, in]."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear expects {weight.shape[1]} features, got {x.shape}")
    lead = x.shape[:-1]
    x2 = x.value.reshape(-1, x.shape[-1])
    out = x2 @ weight.value.T
    _count_macs("linear", out.size * x.shape[-1])
    if bias is not None:
        out = out + bias.value
    out = out.reshape(*lead, weight.shape[0])

    def back(g):
        g2 = g.reshape(-1, weight.shape[0])
        gx = (g2 @ weight.value).reshape(x.shape)
        gw = g2.T @ x2
        gb = g2.sum(axis=0) if bias is not None else None
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return _result(out, parents, back, "linear")


# ---------------------------------------------------------------------------
# convolution, pooling, resize, normalization


def conv2d(x: Var, weight: Var, bias: Var | None = None, stride=1, padding=0, groups=1) -> Var:
    out = K.conv2d(x.value, weight.value, None if bias is None else bias.value, stride, padding, groups)
    o, cg, kh, kw = weight.shape
    _count_macs("conv2d", out.size * cg * kh * kw)

    def back(g):
        dx, dw, db = K.conv2d_backward(g, x.value, weight.value, stride, padding, groups,
                                       need_input=x.requires_grad)
        return (dx, dw, db) if bias is not None else (dx, dw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return _result(out, parents, back, "conv2d")


def stencil3x3(x: Var, kernel: np.ndarray) -> Var:
    """Fixed (non-trainable) depthwise 3x3 stencil with zero padding 1."""
    kernel = kernel.astype(x.dtype)
    out = K.stencil3x3(x.value, kernel)
    _count_macs("conv2d", out.size * 9)
    flipped = np.ascontiguousarray(kernel[:, :, ::-1, ::-1])
    return _result(out, (x,), lambda g: (K.stencil3x3(g, flipped),), "stencil3x3")


def pool2d(x: Var, mode: str, window, stride=None, padding=0) -> Var:
    out = K.pool2d(x.value, mode, window, stride, padding)
    return _result(out, (x,),
                   lambda g: (K.pool2d_backward(g, x.value, mode, window, stride, padding),),
                   f"{mode}_pool2d")


def global_avg_pool(x: Var) -> Var:
    return _result(K.global_avg_pool(x.value), (x,),
                   lambda g: (np.broadcast_to(g / (x.shape[2] * x.shape[3]), x.shape).astype(x.dtype),),
                   "global_avg_pool")


def global_max_pool(x: Var) -> Var:
    out = reduce_max(x, axis=(2, 3), keepdims=True)
    out.op = "global_max_pool"
    return out


def resize(x: Var, out_h: int, out_w: int) -> Var:
    h, w = x.shape[-2:]
    out = K.bilinear_resize(x.value, out_h, out_w)
    return _result(out, (x,), lambda g: (K.bilinear_resize_backward(g, h, w),), "resize")


def batch_norm(x: Var, gamma: Var, beta: Var, running_mean: np.ndarray, running_var: np.ndarray, *,
               training: bool, momentum: float = 0.1, eps: float = 1e-5, update_stats: bool = True) -> Var:
    """Batch normalization; in training mode updates the running buffers in place."""
    y, mu, var = K.batch_norm(x.value, gamma.value, beta.value, running_mean, running_var,
                              training=training, eps=eps)
    c = x.shape[1]
    inv = (1.0 / np.sqrt(var + eps)).reshape(1, c, 1, 1).astype(x.dtype)
    xhat = (x.value - mu.reshape(1, c, 1, 1)) * inv
    if training and update_stats:
        running_mean *= 1 - momentum
        running_mean += momentum * mu.astype(running_mean.dtype)
        running_var *= 1 - momentum
        running_var += momentum * var.astype(running_var.dtype)

    def back(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gamma.value.reshape(1, c, 1, 1)
        if not training:
            return dxhat * inv, dgamma, dbeta
        m = x.value.size // c
        dx = inv / m * (m * dxhat - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
        return dx, dgamma, dbeta

    return _result(y, (x, gamma, beta), back, "batch_norm")


def layer_norm(x: Var, gamma: Var, beta: Var, eps: float = 1e-6) -> Var:
    y = K.layer_norm(x.value, gamma.value, beta.value, eps)
    mu = x.value.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(((x.value - mu) ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = (x.value - mu) * inv
    lead = tuple(range(x.ndim - 1))

    def back(g):
        dxhat = g * gamma.value
        c = x.shape[-1]
        dx = inv / c * (c * dxhat - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        return dx.astype(x.dtype), (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(y, (x, gamma, beta), back, "layer_norm")


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(root: Var) -> list[Var]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Var) -> None:
    """Populate ``.grad`` on every trainable leaf reachable from a scalar ``loss``.

    Leaf gradients accumulate across calls, as in most frameworks; call
    ``zero_grad`` between steps.
    """
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any trainable leaf")
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if g.shape != node.shape:
                raise ContractError(f"gradient shape {g.shape} != value shape {node.shape}")
            g = g.astype(node.dtype, copy=False)
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tolerance: float
    dtype: str
    ops: set[str] = field(default_factory=set)
    skipped: int = 0

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def default_step(dtype) -> float:
    return 1e-6 if np.dtype(dtype) == np.float64 else 1e-3


def default_tolerance(dtype) -> float:
    return 1e-6 if np.dtype(dtype) == np.float64 else 1e-3


def _graph_ops(root: Var) -> set[str]:
    ops, seen, stack = set(), set(), [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        ops.add(node.op)
        stack.extend(node._parents)
    return ops - {"leaf", "param"}


def _central(builder, flat: np.ndarray, idx: int, h: float) -> float:
    orig = flat[idx]
    with no_grad():
        flat[idx] = orig + h
        up = float(builder().value)
        flat[idx] = orig - h
        down = float(builder().value)
    flat[idx] = orig
    return (up - down) / (2 * h)


def gradcheck(builder: Callable[[], Var], params: dict[str, Var], *, seed: int = 0,
              step: float | None = None, tolerance: float | None = None,
              max_samples: int | None = None, order: int = 2,
              skip_nonsmooth: bool = False) -> GradcheckReport:
    """Compare analytic gradients with central finite differences.

    ``builder`` must recompute the scalar loss from the current values of
    ``params``. At most ``max_samples`` entries are probed in total, spread
    over the parameters; each parameter's error is the largest absolute
    discrepancy over its probed entries divided by the largest gradient
    magnitude among them.

    The denominator is floored at ``1e-3`` of the largest analytic gradient in
    the whole graph, so a tensor whose true gradient vanishes (a key bias
    under softmax shift invariance, say) is judged on an absolute scale
    rather than by the ratio of two rounding residues.

    ``order`` selects the 2-point or 4-point (Richardson) central stencil.
    With ``skip_nonsmooth`` the quotients at h and 2h must agree to within
    the tolerance; if they do not, a relu/max kink lies within 2h and the entry is retried at h/10 and
    h/100. Entries kinked at every step are replaced by another entry and
    counted in ``report.skipped``.
    """
    if order not in (2, 4):
        raise ContractError(f"stencil order must be 2 or 4, got {order}")
    dtype = next(iter(params.values())).dtype
    step = step or default_step(dtype)
    tolerance = tolerance or default_tolerance(dtype)
    with no_grad():
        first = builder().value.copy()
        second = builder().value.copy()
    if first.shape != second.shape or not np.array_equal(first, second):
        raise ContractError("builder is not deterministic: two forward passes disagree")

    for p in params.values():
        p.grad = None
    loss = builder()
    ops = _graph_ops(loss)
    backward(loss)

    rng = np.random.default_rng(seed)
    names = list(params)
    global_scale = max((float(np.abs(p.grad).max()) for p in params.values()
                        if p.grad is not None and p.grad.size), default=0.0)
    floor = max(1e-3 * global_scale, np.finfo(np.float64).tiny)
    steps = (step, step / 10, step / 100) if skip_nonsmooth else (step,)
    if max_samples is None:
        budget = {n: params[n].value.size for n in names}
    else:
        budget = dict.fromkeys(names, 0)
        for i in range(max_samples):
            budget[names[i % len(names)]] += 1
    errors, skipped = {}, 0
    for name in names:
        p = params[name]
        k = min(budget[name], p.value.size)
        if k == 0:
            continue
        grad = (p.grad if p.grad is not None else np.zeros_like(p.value)).reshape(-1)
        flat = p.value.reshape(-1)
        analytic, numeric = [], []
        for idx in rng.permutation(p.value.size):
            if len(numeric) == k:
                break
            est = None
            for h in steps:
                d1 = _central(builder, flat, idx, h)
                if order == 2 and not skip_nonsmooth:
                    est = d1
                    break
                d2 = _central(builder, flat, idx, 2 * h)
                if skip_nonsmooth and abs(d1 - d2) > tolerance * max(abs(d1), abs(d2), floor):
                    continue
                est = (4 * d1 - d2) / 3 if order == 4 else d1
                break
            if est is None:
                skipped += 1
                continue
            analytic.append(float(grad[idx]))
            numeric.append(est)
        if not numeric:
            continue
        analytic, numeric = np.array(analytic), np.array(numeric)
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
        errors[name] = float(np.abs(analytic - numeric).max() / scale)
    return GradcheckReport(errors, tolerance, str(np.dtype(dtype)), ops, skipped)


# ---------------------------------------------------------------------------
# optimization


def global_grad_norm(params: Iterable[Var]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def clip_grad_norm(params: Sequence[Var], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * factor).astype(p.dtype)
    return norm


class Adam:
    """Adam with bias correction and global-norm gradient clipping before each update."""

    def __init__(self, params: dict[str, Var] | Sequence[tuple[str, Var]], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 max_norm: float | None = 1.0):
        self.params = list(params.items() if isinstance(params, dict) else params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.max_norm = max_norm
        self.t = 0
        self.m = {name: np.zeros_like(p.value) for name, p in self.params}
        self.v = {name: np.zeros_like(p.value) for name, p in self.params}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self) -> float:
        """Apply one update; returns the pre-clipping gradient norm."""
        for name, p in self.params:
            if p.grad is not None and not np.isfinite(p.grad).all():
                raise TrainingError(f"non-finite gradient for parameter {name!r}")
        vars_ = [p for _, p in self.params]
        norm = clip_grad_norm(vars_, self.max_norm) if self.max_norm else global_grad_norm(vars_)
        self.t += 1
        b1, b2 = self.betas
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * p.grad * p.grad
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.value -= update.astype(p.dtype)
        return norm


class ReduceLROnPlateau:
    """Halve (``factor``) the optimizer's lr after ``patience`` evaluations without improvement."""

    def __init__(self, optimizer: Adam, factor: float = 0.5, patience: int = 10, min_lr: float = 0.0):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.bad = 0

    def step(self, value: float) -> float:
        if value < self.best:
            self.best = value
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.optimizer.lr = max(self.optimizer.lr * self.factor, self.min_lr)
                self.bad = 0
        return self.optimizer.lr
