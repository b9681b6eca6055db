"""Minimal module system: parameter registration, buffers, train/eval, state dicts."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .errors import ShapeMismatchError

BUFFER_SUFFIXES = ("running_mean", "running_var")


class ParameterStore(OrderedDict):
    """Name -> ndarray map holding trainable tensors and buffers.

    Buffers are recognised by name (``running_mean`` / ``running_var``).
    """

    @staticmethod
    def is_buffer(name: str) -> bool:
        return name.rsplit(".", 1)[-1] in BUFFER_SUFFIXES

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.items() if not self.is_buffer(k)}

    def buffers(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.items() if self.is_buffer(k)}

    def num_parameters(self) -> int:
        return int(sum(v.size for k, v in self.items() if not self.is_buffer(k)))


class Module:
    """Base class; subclasses assign Parameters, Modules and ModuleLists as attributes."""

    category: str | None = None

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, ad.Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def __call__(self, *args, **kwargs):
        rec = ad._recorder()
        if rec is None:
            return self.forward(*args, **kwargs)
        rec.enter(self)
        try:
            return self.forward(*args, **kwargs)
        finally:
            rec.exit()

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, mod in self._modules.items():
            yield from mod.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, ad.Parameter]]:
        for mname, mod in self.named_modules(prefix):
            for pname, p in mod._params.items():
                yield (f"{mname}.{pname}" if mname else pname), p

    def parameters(self) -> list[ad.Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for mname, mod in self.named_modules():
            for bname, b in mod._buffers.items():
                yield (f"{mname}.{bname}" if mname else bname), b

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for _, mod in self.named_modules():
            object.__setattr__(mod, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> ParameterStore:
        store = ParameterStore()
        for name, p in self.named_parameters():
            store[name] = p.value.copy()
        for name, b in self.named_buffers():
            store[name] = b.copy()
        return ParameterStore(sorted(store.items()))

    def load_state_dict(self, store: dict[str, np.ndarray]) -> None:
        """Copy values in place; any missing, extra or mis-shaped entry raises
        :class:`ShapeMismatchError` naming the first offender in sorted order."""
        targets: dict[str, np.ndarray] = {n: p.value for n, p in self.named_parameters()}
        targets.update(self.named_buffers())
        for name in sorted(set(targets) | set(store)):
            if name not in store:
                raise ShapeMismatchError(name, targets[name].shape, None)
            if name not in targets:
                raise ShapeMismatchError(name, None, np.shape(store[name]))
            if targets[name].shape != tuple(np.shape(store[name])):
                raise ShapeMismatchError(name, targets[name].shape, np.shape(store[name]))
        for name, dst in targets.items():
            dst[...] = np.asarray(store[name], dtype=dst.dtype)


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


# ---------------------------------------------------------------------------
# initialisers


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) truncated to +-2 std (out-of-range draws are redrawn)."""
    vals = rng.standard_normal(shape)
    bad = np.abs(vals) > 2.0
    while bad.any():
        vals[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(vals) > 2.0
    return (vals * std).astype(K.default_dtype())


def kaiming_normal(rng: np.random.Generator, shape, fan: int) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan)).astype(K.default_dtype())


def zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=K.default_dtype())


def ones(shape) -> np.ndarray:
    return np.ones(shape, dtype=K.default_dtype())


# ---------------------------------------------------------------------------
# layers


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, *, stride: int = 1, padding: int = 0,
                 groups: int = 1, bias: bool = True, rng: np.random.Generator, init: str = "fan_out"):
        super().__init__()
        self.cin, self.cout, self.kernel = cin, cout, kernel
        self.stride, self.padding, self.groups = stride, padding, groups
        shape = (cout, cin // groups, kernel, kernel)
        if init == "fan_out":
            # fan-out normal init used by the pyramid-transformer family
            self.weight = ad.Parameter(kaiming_normal(rng, shape, kernel * kernel * cout // groups))
        elif init == "fan_in":
            self.weight = ad.Parameter(kaiming_normal(rng, shape, kernel * kernel * cin // groups))
        elif init == "zeros":
            self.weight = ad.Parameter(zeros(shape))
        else:
            self.weight = ad.Parameter(trunc_normal(rng, shape))
        self.bias = ad.Parameter(zeros((cout,))) if bias else None

    def forward(self, x):
        return ad.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class Linear(Module):
    def __init__(self, fin: int, fout: int, *, bias: bool = True, rng: np.random.Generator):
        super().__init__()
        self.weight = ad.Parameter(trunc_normal(rng, (fout, fin)))
        self.bias = ad.Parameter(zeros((fout,))) if bias else None

    def forward(self, x):
        return ad.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        super().__init__()
        self.eps = eps
        self.weight = ad.Parameter(ones((dim,)))
        self.bias = ad.Parameter(zeros((dim,)))

    def forward(self, x):
        return ad.layer_norm(x, self.weight, self.bias, self.eps)


class BatchNorm2d(Module):
    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.weight = ad.Parameter(ones((channels,)))
        self.bias = ad.Parameter(zeros((channels,)))
        self.register_buffer("running_mean", zeros((channels,)))
        self.register_buffer("running_var", ones((channels,)))

    def forward(self, x):
        return ad.batch_norm(x, self.weight, self.bias, self.running_mean, self.running_var,
                             training=self.training, momentum=self.momentum, eps=self.eps,
                             update_stats=ad.grad_enabled())
