"""Dense numeric kernels on NCHW float arrays.

Tensors are plain ``numpy.ndarray`` values. Every kernel here is a pure
function; the brute-force references used to test them live in
:mod:`useanet.oracles`.

Storage and compute default to float32. :func:`precision` switches the
default to float64, which the gradient checker relies on.
"""

from __future__ import annotations

import contextlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

from .errors import ConfigurationError, InvalidSpecError, NumericalError, ShapeError

_state = threading.local()


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def set_default_dtype(dtype) -> None:
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ConfigurationError(f"unsupported dtype {dtype}")
    _state.dtype = dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the default floating dtype (``"float32"``/``"float64"``)."""
    prev = default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = prev


def num_threads() -> int:
    """Worker count from ``USEAN_THREADS``; 0 selects the single-threaded reference mode."""
    override = getattr(_state, "threads", None)
    if override is not None:
        return override
    raw = os.environ.get("USEAN_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"USEAN_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigurationError("USEAN_THREADS must be >= 0")
    return n


@contextlib.contextmanager
def threads(n: int):
    """Override ``USEAN_THREADS`` for the current thread."""
    if n < 0:
        raise ConfigurationError("thread count must be >= 0")
    prev = getattr(_state, "threads", None)
    _state.threads = n
    try:
        yield
    finally:
        _state.threads = prev


def as_tensor(data, dtype=None) -> np.ndarray:
    """Build a contiguous rank 1-4 float array (the package's Tensor value)."""
    arr = np.ascontiguousarray(np.asarray(data, dtype=dtype or default_dtype()))
    if not 1 <= arr.ndim <= 4:
        raise ShapeError(f"tensors have rank 1-4, got shape {arr.shape}")
    if 0 in arr.shape:
        raise ShapeError(f"tensor extents must be positive, got {arr.shape}")
    _check_finite(arr, "as_tensor")
    return arr


def _check_finite(arr: np.ndarray, where: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericalError(f"{where}: non-finite values in result")
    return arr


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


def _require_rank(x: np.ndarray, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{what} expects a rank-{rank} tensor, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution


@dataclass(frozen=True)
class ConvSpec:
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    groups: int = 1

    @classmethod
    def make(cls, kernel, stride=1, padding=0, groups=1) -> "ConvSpec":
        return cls(_pair(kernel), _pair(stride), _pair(padding), int(groups))

    def output_size(self, h: int, w: int) -> tuple[int, int]:
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        if min(kh, kw, sh, sw) < 1 or min(ph, pw) < 0:
            raise InvalidSpecError(f"invalid convolution spec {self}")
        oh = (h + 2 * ph - kh) // sh + 1
        ow = (w + 2 * pw - kw) // sw + 1
        if h + 2 * ph < kh or w + 2 * pw < kw or oh < 1 or ow < 1:
            raise InvalidSpecError(
                f"kernel {self.kernel} with padding {self.padding} does not fit a {h}x{w} input"
            )
        return oh, ow


def _validate_conv(x, weight, bias, spec: ConvSpec) -> tuple[int, int]:
    _require_rank(x, 4, "conv2d input")
    _require_rank(weight, 4, "conv2d weight")
    n, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    g = spec.groups
    if g < 1 or c % g or o % g:
        raise InvalidSpecError(f"groups={g} must divide in ({c}) and out ({o}) channels")
    if cg != c // g:
        raise ShapeError(
            f"weight {weight.shape} expects {cg * g} input channels, input has {c} (groups={g})"
        )
    if (kh, kw) != spec.kernel:
        raise ShapeError(f"weight kernel {(kh, kw)} disagrees with spec {spec.kernel}")
    if bias is not None and bias.shape != (o,):
        raise ShapeError(f"bias shape {bias.shape} != ({o},)")
    return spec.output_size(h, w)


def _pad(x: np.ndarray, ph: int, pw: int, value=0.0) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=value)


def _windows(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, oh: int, ow: int) -> np.ndarray:
    """Strided view [N, C, OH, OW, kh, kw] over a padded input."""
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, : sh * (oh - 1) + 1 : sh, : sw * (ow - 1) + 1 : sw]


def _is_pointwise(spec: ConvSpec) -> bool:
    return spec.kernel == (1, 1) and spec.stride == (1, 1) and spec.padding == (0, 0)


def _is_depthwise(x, weight, spec: ConvSpec) -> bool:
    return spec.groups == x.shape[1] and weight.shape[0] == x.shape[1] and weight.shape[1] == 1


def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1) -> np.ndarray:
    """Cross-correlation of an NCHW input with an [O, C/groups, kh, kw] kernel."""
    spec = ConvSpec.make(weight.shape[2:], stride, padding, groups)
    oh, ow = _validate_conv(x, weight, bias, spec)
    if _is_pointwise(spec) and spec.groups == 1:
        n, c, h, w = x.shape
        out = np.matmul(weight.reshape(weight.shape[0], c), x.reshape(n, c, h * w))
        out = out.reshape(n, -1, h, w)
    elif _is_depthwise(x, weight, spec):
        out = _dw_forward(x, weight, spec, oh, ow)
    elif spec.groups == 1:
        out = _dense_forward(x, weight, spec, oh, ow)
    else:
        out = _grouped_forward(x, weight, spec, oh, ow)
    if bias is not None:
        out = out + bias.reshape(1, -1, 1, 1)
    return _check_finite(np.ascontiguousarray(out), "conv2d")


def dwconv2d(x, weight, bias=None, stride=1, padding=0) -> np.ndarray:
    """Depthwise convolution: each channel with its own [1, kh, kw] kernel."""
    _require_rank(x, 4, "dwconv2d input")
    c = x.shape[1]
    if weight.shape[0] != c or weight.shape[1] != 1:
        raise InvalidSpecError(
            f"depthwise weight must be [{c}, 1, kh, kw] (groups = channels), got {weight.shape}"
        )
    return conv2d(x, weight, bias, stride, padding, groups=c)


def stencil3x3(x, kernel) -> np.ndarray:
    """Depthwise 3x3 cross-correlation, stride 1, zero padding 1.

    The eight off-centre taps are summed as a pairwise tree and the centre
    tap is added last. On a constant region every partial sum is then a
    power-of-two multiple of the value, so a zero-sum stencil returns exactly
    0 there instead of a few ulps of rounding.
    """
    x, kernel = np.asarray(x), np.asarray(kernel)
    _require_rank(x, 4, "stencil3x3 input")
    if kernel.shape != (x.shape[1], 1, 3, 3):
        raise ShapeError(f"stencil kernel must be [{x.shape[1]}, 1, 3, 3], got {kernel.shape}")
    h, w = x.shape[2:]
    xp = _pad(x, 1, 1)
    terms = [xp[:, :, i : i + h, j : j + w] * kernel[:, 0, i, j].reshape(1, -1, 1, 1)
             for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    while len(terms) > 1:
        terms = [terms[k] + terms[k + 1] for k in range(0, len(terms), 2)]
    return terms[0] + x * kernel[:, 0, 1, 1].reshape(1, -1, 1, 1)


def _im2col(x, spec: ConvSpec, oh: int, ow: int) -> np.ndarray:
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    n, c = x.shape[:2]
    win = _windows(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)


def _dense_forward(x, weight, spec, oh, ow):
    n = x.shape[0]
    o = weight.shape[0]
    cols = _im2col(x, spec, oh, ow)
    wmat = weight.reshape(o, -1)
    threads = num_threads()
    if threads > 0 and o >= 2:
        chunks = np.array_split(np.arange(o), min(threads, o))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda idx: cols @ wmat[idx].T, chunks))
        out = np.concatenate(parts, axis=1)
    else:
        out = cols @ wmat.T
    return out.reshape(n, oh, ow, o).transpose(0, 3, 1, 2)


def _dw_forward(x, weight, spec, oh, ow):
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    xp = _pad(x, ph, pw)
    out = np.zeros((x.shape[0], x.shape[1], oh, ow), dtype=np.result_type(x, weight))
    for i in range(kh):
        for j in range(kw):
            tap = weight[:, 0, i, j].reshape(1, -1, 1, 1)
            out += xp[:, :, i : i + sh * (oh - 1) + 1 : sh, j : j + sw * (ow - 1) + 1 : sw] * tap
    return out


def _grouped_forward(x, weight, spec, oh, ow):
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    n, c = x.shape[:2]
    g = spec.groups
    o = weight.shape[0]
    win = _windows(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow).reshape(n, g, c // g, oh, ow, kh, kw)
    wg = weight.reshape(g, o // g, c // g, kh, kw)
    out = np.einsum("ngchwij,gocij->ngohw", win, wg, optimize=True)
    return out.reshape(n, o, oh, ow)


def conv2d_backward(dout, x, weight, stride=1, padding=0, groups=1, need_input=True):
    """Gradients (dx, dweight, dbias) of :func:`conv2d` given the output gradient."""
    spec = ConvSpec.make(weight.shape[2:], stride, padding, groups)
    oh, ow = spec.output_size(*x.shape[2:])
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    n, c, h, w = x.shape
    o = weight.shape[0]
    db = dout.sum(axis=(0, 2, 3))
    dx = None
    if _is_pointwise(spec) and groups == 1:
        d = dout.reshape(n, o, h * w)
        xr = x.reshape(n, c, h * w)
        dw = np.matmul(d, xr.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        if need_input:
            dx = np.matmul(weight.reshape(o, c).T, d).reshape(x.shape)
        return dx, dw, db
    if _is_depthwise(x, weight, spec):
        xp = _pad(x, ph, pw)
        dw = np.zeros_like(weight)
        dxp = np.zeros_like(xp) if need_input else None
        for i in range(kh):
            for j in range(kw):
                sl = (slice(None), slice(None),
                      slice(i, i + sh * (oh - 1) + 1, sh), slice(j, j + sw * (ow - 1) + 1, sw))
                dw[:, 0, i, j] = (dout * xp[sl]).sum(axis=(0, 2, 3))
                if need_input:
                    dxp[sl] += dout * weight[:, 0, i, j].reshape(1, -1, 1, 1)
        if need_input:
            dx = dxp[:, :, ph : ph + h, pw : pw + w]
        return dx, dw, db
    if groups == 1:
        cols = _im2col(x, spec, oh, ow)
        dmat = dout.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = (dmat.T @ cols).reshape(weight.shape)
        if need_input:
            dcols = (dmat @ weight.reshape(o, -1)).reshape(n, oh, ow, c, kh, kw)
            dx = _col2im(dcols.transpose(0, 3, 1, 2, 4, 5), x.shape, spec, oh, ow)
        return dx, dw, db
    g = groups
    win = _windows(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow).reshape(n, g, c // g, oh, ow, kh, kw)
    dg = dout.reshape(n, g, o // g, oh, ow)
    dw = np.einsum("ngohw,ngchwij->gocij", dg, win, optimize=True).reshape(weight.shape)
    if need_input:
        wg = weight.reshape(g, o // g, c // g, kh, kw)
        dwin = np.einsum("ngohw,gocij->ngchwij", dg, wg, optimize=True)
        dx = _col2im(dwin.reshape(n, c, oh, ow, kh, kw), x.shape, spec, oh, ow)
    return dx, dw, db


def _col2im(dwin, xshape, spec, oh, ow):
    """Scatter-add window gradients [N, C, OH, OW, kh, kw] back onto the input."""
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    n, c, h, w = xshape
    dxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=dwin.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + sh * (oh - 1) + 1 : sh, j : j + sw * (ow - 1) + 1 : sw] += dwin[..., i, j]
    return dxp[:, :, ph : ph + h, pw : pw + w]


# ---------------------------------------------------------------------------
# pooling


def _pool_geometry(x, window, stride, padding):
    _require_rank(x, 4, "pool2d input")
    kh, kw = _pair(window)
    sh, sw = _pair(stride if stride is not None else window)
    ph, pw = _pair(padding)
    if ph * 2 > kh or pw * 2 > kw:
        raise InvalidSpecError("pool padding may be at most half the window")
    spec = ConvSpec((kh, kw), (sh, sw), (ph, pw))
    return spec, spec.output_size(*x.shape[2:])


def pool2d(x, mode: str, window, stride=None, padding=0) -> np.ndarray:
    """Average or max pooling. Average pooling counts padded zeros in the divisor."""
    spec, (oh, ow) = _pool_geometry(x, window, stride, padding)
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    if mode == "avg":
        win = _windows(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow)
        out = win.sum(axis=(4, 5)) / (kh * kw)
    elif mode == "max":
        win = _windows(_pad(x, ph, pw, -np.inf), kh, kw, sh, sw, oh, ow)
        out = win.max(axis=(4, 5))
    else:
        raise InvalidSpecError(f"unknown pooling mode {mode!r}")
    return _check_finite(np.ascontiguousarray(out, dtype=x.dtype), f"{mode}_pool2d")


def pool2d_backward(dout, x, mode: str, window, stride=None, padding=0) -> np.ndarray:
    """Input gradient of :func:`pool2d`; max routes to the first maximum in scan order."""
    spec, (oh, ow) = _pool_geometry(x, window, stride, padding)
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    n, c, h, w = x.shape
    dxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=dout.dtype)
    if mode == "max":
        win = _windows(_pad(x, ph, pw, -np.inf), kh, kw, sh, sw, oh, ow)
        arg = win.reshape(n, c, oh, ow, kh * kw).argmax(axis=-1)
    for i in range(kh):
        for j in range(kw):
            sl = (slice(None), slice(None),
                  slice(i, i + sh * (oh - 1) + 1, sh), slice(j, j + sw * (ow - 1) + 1, sw))
            if mode == "avg":
                dxp[sl] += dout / (kh * kw)
            else:
                dxp[sl] += np.where(arg == i * kw + j, dout, 0)
    return dxp[:, :, ph : ph + h, pw : pw + w]


def global_avg_pool(x) -> np.ndarray:
    _require_rank(x, 4, "global_avg_pool input")
    return x.mean(axis=(2, 3), keepdims=True)


def global_max_pool(x) -> np.ndarray:
    _require_rank(x, 4, "global_max_pool input")
    return x.max(axis=(2, 3), keepdims=True)


def first_argmax_mask(x, axis) -> np.ndarray:
    """Boolean mask selecting the first maximal element along ``axis`` (scan order)."""
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % x.ndim for a in axes)
    rest = [a for a in range(x.ndim) if a not in axes]
    moved = np.transpose(x, rest + list(axes))
    flat = moved.reshape(moved.shape[: len(rest)] + (-1,))
    idx = flat.argmax(axis=-1)
    mask = np.zeros(flat.shape, dtype=bool)
    np.put_along_axis(mask, idx[..., None], True, axis=-1)
    mask = mask.reshape(moved.shape)
    return np.transpose(mask, np.argsort(rest + list(axes)))


# ---------------------------------------------------------------------------
# bilinear resize (half-pixel centres, align_corners=False)


def resize_matrix(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """[n_out, n_in] interpolation matrix along one axis."""
    if n_in < 1 or n_out < 1:
        raise ShapeError(f"resize extents must be >= 1, got {n_in} -> {n_out}")
    m = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for d in range(n_out):
        src = max((d + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[d, i0] += 1.0 - lam
        m[d, i1] += lam
    return m.astype(dtype)


def bilinear_resize(x, out_h: int, out_w: int) -> np.ndarray:
    if x.ndim < 2:
        raise ShapeError(f"resize needs at least 2 spatial dims, got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = x.shape[-2:]
    if (h, w) == (out_h, out_w):
        return x.copy()
    rh = resize_matrix(h, out_h, x.dtype)
    rw = resize_matrix(w, out_w, x.dtype)
    return _check_finite(np.matmul(np.matmul(rh, x), rw.T), "bilinear_resize")


def bilinear_resize_backward(dout, in_h: int, in_w: int) -> np.ndarray:
    out_h, out_w = dout.shape[-2:]
    if (in_h, in_w) == (out_h, out_w):
        return dout.copy()
    rh = resize_matrix(in_h, out_h, dout.dtype)
    rw = resize_matrix(in_w, out_w, dout.dtype)
    return np.matmul(np.matmul(rh.T, dout), rw)


def nearest_resize(x, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resize sampling at half-pixel centres: floor((dst + 0.5) * in / out)."""
    h, w = x.shape[-2:]
    rows = np.minimum(((2 * np.arange(out_h) + 1) * h) // (2 * out_h), h - 1)
    cols = np.minimum(((2 * np.arange(out_w) + 1) * w) // (2 * out_w), w - 1)
    return x[..., rows[:, None], cols[None, :]]


# ---------------------------------------------------------------------------
# normalization


def batch_norm(x, gamma, beta, running_mean=None, running_var=None, *, training: bool,
               eps: float = 1e-5):
    """Per-channel normalization of an NCHW tensor.

    Returns ``(y, mean, var)`` where mean/var are the statistics actually used
    (biased batch variance in training mode).
    """
    _require_rank(x, 4, "batch_norm input")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm affine params must have shape ({c},)")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = ((x - mean.reshape(1, c, 1, 1)) ** 2).mean(axis=(0, 2, 3))
    else:
        if running_mean is None or running_var is None:
            raise ConfigurationError("batch_norm in inference mode needs running statistics")
        mean, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    y = (x - mean.reshape(1, c, 1, 1)) * (gamma * inv).reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)
    return _check_finite(y.astype(x.dtype, copy=False), "batch_norm"), mean, var


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> np.ndarray:
    """Normalize over the last axis."""
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"layer_norm affine params must have shape ({c},)")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    y = (x - mean) / np.sqrt(var + eps) * gamma + beta
    return _check_finite(y.astype(x.dtype, copy=False), "layer_norm")


# ---------------------------------------------------------------------------
# activations


def relu(x) -> np.ndarray:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def sigmoid(x) -> np.ndarray:
    return expit(x)


def gelu(x) -> np.ndarray:
    return (0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))).astype(x.dtype, copy=False)


def gelu_grad(x) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return (cdf + x * pdf).astype(x.dtype, copy=False)


def softmax(x, axis: int = -1) -> np.ndarray:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} out of range for shape {x.shape}")
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def activation(x, kind: str, axis: int = -1) -> np.ndarray:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "gelu":
        return gelu(x)
    if kind == "softmax":
        return softmax(x, axis)
    raise ConfigurationError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# linear algebra and structural ops


def matmul(a, b) -> np.ndarray:
    _require_rank(a, 2, "matmul lhs")
    _require_rank(b, 2, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    return _check_finite(a @ b, "matmul")


def add(a, b) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch {a.shape} vs {b.shape}")
    return a + b


def mul(a, b) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch {a.shape} vs {b.shape}")
    return a * b


def scale(a, s: float) -> np.ndarray:
    return (a * s).astype(a.dtype, copy=False)


def concat_channels(tensors) -> np.ndarray:
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != 4 or t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"cannot concat {t.shape} with {ref} over channels")
    return np.concatenate(tensors, axis=1)
