"""Brute-force reference implementations of the kernels.

Everything here is written as explicit scalar loops in float64 so that it
shares no code path with :mod:`useanet.kernels`. Slow by design; only used
for verification on small shapes.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0), groups=1):
    n, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    og = o // groups
    out = np.zeros((n, o, oh, ow))
    for b in range(n):
        for oc in range(o):
            g = oc // og
            for y in range(oh):
                for xx in range(ow):
                    acc = 0.0 if bias is None else float(bias[oc])
                    for ic in range(cg):
                        cin = g * cg + ic
                        for i in range(kh):
                            iy = y * sh + i - ph
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = xx * sw + j - pw
                                if ix < 0 or ix >= w:
                                    continue
                                acc += float(x[b, cin, iy, ix]) * float(weight[oc, ic, i, j])
                    out[b, oc, y, xx] = acc
    return out


def dwconv2d(x, weight, stride=(1, 1), padding=(0, 0)):
    """Per-channel loop: each channel convolved alone as a 1-channel conv."""
    chans = [
        conv2d(x[:, ch : ch + 1], weight[ch : ch + 1], None, stride, padding)
        for ch in range(x.shape[1])
    ]
    return np.concatenate(chans, axis=1)


def pool2d(x, mode, window, stride, padding=(0, 0)):
    n, c, h, w = x.shape
    kh, kw = window
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    out = np.zeros((n, c, oh, ow))
    for b in range(n):
        for ch in range(c):
            for y in range(oh):
                for xx in range(ow):
                    vals = []
                    for i in range(kh):
                        for j in range(kw):
                            iy, ix = y * sh + i - ph, xx * sw + j - pw
                            if 0 <= iy < h and 0 <= ix < w:
                                vals.append(float(x[b, ch, iy, ix]))
                            else:
                                vals.append(0.0 if mode == "avg" else -math.inf)
                    out[b, ch, y, xx] = sum(vals) / (kh * kw) if mode == "avg" else max(vals)
    return out


def bilinear_resize(x, out_h, out_w):
    """Direct half-pixel bilinear interpolation formula, one output pixel at a time."""
    *lead, h, w = x.shape
    flat = np.asarray(x, dtype=np.float64).reshape(-1, h, w)
    out = np.zeros((flat.shape[0], out_h, out_w))
    for p in range(flat.shape[0]):
        for y in range(out_h):
            sy = max((y + 0.5) * h / out_h - 0.5, 0.0)
            y0 = min(int(math.floor(sy)), h - 1)
            y1 = min(y0 + 1, h - 1)
            ly = sy - y0
            for xx in range(out_w):
                sx = max((xx + 0.5) * w / out_w - 0.5, 0.0)
                x0 = min(int(math.floor(sx)), w - 1)
                x1 = min(x0 + 1, w - 1)
                lx = sx - x0
                top = (1 - lx) * flat[p, y0, x0] + lx * flat[p, y0, x1]
                bot = (1 - lx) * flat[p, y1, x0] + lx * flat[p, y1, x1]
                out[p, y, xx] = (1 - ly) * top + ly * bot
    return out.reshape(*lead, out_h, out_w)


def matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def batch_norm_train(x, gamma, beta, eps):
    """Two-pass statistics: explicit mean, then explicit biased variance."""
    n, c, h, w = x.shape
    out = np.zeros(x.shape)
    for ch in range(c):
        vals = [float(v) for v in np.asarray(x[:, ch]).ravel()]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        out[:, ch] = (np.asarray(x[:, ch], dtype=np.float64) - mean) / math.sqrt(var + eps)
        out[:, ch] = out[:, ch] * float(gamma[ch]) + float(beta[ch])
    return out
