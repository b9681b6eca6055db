"""Lightweight convolution, multi-branch feature processor and the two attention gates."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, ShapeError
from .nn import BatchNorm2d, Conv2d, Module, ModuleList

EDGE_ALPHA = 0.1
EAA_BETA = 0.1


def laplacian_kernel(channels: int, dtype=np.float32) -> np.ndarray:
    """Fixed 8-neighbour Laplacian stencil replicated per channel, shape [C, 1, 3, 3]."""
    stencil = -np.ones((3, 3), dtype=dtype)
    stencil[1, 1] = 8
    return np.broadcast_to(stencil, (channels, 1, 3, 3)).copy()


def laplacian(x: ad.Var) -> ad.Var:
    return ad.stencil3x3(x, laplacian_kernel(x.shape[1], x.dtype))


def mlp_hidden(channels: int, reduction: int = 4) -> int:
    return max(channels // reduction, 4)


class LConv(Module):
    """Depthwise k x k -> BN -> ReLU -> pointwise 1x1 (with bias).

    ``k == 1`` degenerates to a plain 1x1 convolution.
    """

    def __init__(self, cin: int, cout: int, k: int = 3, *, rng):
        super().__init__()
        if k < 1 or k % 2 == 0:
            raise ConfigurationError(f"LConv kernel size must be odd and >= 1, got {k}")
        self.k = k
        if k > 1:
            self.dw = Conv2d(cin, cin, k, padding=k // 2, groups=cin, bias=False, rng=rng, init="fan_in")
            self.bn = BatchNorm2d(cin)
        self.pw = Conv2d(cin, cout, 1, rng=rng, init="fan_in")

    def forward(self, x: ad.Var) -> ad.Var:
        if self.k > 1:
            x = ad.relu(self.bn(self.dw(x)))
        return self.pw(x)


class ChannelMLP(Module):
    """1x1 conv bottleneck C -> hidden -> C with ReLU, applied to pooled [N, C, 1, 1] maps."""

    def __init__(self, channels: int, *, rng, reduction: int = 4):
        super().__init__()
        hidden = mlp_hidden(channels, reduction)
        self.fc1 = Conv2d(channels, hidden, 1, rng=rng, init="fan_in")
        self.fc2 = Conv2d(hidden, channels, 1, rng=rng, init="fan_in")

    def forward(self, x):
        return self.fc2(ad.relu(self.fc1(x)))


class MBFP(Module):
    """Multi-branch feature processor.

    Three branches over the channel-adapted input F' (noise, edge, contrast)
    are mixed with per-sample softmax weights predicted from their pooled
    concatenation, refined by an LConv and added to a 1x1 residual of the
    raw input. With ``specific=False`` the branches are three plain LConvs.
    """

    category = "mbfp"

    def __init__(self, cin: int, cout: int, *, rng, specific: bool = True, alpha: float = EDGE_ALPHA):
        super().__init__()
        self.cin, self.cout, self.specific, self.alpha = cin, cout, specific, alpha
        self.adapt = Conv2d(cin, cout, 1, rng=rng, init="fan_in")
        if specific:
            self.noise = ModuleList([LConv(cout, cout, 3, rng=rng), LConv(cout, cout, 3, rng=rng)])
            self.edge = LConv(cout, cout, 3, rng=rng)
            self.contrast = LConv(cout, cout, 3, rng=rng)
            self.contrast_gate = ChannelMLP(cout, rng=rng)
        else:
            self.branches = ModuleList(LConv(cout, cout, 3, rng=rng) for _ in range(3))
        self.fusion = Conv2d(3 * cout, 3, 1, rng=rng, init="trunc_normal")
        self.refine = LConv(cout, cout, 3, rng=rng)
        self.residual = LConv(cin, cout, 1, rng=rng)
        self.last_weights: np.ndarray | None = None

    def branch_outputs(self, x: ad.Var) -> list[ad.Var]:
        f = self.adapt(x)
        if not self.specific:
            return [b(f) for b in self.branches]
        noise = f + self.noise[1](self.noise[0](f))
        fe = self.edge(f)
        edge = fe + laplacian(fe) * self.alpha
        fc = self.contrast(f)
        contrast = fc * ad.sigmoid(self.contrast_gate(ad.global_avg_pool(fc)))
        return [noise, edge, contrast]

    def branch_weights(self, branches: list[ad.Var]) -> ad.Var:
        """[N, 3, 1, 1] softmax weights, one per branch."""
        pooled = ad.global_avg_pool(ad.concat(branches, axis=1))
        return ad.softmax(self.fusion(pooled), axis=1)

    def forward(self, x: ad.Var) -> ad.Var:
        if x.shape[1] != self.cin:
            raise ShapeError(f"MBFP expects {self.cin} channels, got {x.shape[1]}")
        branches = self.branch_outputs(x)
        w = self.branch_weights(branches)
        self.last_weights = w.value.reshape(w.shape[0], 3)
        fused = branches[0] * ad.index_channel(w, 0)
        for i in (1, 2):
            fused = fused + branches[i] * ad.index_channel(w, i)
        return ad.relu(self.refine(fused) + self.residual(x))


class ECA(Module):
    """Channel gate from a shared MLP over GAP and GMP, times a 3x3 spatial gate."""

    category = "attention"

    def __init__(self, channels: int, *, rng):
        super().__init__()
        self.mlp = ChannelMLP(channels, rng=rng)
        self.spatial = Conv2d(2, 1, 3, padding=1, rng=rng, init="fan_in")

    def gates(self, x: ad.Var) -> tuple[ad.Var, ad.Var]:
        channel = ad.sigmoid(self.mlp(ad.global_avg_pool(x)) + self.mlp(ad.global_max_pool(x)))
        pooled = ad.concat([ad.mean(x, axis=1, keepdims=True), ad.reduce_max(x, axis=1)], axis=1)
        spatial = ad.sigmoid(self.spatial(pooled))
        return channel, spatial

    def forward(self, x: ad.Var) -> ad.Var:
        channel, spatial = self.gates(x)
        return x * channel * spatial


class EAA(Module):
    """Edge-aware gate: F * (1 + beta * ReLU(Laplacian(F))) * sigmoid(MLP(GAP(F)))."""

    category = "attention"

    def __init__(self, channels: int, *, rng, beta: float = EAA_BETA, edge: bool = True):
        super().__init__()
        self.beta, self.edge = beta, edge
        self.mlp = ChannelMLP(channels, rng=rng)

    def forward(self, x: ad.Var) -> ad.Var:
        gate = ad.sigmoid(self.mlp(ad.global_avg_pool(x)))
        if self.edge:
            x = x * (ad.relu(laplacian(x)) * self.beta + 1.0)
        return x * gate
