"""Four-stage pyramid vision transformer backbone (B0 size).

Each stage: overlapping strided patch embedding, a stack of transformer
blocks with spatial-reduction attention, and a closing LayerNorm. Tokens
are [N, L, C]; stage outputs are reshaped back to NCHW.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, InvalidSpecError, ShapeError
from .nn import Conv2d, LayerNorm, Linear, Module, ModuleList


@dataclass
class EncoderConfig:
    embed_dims: list[int] = field(default_factory=lambda: [32, 64, 160, 256])
    depths: list[int] = field(default_factory=lambda: [2, 2, 2, 2])
    num_heads: list[int] = field(default_factory=lambda: [1, 2, 5, 8])
    sr_ratios: list[int] = field(default_factory=lambda: [8, 4, 2, 1])
    mlp_ratios: list[int] = field(default_factory=lambda: [8, 8, 4, 4])
    in_channels: int = 3

    def validate(self) -> None:
        lists = (self.embed_dims, self.depths, self.num_heads, self.sr_ratios, self.mlp_ratios)
        if any(len(v) != 4 for v in lists):
            raise ConfigurationError("encoder settings need exactly four stages")
        for i, (dim, heads) in enumerate(zip(self.embed_dims, self.num_heads)):
            if heads < 1 or dim % heads:
                raise ConfigurationError(f"stage {i + 1}: embed dim {dim} not divisible by {heads} heads")
        if min(self.depths) < 1 or min(self.sr_ratios) < 1 or min(self.mlp_ratios) < 1:
            raise ConfigurationError("depths, reduction ratios and MLP ratios must be >= 1")

    @staticmethod
    def stride(stage: int) -> int:
        """Output stride of 1-based ``stage``."""
        return 4 * 2 ** (stage - 1)


@dataclass
class FeaturePyramid:
    levels: tuple  # F1..F4 as Vars

    def __getitem__(self, i):
        """1-based access: ``pyramid[1]`` is F1."""
        return self.levels[i - 1]

    def shapes(self):
        return [tuple(f.shape) for f in self.levels]


def tokens_to_map(x: ad.Var, h: int, w: int) -> ad.Var:
    n, _, c = x.shape
    return x.transpose(0, 2, 1).reshape(n, c, h, w)


def map_to_tokens(x: ad.Var) -> ad.Var:
    n, c, h, w = x.shape
    return x.reshape(n, c, h * w).transpose(0, 2, 1)


class PatchEmbed(Module):
    """Overlapping strided conv embedding followed by LayerNorm."""

    def __init__(self, cin: int, dim: int, kernel: int, stride: int, *, rng):
        super().__init__()
        self.kernel, self.stride = kernel, stride
        self.proj = Conv2d(cin, dim, kernel, stride=stride, padding=kernel // 2, rng=rng)
        self.norm = LayerNorm(dim, eps=1e-5)

    def forward(self, x: ad.Var):
        h, w = x.shape[2:]
        if h < self.stride or w < self.stride:
            raise ShapeError(f"input {h}x{w} smaller than patch stride {self.stride}")
        if h + 2 * (self.kernel // 2) < self.kernel:
            raise InvalidSpecError("input smaller than the patch kernel")
        x = self.proj(x)
        _, _, h, w = x.shape
        return self.norm(map_to_tokens(x)), h, w


class SRAttention(Module):
    """Multi-head self-attention whose keys/values come from a spatially reduced map."""

    def __init__(self, dim: int, heads: int, sr_ratio: int, *, rng):
        super().__init__()
        if dim % heads:
            raise ConfigurationError(f"dim {dim} not divisible by {heads} heads")
        self.dim, self.heads, self.sr_ratio = dim, heads, sr_ratio
        self.scale = (dim // heads) ** -0.5
        self.q = Linear(dim, dim, rng=rng)
        self.kv = Linear(dim, 2 * dim, rng=rng)
        self.proj = Linear(dim, dim, rng=rng)
        if sr_ratio > 1:
            self.sr = Conv2d(dim, dim, sr_ratio, stride=sr_ratio, rng=rng)
            self.norm = LayerNorm(dim, eps=1e-5)
        self.last_attention: np.ndarray | None = None

    def forward(self, x: ad.Var, h: int, w: int) -> ad.Var:
        n, length, c = x.shape
        if length != h * w:
            raise ShapeError(f"token count {length} != {h}x{w}")
        hd = c // self.heads
        q = self.q(x).reshape(n, length, self.heads, hd).transpose(0, 2, 1, 3)
        if self.sr_ratio > 1:
            reduced = self.sr(tokens_to_map(x, h, w))
            src = self.norm(map_to_tokens(reduced))
        else:
            src = x
        m = src.shape[1]
        kv = self.kv(src).reshape(n, m, 2, self.heads, hd).transpose(2, 0, 3, 1, 4)
        k_t = _take(ad.transpose(kv, (0, 1, 2, 4, 3)), 0)
        v = _take(kv, 1)
        attn = ad.softmax(ad.matmul(q, k_t) * self.scale, axis=-1)
        self.last_attention = attn.value
        out = ad.matmul(attn, v).transpose(0, 2, 1, 3).reshape(n, length, c)
        return self.proj(out)


def _take(x: ad.Var, i: int) -> ad.Var:
    """``x[i]`` along the leading axis."""
    def back(g):
        full = np.zeros_like(x.value)
        full[i] = g
        return (full,)

    return ad._result(x.value[i].copy(), (x,), back, "index")


class MixMLP(Module):
    """fc -> 3x3 depthwise conv -> GELU -> fc."""

    def __init__(self, dim: int, hidden: int, *, rng):
        super().__init__()
        self.fc1 = Linear(dim, hidden, rng=rng)
        self.dwconv = Conv2d(hidden, hidden, 3, padding=1, groups=hidden, rng=rng)
        self.fc2 = Linear(hidden, dim, rng=rng)

    def forward(self, x: ad.Var, h: int, w: int) -> ad.Var:
        x = self.fc1(x)
        x = map_to_tokens(self.dwconv(tokens_to_map(x, h, w)))
        return self.fc2(ad.gelu(x))


class Block(Module):
    def __init__(self, dim: int, heads: int, sr_ratio: int, mlp_ratio: int, *, rng):
        super().__init__()
        self.norm1 = LayerNorm(dim)
        self.attn = SRAttention(dim, heads, sr_ratio, rng=rng)
        self.norm2 = LayerNorm(dim)
        self.mlp = MixMLP(dim, dim * mlp_ratio, rng=rng)

    def forward(self, x, h, w):
        x = x + self.attn(self.norm1(x), h, w)
        return x + self.mlp(self.norm2(x), h, w)


class Stage(Module):
    def __init__(self, cin: int, dim: int, depth: int, heads: int, sr_ratio: int, mlp_ratio: int,
                 kernel: int, stride: int, *, rng):
        super().__init__()
        self.patch_embed = PatchEmbed(cin, dim, kernel, stride, rng=rng)
        self.blocks = ModuleList(Block(dim, heads, sr_ratio, mlp_ratio, rng=rng) for _ in range(depth))
        self.norm = LayerNorm(dim)

    def forward(self, x: ad.Var) -> ad.Var:
        tokens, h, w = self.patch_embed(x)
        for blk in self.blocks:
            tokens = blk(tokens, h, w)
        return tokens_to_map(self.norm(tokens), h, w)


class PyramidEncoder(Module):
    category = "encoder"

    def __init__(self, config: EncoderConfig, *, rng: np.random.Generator):
        super().__init__()
        config.validate()
        self.config = config
        stages = []
        cin = config.in_channels
        for i in range(4):
            kernel, stride = (7, 4) if i == 0 else (3, 2)
            stages.append(Stage(cin, config.embed_dims[i], config.depths[i], config.num_heads[i],
                                config.sr_ratios[i], config.mlp_ratios[i], kernel, stride, rng=rng))
            cin = config.embed_dims[i]
        self.stages = ModuleList(stages)

    def forward(self, x: ad.Var) -> FeaturePyramid:
        h, w = x.shape[2:]
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"encoder expects [N, {self.config.in_channels}, H, W], got {x.shape}")
        if h % 32 or w % 32:
            raise ShapeError(f"input extents must be divisible by 32, got {h}x{w}")
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(tuple(feats))

    def attention_maps(self) -> list[np.ndarray]:
        return [m.last_attention for _, m in self.named_modules()
                if isinstance(m, SRAttention) and m.last_attention is not None]
