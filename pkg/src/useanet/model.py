"""Hierarchical feature aggregation, decoder with dual-prediction gating, and the full network."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .blocks import ECA, EAA, LConv, MBFP
from .encoder import EncoderConfig, FeaturePyramid, PyramidEncoder
from .errors import ConfigurationError, ShapeError
from .nn import Conv2d, Module, ModuleList

HFA_ALPHA = 0.5
DECODER_LEVELS = (2, 3, 4)
# scale index -> output stride; scale 5 is the aggregated dual prediction at F2 resolution
SCALE_STRIDES = {2: 8, 3: 16, 4: 32, 5: 8}


@dataclass
class ModelConfig:
    input_size: int = 256
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder_width: int = 64
    alpha_hfa: float = HFA_ALPHA
    alpha_edge: float = 0.1
    beta_eaa: float = 0.1
    attention: bool = True
    multi_branch: bool = True
    ultrasound_specific: bool = True
    multi_scale: bool = True

    def validate(self) -> None:
        self.encoder.validate()
        if self.input_size < 32 or self.input_size % 32:
            raise ConfigurationError(f"input_size must be a positive multiple of 32, got {self.input_size}")
        if self.decoder_width < 1:
            raise ConfigurationError("decoder_width must be positive")

    @property
    def scales(self) -> tuple[int, ...]:
        """Scales that carry a dual prediction under the current toggles."""
        return (2, 3, 4, 5) if self.multi_scale else (2, 5)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Desk-scale preset: 64x64 input, one transformer block per stage."""
        overrides.setdefault("input_size", 64)
        return cls(encoder=EncoderConfig(depths=[1, 1, 1, 1]), **overrides)

    @classmethod
    def micro(cls, **overrides) -> "ModelConfig":
        """Very narrow network for fast checks and the committed golden checkpoint."""
        enc = EncoderConfig(embed_dims=[8, 16, 32, 64], depths=[1, 1, 1, 1], num_heads=[1, 2, 4, 8],
                            mlp_ratios=[2, 2, 2, 2])
        overrides.setdefault("input_size", 64)
        overrides.setdefault("decoder_width", 16)
        return cls(encoder=enc, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        enc = data.pop("encoder", {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {sorted(unknown)}")
        enc_known = {f.name for f in dataclasses.fields(EncoderConfig)}
        if set(enc) - enc_known:
            raise ConfigurationError(f"unknown encoder config keys: {sorted(set(enc) - enc_known)}")
        cfg = cls(encoder=EncoderConfig(**enc), **data)
        cfg.validate()
        return cfg


@dataclass
class PredictionSet:
    """Per-scale (foreground, background) logits and the final mask probability map."""

    logits: dict[int, tuple[ad.Var, ad.Var]]
    final: ad.Var

    def shapes(self) -> dict[int, tuple]:
        return {s: tuple(fg.shape) for s, (fg, _) in sorted(self.logits.items())}


class Head(Module):
    """Two independent 1x1 convolutions giving foreground and background logits."""

    category = "heads"

    def __init__(self, channels: int, *, rng):
        super().__init__()
        self.fg = Conv2d(channels, 1, 1, rng=rng, init="fan_in")
        self.bg = Conv2d(channels, 1, 1, rng=rng, init="fan_in")

    def forward(self, x):
        return self.fg(x), self.bg(x)


class HFA(Module):
    """Aggregates levels 2-4 at level-2 resolution and emits the scale-5 dual prediction."""

    category = "hfa"

    def __init__(self, width: int, *, rng, alpha: float = HFA_ALPHA, attention: bool = True,
                 edge: bool = True, beta: float = 0.1):
        super().__init__()
        self.alpha = alpha
        self.from4 = LConv(width, width, 3, rng=rng)
        self.from3 = LConv(width, width, 3, rng=rng)
        self.merge = LConv(2 * width, width, 3, rng=rng)
        self.eaa = EAA(width, rng=rng, beta=beta, edge=edge) if attention else None
        self.head = Head(width, rng=rng)

    def fuse(self, f2, f3, f4):
        h, w = f2.shape[2:]
        if not (f2.shape[0] == f3.shape[0] == f4.shape[0]):
            raise ShapeError("pyramid levels have different batch sizes")
        g4 = self.from4(ad.resize(f4, h, w))
        g3 = self.from3(ad.resize(f3, h, w))
        fused = f2 * (g4 * self.alpha + 1.0) * (g3 * self.alpha + 1.0)
        return fused, g4

    def forward(self, f2, f3, f4):
        fused, g4 = self.fuse(f2, f3, f4)
        agg = self.merge(ad.concat([fused, g4], axis=1))
        if self.eaa is not None:
            agg = self.eaa(agg)
        p_fg, p_bg = self.head(agg)
        return agg, p_fg, p_bg


def uade(feature: ad.Var, p_fg: ad.Var, p_bg: ad.Var) -> ad.Var:
    """Gate a decoder feature by sigmoid of the resized fg - bg logit difference: F + F * W."""
    h, w = feature.shape[2:]
    weight = ad.sigmoid(ad.resize(p_fg - p_bg, h, w))
    return feature + feature * weight


class Decoder(Module):
    category = "decoder"

    def __init__(self, width: int, *, rng):
        super().__init__()
        self.d4 = LConv(width, width, 3, rng=rng)
        self.d3 = LConv(width, width, 3, rng=rng)
        self.d2 = LConv(width, width, 3, rng=rng)

    def forward(self, x2, x3, x4, p_fg, p_bg):
        d4 = uade(self.d4(x4), p_fg, p_bg)
        up = ad.resize(d4, *x3.shape[2:])
        d3 = uade(self.d3(up + x3), p_fg, p_bg)
        up = ad.resize(d3, *x2.shape[2:])
        d2 = uade(self.d2(up + x2), p_fg, p_bg)
        return {2: d2, 3: d3, 4: d4}


class USEANet(Module):
    def __init__(self, config: ModelConfig | None = None, *, rng: np.random.Generator | None = None,
                 seed: int = 0):
        super().__init__()
        config = config or ModelConfig()
        config.validate()
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.config = config
        width = config.decoder_width
        dims = config.encoder.embed_dims
        self.encoder = PyramidEncoder(config.encoder, rng=rng)
        self.processors = ModuleList()
        for lvl in DECODER_LEVELS:
            cin = dims[lvl - 1]
            if config.multi_branch:
                proc = MBFP(cin, width, rng=rng, specific=config.ultrasound_specific, alpha=config.alpha_edge)
            else:
                proc = _SingleLConv(cin, width, rng=rng)
            self.processors.append(proc)
        if config.attention:
            self.eca = ModuleList(ECA(width, rng=rng) for _ in DECODER_LEVELS)
        self.hfa = HFA(width, rng=rng, alpha=config.alpha_hfa, attention=config.attention,
                       edge=config.ultrasound_specific, beta=config.beta_eaa)
        self.decoder = Decoder(width, rng=rng)
        self.heads = ModuleList(Head(width, rng=rng) for s in DECODER_LEVELS if s in config.scales)

    def levels(self, pyramid: FeaturePyramid) -> dict[int, ad.Var]:
        """Processed (and attended) decoder inputs for levels 2-4."""
        out = {}
        for i, lvl in enumerate(DECODER_LEVELS):
            x = self.processors[i](pyramid[lvl])
            if self.config.attention:
                x = self.eca[i](x)
            out[lvl] = x
        return out

    def forward(self, x) -> PredictionSet:
        x = x if isinstance(x, ad.Var) else ad.Var(np.asarray(x, dtype=K.default_dtype()))
        h, w = x.shape[2:]
        pyramid = self.encoder(x)
        lv = self.levels(pyramid)
        _, p5_fg, p5_bg = self.hfa(lv[2], lv[3], lv[4])
        dec = self.decoder(lv[2], lv[3], lv[4], p5_fg, p5_bg)
        logits = {5: (p5_fg, p5_bg)}
        heads = iter(self.heads)
        for s in DECODER_LEVELS:
            if s in self.config.scales:
                logits[s] = next(heads)(dec[s])
        final = ad.sigmoid(ad.resize(logits[2][0], h, w))
        return PredictionSet(dict(sorted(logits.items())), final)


class _SingleLConv(Module):
    """Stand-in for MBFP when the multi-branch design is ablated."""

    category = "mbfp"

    def __init__(self, cin, cout, *, rng):
        super().__init__()
        self.lconv = LConv(cin, cout, 3, rng=rng)

    def forward(self, x):
        return self.lconv(x)


def predict_mask(prob: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary mask; probabilities equal to the threshold count as foreground."""
    prob = np.asarray(prob)
    return (prob >= threshold).astype(np.uint8)
