"""USEANet: lightweight ultrasound lesion segmentation on a numpy runtime.

The package carries its own kernels and reverse-mode differentiation, the
pyramid transformer encoder, the ultrasound-specific blocks, the decoder
with dual-prediction gating, losses and metrics, a binary checkpoint format
and the ``useanet`` command line.
"""

from .config import RunConfig
from .encoder import EncoderConfig, FeaturePyramid
from .inference import segment_pixels
from .losses import LossConfig, total_loss
from .metrics import MetricsReport, metrics
from .model import ModelConfig, PredictionSet, USEANet, predict_mask
from .profiler import ProfileReport, profile

__version__ = "0.1.0"

__all__ = [
    "EncoderConfig",
    "FeaturePyramid",
    "LossConfig",
    "MetricsReport",
    "ModelConfig",
    "PredictionSet",
    "ProfileReport",
    "RunConfig",
    "USEANet",
    "metrics",
    "predict_mask",
    "segment_pixels",
    "profile",
    "total_loss",
]
