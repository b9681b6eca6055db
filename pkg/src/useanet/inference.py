"""Single-image segmentation shared by the CLI and the golden-fixture test."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .images import pixels_to_unit, preprocess
from .model import USEANet, predict_mask


def segment_pixels(model: USEANet, pixels: np.ndarray, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """uint8 pixels -> (binary mask, probability map), both at the image's own H x W.

    The image is resized to the model input, and the final probability map is
    resized back before thresholding.
    """
    img = pixels_to_unit(pixels)
    h, w = img.shape[1:]
    x = preprocess(img, model.config.input_size)[None]
    model.eval()
    with ad.no_grad():
        prob = model(x).final.value
    prob = K.bilinear_resize(prob, h, w)[0, 0]
    return predict_mask(prob, threshold), prob
