"""Synthetic lesion fixtures and deterministic train/val/test splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels as K
from .errors import InputError

FIXTURE_KINDS = ("disk", "two-disks", "speckled-disk")


@dataclass
class SampleRecord:
    image: np.ndarray  # [3, H, W] in [0, 1]
    mask: np.ndarray  # [1, H, W] uint8 in {0, 1}
    source: str


def disk_mask(size: int, cy: float, cx: float, r: float) -> np.ndarray:
    """Pixels whose centres lie inside the circle."""
    yy, xx = np.mgrid[0:size, 0:size]
    return ((yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2 <= r * r).astype(np.uint8)


def synth_fixture(kind: str = "speckled-disk", size: int = 64, seed: int = 0,
                  radius: float | None = None) -> SampleRecord:
    """Dark (hypoechoic) lesion on a brighter textured background.

    The mask is the exact analytic disk; the ``speckled-disk`` variant multiplies
    intensities by unit-mean gamma noise.
    """
    if kind not in FIXTURE_KINDS:
        raise InputError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")
    if size < 32:
        raise InputError(f"fixture size must be >= 32, got {size}")
    rng = np.random.default_rng(seed)
    if kind == "two-disks":
        r = radius or size * 0.18
        mask = disk_mask(size, size * 0.5, size * 0.27, r) | disk_mask(size, size * 0.5, size * 0.73, r)
    else:
        r = radius or size * 0.3
        jitter = rng.uniform(-0.05, 0.05, size=2) * size
        mask = disk_mask(size, size / 2 + jitter[0], size / 2 + jitter[1], r)
    yy = np.linspace(0.0, 1.0, size)[:, None]
    background = 0.55 + 0.15 * yy + 0.05 * rng.standard_normal((size, size))
    lesion = 0.2 + 0.03 * rng.standard_normal((size, size))
    img = np.where(mask > 0, lesion, background)
    if kind == "speckled-disk":
        img = img * rng.gamma(shape=4.0, scale=0.25, size=(size, size))
    img = np.clip(img, 0.0, 1.0)
    image = np.broadcast_to(img, (3, size, size)).astype(K.default_dtype())
    return SampleRecord(np.ascontiguousarray(image), mask[None].astype(np.uint8), f"{kind}:{size}:{seed}")


def quantize(image: np.ndarray) -> np.ndarray:
    """Round-trip through 8-bit pixels so in-memory fixtures match their saved PGM."""
    return (np.clip(np.rint(image * 255.0), 0, 255) / 255.0).astype(image.dtype)


def split(ids: Sequence, seed: int = 0) -> tuple[list, list, list]:
    """Shuffle then cut floor(0.7 n) / floor(0.15 n) / remainder."""
    ids = list(ids)
    n = len(ids)
    if n < 10:
        raise InputError(f"need at least 10 ids to split, got {n}")
    if len(set(ids)) != n:
        raise InputError("ids must be unique")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    n_train = n * 70 // 100
    n_val = n * 15 // 100
    return shuffled[:n_train], shuffled[n_train : n_train + n_val], shuffled[n_train + n_val :]
