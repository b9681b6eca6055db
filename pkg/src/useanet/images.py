"""Image decoding (binary PGM, optional PNG), mask encoding and preprocessing."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import kernels as K
from .errors import ImageFormatError

NORM_MEAN = 0.5
NORM_STD = 0.5


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers (with # comments) after the magic."""
    pos, out = 2, []
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("malformed PGM header")
        out.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError("malformed PGM header: no whitespace before raster")
    return out, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Binary P5 with maxval 255 -> uint8 [H, W]."""
    if data[:2] != b"P5":
        raise ImageFormatError("not a binary PGM (P5) file")
    (w, h, maxval), offset = _pgm_tokens(data, 3)
    if w < 1 or h < 1:
        raise ImageFormatError(f"invalid PGM size {w}x{h}")
    if maxval != 255:
        raise ImageFormatError(f"PGM maxval must be 255, got {maxval}")
    raster = data[offset : offset + w * h]
    if len(raster) != w * h:
        raise ImageFormatError(f"PGM raster truncated: {len(raster)} of {w * h} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 2:
        raise ImageFormatError(f"PGM needs a 2-D array, got {pixels.shape}")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pixels(path) -> np.ndarray:
    """uint8 pixels [H, W] or [H, W, 3] from a P5 PGM or an 8-bit PNG."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        return decode_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        with Image.open(path) as img:
            if img.mode not in ("L", "RGB", "RGBA", "LA", "P"):
                raise ImageFormatError(f"unsupported PNG mode {img.mode}")
            img = img.convert("RGB") if img.mode in ("RGBA", "P") else img
            img = img.convert("L") if img.mode == "LA" else img
            return np.asarray(img, dtype=np.uint8)
    raise ImageFormatError(f"{path}: unsupported image format")


def pixels_to_unit(pixels: np.ndarray) -> np.ndarray:
    """uint8 pixels -> float [3, H, W] in [0, 1]; grayscale is replicated to 3 channels."""
    arr = np.asarray(pixels).astype(K.default_dtype()) / 255.0
    if arr.ndim == 2:
        arr = np.broadcast_to(arr, (3,) + arr.shape)
    elif arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr.transpose(2, 0, 1)
    else:
        raise ImageFormatError(f"unsupported pixel array shape {arr.shape}")
    return np.ascontiguousarray(arr, dtype=K.default_dtype())


def standardize(img: np.ndarray) -> np.ndarray:
    return ((img - NORM_MEAN) / NORM_STD).astype(img.dtype)


def preprocess(img: np.ndarray, size: int) -> np.ndarray:
    """[3, H, W] in [0, 1] -> standardized [3, size, size]."""
    resized = K.bilinear_resize(img[None], size, size)[0]
    return standardize(resized)


def load_image(path, size: int | None = None) -> np.ndarray:
    """Decode, scale to [0, 1], replicate gray to 3 channels and standardize; optionally resize."""
    img = pixels_to_unit(read_pixels(path))
    if size is None:
        return standardize(img)
    return preprocess(img, size)


def load_mask(path) -> np.ndarray:
    """Binary mask [1, H, W] (pixels > 127 are foreground)."""
    px = read_pixels(path)
    if px.ndim == 3:
        px = px.max(axis=2)
    return (px > 127).astype(np.uint8)[None]


def save_mask(mask: np.ndarray, path) -> None:
    """Write a binary mask as P5 with values {0, 255}."""
    m = np.asarray(mask).reshape(np.asarray(mask).shape[-2:])
    Path(path).write_bytes(encode_pgm(np.where(m > 0, 255, 0).astype(np.uint8)))


def save_gray(img: np.ndarray, path) -> None:
    """Write a [H, W] or [C, H, W] image in [0, 1] as an 8-bit P5 (first channel)."""
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[0]
    Path(path).write_bytes(encode_pgm(np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)))
