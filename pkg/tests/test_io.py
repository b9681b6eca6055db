import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from useanet import kernels as K
from useanet import oracles
from useanet.checkpoint import dumps, load_checkpoint, loads, save_checkpoint
from useanet.errors import (
    BadMagicError,
    CheckpointError,
    ImageFormatError,
    TruncatedCheckpointError,
    UnsupportedFormatError,
    UnsupportedVersionError,
)
from useanet.images import (
    decode_pgm,
    encode_pgm,
    load_image,
    load_mask,
    pixels_to_unit,
    preprocess,
    read_pixels,
    save_mask,
    standardize,
)
from useanet.nn import ParameterStore

# --- checkpoint ---------------------------------------------------------------


def test_entry_layout_bytes():
    data = dumps({"w": np.arange(6, dtype=np.float32).reshape(2, 3)})
    assert data[:4] == b"USEA"
    assert struct.unpack("<IQ", data[4:16]) == (1, 1)
    assert struct.unpack("<I", data[16:20]) == (1,) and data[20:21] == b"w"
    assert data[21:23] == bytes([0, 2])
    assert struct.unpack("<QQ", data[23:39]) == (2, 3)
    payload = data[39:]
    assert len(payload) == 24
    assert np.frombuffer(payload, "<f4").tolist() == [0, 1, 2, 3, 4, 5]


any32 = st.floats(width=32)
tensors = arrays(np.float32, array_shapes(min_dims=0, max_dims=4, max_side=4), elements=any32)


@given(st.dictionaries(st.text(min_size=1, max_size=12), tensors, max_size=5))
def test_roundtrip_is_bit_exact(store):
    back = loads(dumps(store))
    assert set(back) == set(store)
    for k, v in store.items():
        assert back[k].shape == v.shape and back[k].tobytes() == v.tobytes()


def test_roundtrip_keeps_nan_payloads_and_tiny_tensors(tmp_path):
    store = {"edge": np.array([1.5], np.float32), "nan": np.array([np.nan, -0.0], np.float32),
             "empty": np.zeros((0, 3), np.float32)}
    save_checkpoint(store, tmp_path / "a.usea")
    back = load_checkpoint(tmp_path / "a.usea")
    assert isinstance(back, ParameterStore)
    assert all(back[k].tobytes() == v.tobytes() and back[k].shape == v.shape for k, v in store.items())


def test_serialization_is_order_independent():
    a = {"b": np.ones(2, np.float32), "a": np.zeros(3, np.float32)}
    assert dumps(a) == dumps(dict(reversed(list(a.items()))))


def test_bad_inputs():
    good = dumps({"w": np.ones((2, 3), np.float32)})
    with pytest.raises(BadMagicError):
        loads(b"XXXX" + good[4:])
    with pytest.raises(UnsupportedVersionError):
        loads(good[:4] + struct.pack("<I", 9) + good[8:])
    with pytest.raises(TruncatedCheckpointError):
        loads(good[:-1])
    with pytest.raises(TruncatedCheckpointError):
        loads(b"US")
    with pytest.raises(UnsupportedFormatError):
        loads(good[:21] + bytes([7]) + good[22:])
    with pytest.raises(CheckpointError):
        loads(good + b"\0")
    with pytest.raises(CheckpointError):
        dumps({"": np.ones(1, np.float32)})


# --- images -------------------------------------------------------------------


def test_pgm_decode_values():
    data = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64])
    px = decode_pgm(data)
    assert px.tolist() == [[0, 128], [255, 64]]
    unit = pixels_to_unit(px)
    assert unit.shape == (3, 2, 2)
    np.testing.assert_allclose(unit[0].ravel(), [0, 128 / 255, 1, 64 / 255], rtol=1e-7)
    assert standardize(np.float32([0.5]))[0] == 0.0


def test_pgm_header_comments_and_errors():
    assert decode_pgm(b"P5 # c\n1 1 # x\n255\n\x07").tolist() == [[7]]
    with pytest.raises(ImageFormatError):
        decode_pgm(b"P2\n1 1\n255\n\x07")
    with pytest.raises(ImageFormatError):
        decode_pgm(b"P5\n1 1\n65535\n\x00\x07")
    with pytest.raises(ImageFormatError):
        decode_pgm(b"P5\n2 2\n255\n\x00")


@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_roundtrip(px):
    assert np.array_equal(decode_pgm(encode_pgm(px)), px)


def test_mask_file_roundtrip(tmp_path):
    m = (np.random.default_rng(0).random((5, 7)) > 0.5).astype(np.uint8)
    save_mask(m, tmp_path / "m.pgm")
    assert set(read_pixels(tmp_path / "m.pgm").ravel()) <= {0, 255}
    assert np.array_equal(load_mask(tmp_path / "m.pgm")[0], m)


def test_png_gray_and_rgb(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    gray = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    Image.fromarray(gray).save(tmp_path / "g.png")
    assert np.array_equal(read_pixels(tmp_path / "g.png"), gray)
    rgb = np.stack([gray, gray // 2, gray // 3], axis=-1)
    Image.fromarray(rgb).save(tmp_path / "c.png")
    assert load_image(tmp_path / "c.png").shape == (3, 3, 4)


def test_unknown_format(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"GIF89a")
    with pytest.raises(ImageFormatError):
        read_pixels(tmp_path / "x.bin")


def test_frame_resize_matches_oracle():
    img = np.random.default_rng(1).random((3, 100, 80)).astype(np.float32)
    out = preprocess(img, 256)
    ref = oracles.bilinear_resize(img[:1], 256, 256)
    assert np.abs((out[0] * 0.5 + 0.5) - ref[0]).max() <= 1e-5


def test_resize_is_identity_on_target_size():
    img = np.random.default_rng(2).random((3, 64, 64)).astype(np.float32)
    assert np.array_equal(K.bilinear_resize(img[None], 64, 64)[0], img)
