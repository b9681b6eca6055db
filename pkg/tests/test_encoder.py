import numpy as np
import pytest

from useanet import autodiff as ad
from useanet.encoder import EncoderConfig, PyramidEncoder, SRAttention
from useanet.errors import ShapeError


def tokens(rng, *shape):
    return ad.Var(rng.standard_normal(shape).astype(np.float32))


def test_tiny_input_pyramid_shapes(rng):
    enc = PyramidEncoder(EncoderConfig(depths=[1, 1, 1, 1]), rng=rng).eval()
    with ad.no_grad():
        pyr = enc(ad.Var(np.zeros((1, 3, 64, 64), np.float32)))
    assert pyr.shapes() == [(1, 32, 16, 16), (1, 64, 8, 8), (1, 160, 4, 4), (1, 256, 2, 2)]


def test_full_input_pyramid_shapes(rng):
    enc = PyramidEncoder(EncoderConfig(), rng=rng).eval()
    with ad.no_grad():
        pyr = enc(ad.Var(rng.standard_normal((1, 3, 256, 256)).astype(np.float32)))
    assert pyr.shapes() == [(1, 32, 64, 64), (1, 64, 32, 32), (1, 160, 16, 16), (1, 256, 8, 8)]


def test_doubling_input_doubles_every_level(rng):
    enc = PyramidEncoder(EncoderConfig(embed_dims=[8, 16, 32, 64], depths=[1, 1, 1, 1],
                                       num_heads=[1, 2, 4, 8]), rng=rng).eval()
    with ad.no_grad():
        small = enc(ad.Var(np.zeros((1, 3, 32, 32), np.float32))).shapes()
        big = enc(ad.Var(np.zeros((1, 3, 64, 64), np.float32))).shapes()
    for s, b in zip(small, big):
        assert b[2:] == (2 * s[2], 2 * s[3])


def test_rejects_extents_not_divisible_by_32(rng):
    enc = PyramidEncoder(EncoderConfig(depths=[1, 1, 1, 1]), rng=rng)
    with pytest.raises(ShapeError):
        enc(ad.Var(np.zeros((1, 3, 48, 64), np.float32)))


def test_constant_stem_tokens_are_normalized(rng):
    enc = PyramidEncoder(EncoderConfig(depths=[1, 1, 1, 1]), rng=rng).eval()
    with ad.no_grad():
        toks, _, _ = enc.stages[0].patch_embed(ad.Var(np.full((1, 3, 64, 64), 0.3, np.float32)))
    assert np.abs(toks.value.mean(axis=-1)).max() <= 1e-5


def test_attention_rows_are_stochastic(rng):
    att = SRAttention(8, 2, 2, rng=rng)
    with ad.no_grad():
        att(tokens(rng, 2, 16, 8), 4, 4)
    np.testing.assert_allclose(att.last_attention.sum(axis=-1), 1.0, atol=1e-6)
    assert att.last_attention.shape == (2, 2, 16, 4)


def test_single_token_outputs_value_projection(rng):
    att = SRAttention(8, 2, 1, rng=rng)
    x = tokens(rng, 1, 1, 8)
    with ad.no_grad():
        out = att(x, 1, 1).value
        kv = att.kv(x).value
    assert np.all(att.last_attention == 1.0)
    v = kv[..., 8:]
    expected = v @ att.proj.weight.value.T + att.proj.bias.value
    np.testing.assert_allclose(out, expected, atol=1e-5)


def test_ratio_one_is_plain_multihead_attention(rng):
    att = SRAttention(8, 2, 1, rng=rng)
    x = tokens(rng, 1, 5, 8)
    with ad.no_grad():
        out = att(x, 1, 5).value[0]
    xv = x.value[0].astype(np.float64)
    q = xv @ att.q.weight.value.T + att.q.bias.value
    kv = xv @ att.kv.weight.value.T + att.kv.bias.value
    k, v = kv[:, :8], kv[:, 8:]
    heads = []
    for h in range(2):
        sl = slice(4 * h, 4 * h + 4)
        s = q[:, sl] @ k[:, sl].T / 2.0
        p = np.exp(s - s.max(axis=1, keepdims=True))
        heads.append((p / p.sum(axis=1, keepdims=True)) @ v[:, sl])
    ref = np.concatenate(heads, axis=1) @ att.proj.weight.value.T + att.proj.bias.value
    np.testing.assert_allclose(out, ref, atol=1e-5)


def test_batch_permutation_equivariance(rng):
    enc = PyramidEncoder(EncoderConfig(embed_dims=[8, 16, 32, 64], depths=[1, 1, 1, 1],
                                       num_heads=[1, 2, 4, 8]), rng=rng).eval()
    x = rng.standard_normal((3, 3, 32, 32)).astype(np.float32)
    perm = [2, 0, 1]
    with ad.no_grad():
        a = enc(ad.Var(x))
        b = enc(ad.Var(x[perm]))
    for fa, fb in zip(a.levels, b.levels):
        np.testing.assert_allclose(fa.value[perm], fb.value, atol=1e-5)
