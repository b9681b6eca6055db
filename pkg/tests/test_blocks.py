import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from useanet import autodiff as ad
from useanet import oracles
from useanet.blocks import ECA, EAA, LConv, MBFP, laplacian, laplacian_kernel
from useanet.errors import ConfigurationError, ShapeError
from useanet.model import HFA, uade


def var(a):
    return ad.Var(np.asarray(a, dtype=np.float32))


def zero_params(module):
    for _, p in module.named_parameters():
        p.value[...] = 0


def run(module, x):
    with ad.no_grad():
        return module(var(x)).value


def test_laplacian_stencil_sums_to_zero():
    k = laplacian_kernel(4)
    assert k.shape == (4, 1, 3, 3)
    assert np.all(k.sum(axis=(1, 2, 3)) == 0)
    assert k[0, 0, 1, 1] == 8 and k[0, 0, 0, 0] == -1


@given(st.floats(-1e4, 1e4, allow_nan=False, width=32))
def test_laplacian_constant_response_is_exactly_zero(c):
    with ad.no_grad():
        out = laplacian(var(np.full((1, 3, 7, 7), c))).value
    assert np.all(out[..., 1:-1, 1:-1] == 0.0)


def test_laplacian_matches_conv_oracle(rng):
    x = rng.standard_normal((1, 2, 6, 5)).astype(np.float32)
    with ad.no_grad():
        out = laplacian(var(x)).value
    ref = oracles.dwconv2d(x, laplacian_kernel(2), (1, 1), (1, 1))
    assert np.abs(out - ref).max() <= 1e-5


def test_lconv_parameter_count():
    assert LConv(32, 32, 3, rng=np.random.default_rng(0)).num_parameters() == 1408


def test_lconv_even_kernel_rejected():
    with pytest.raises(ConfigurationError):
        LConv(4, 4, 2, rng=np.random.default_rng(0))


def test_lconv_zero_input_gives_pointwise_bias(rng):
    m = LConv(4, 6, 3, rng=rng).eval()
    m.pw.bias.value[...] = rng.standard_normal(6)
    out = run(m, np.zeros((1, 4, 5, 5)))
    np.testing.assert_allclose(out, np.broadcast_to(m.pw.bias.value.reshape(1, 6, 1, 1), out.shape), atol=1e-6)


@pytest.mark.parametrize("specific", [True, False])
def test_mbfp_shape_and_weight_rows(rng, specific):
    m = MBFP(5, 8, rng=rng, specific=specific)
    out = run(m, rng.standard_normal((3, 5, 6, 6)))
    assert out.shape == (3, 8, 6, 6)
    np.testing.assert_allclose(m.last_weights.sum(axis=1), 1.0, atol=1e-5)
    assert np.all(m.last_weights > 0)


def test_mbfp_zero_fusion_gives_uniform_weights(rng):
    m = MBFP(4, 4, rng=rng)
    zero_params(m.fusion)
    run(m, rng.standard_normal((1, 4, 6, 6)))
    assert np.all(m.last_weights == np.float32(1 / 3))


def test_mbfp_edge_branch_on_constant_input(rng):
    m = MBFP(4, 4, rng=rng).eval()
    x = var(np.full((1, 4, 10, 10), 0.7))
    with ad.no_grad():
        branches = m.branch_outputs(x)
        fe = m.edge(m.adapt(x)).value
    inner = (..., slice(2, -2), slice(2, -2))
    assert np.array_equal(branches[1].value[inner], fe[inner])


def test_mbfp_rejects_wrong_channels(rng):
    with pytest.raises(ShapeError):
        run(MBFP(4, 4, rng=rng), np.zeros((1, 3, 6, 6)))


def test_eca_zero_init_closed_form(rng):
    m = ECA(8, rng=rng)
    zero_params(m)
    x = rng.standard_normal((2, 8, 5, 5))
    assert np.abs(run(m, x) - 0.25 * x).max() <= 1e-6


@given(st.integers(0, 2**31 - 1))
def test_eca_output_bounded_by_input(seed):
    rng = np.random.default_rng(seed)
    m = ECA(8, rng=rng)
    x = rng.standard_normal((1, 8, 5, 5)).astype(np.float32)
    assert np.all(np.abs(run(m, x)) <= np.abs(x))


def test_eca_channel_gate_spatial_permutation_invariant(rng):
    m = ECA(8, rng=rng)
    x = rng.standard_normal((1, 8, 4, 4)).astype(np.float32)
    perm = rng.permutation(16)
    xp = x.reshape(1, 8, 16)[..., perm].reshape(1, 8, 4, 4)
    with ad.no_grad():
        a, _ = m.gates(var(x))
        b, _ = m.gates(var(xp))
    np.testing.assert_allclose(a.value, b.value, atol=1e-6)


def test_eaa_constant_input_is_channel_gate_only(rng):
    m = EAA(6, rng=rng)
    x = np.full((1, 6, 6, 6), 1.3, np.float32)
    with ad.no_grad():
        gate = ad.sigmoid(m.mlp(ad.global_avg_pool(var(x)))).value
    out = run(m, x)
    np.testing.assert_allclose(out[..., 1:-1, 1:-1], (x * gate)[..., 1:-1, 1:-1], atol=1e-6)


def test_eaa_zero_init_constant_gives_half(rng):
    m = EAA(6, rng=rng)
    zero_params(m)
    out = run(m, np.full((1, 6, 6, 6), 2.0))
    assert np.abs(out[..., 1:-1, 1:-1] - 1.0).max() <= 1e-6


def test_eaa_amplifies_step_edge(rng):
    m = EAA(2, rng=rng)
    zero_params(m)
    x = np.ones((1, 2, 8, 8), np.float32)
    x[..., 4:] = 2.0
    gain = run(m, x) / (0.5 * x)
    assert gain[..., 1:-1, 4].min() > gain[..., 1:-1, 6:7].max()
    assert gain[..., 1:-1, 1:3].max() == 1.0


def test_uade_equal_predictions_exactly_one_and_a_half(rng):
    f = rng.standard_normal((2, 4, 8, 8)).astype(np.float32)
    p = var(rng.standard_normal((2, 1, 4, 4)))
    with ad.no_grad():
        out = uade(var(f), p, p).value
    assert np.array_equal(out, np.float32(1.5) * f)


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 30))
def test_uade_bounds_for_nonnegative_features(seed, spread):
    rng = np.random.default_rng(seed)
    f = np.abs(rng.standard_normal((1, 3, 8, 8))).astype(np.float32)
    d = var(rng.standard_normal((1, 1, 4, 4)) * spread)
    with ad.no_grad():
        out = uade(var(f), d, var(np.zeros((1, 1, 4, 4)))).value
    assert np.all(out >= f) and np.all(out <= 2 * f)


def test_uade_resize_matches_manual_oracle(rng):
    f = rng.standard_normal((1, 2, 16, 16)).astype(np.float32)
    fg, bg = rng.standard_normal((2, 1, 1, 8, 8)).astype(np.float32)
    with ad.no_grad():
        out = uade(var(f), var(fg), var(bg)).value
    w = 1 / (1 + np.exp(-oracles.bilinear_resize(fg - bg, 16, 16)))
    assert np.abs(out - (f + f * w)).max() <= 1e-6


def test_uade_saturation_limits(rng):
    f = rng.standard_normal((1, 2, 8, 8)).astype(np.float32)
    z = var(np.zeros((1, 1, 4, 4)))
    with ad.no_grad():
        hi = uade(var(f), var(np.full((1, 1, 4, 4), 40.0)), z).value
        lo = uade(var(f), var(np.full((1, 1, 4, 4), -40.0)), z).value
    assert np.abs(hi - 2 * f).max() <= 1e-6 and np.abs(lo - f).max() <= 1e-6


def test_hfa_zero_branches_pass_f2_through(rng):
    m = HFA(8, rng=rng).eval()
    for branch in (m.from3, m.from4):
        zero_params(branch)
    f2 = rng.standard_normal((1, 8, 8, 8)).astype(np.float32)
    with ad.no_grad():
        fused, _ = m.fuse(var(f2), var(rng.standard_normal((1, 8, 4, 4))), var(rng.standard_normal((1, 8, 2, 2))))
    assert np.array_equal(fused.value, f2)


@pytest.mark.parametrize("make", [lambda r: LConv(4, 4, 3, rng=r), lambda r: MBFP(4, 4, rng=r),
                                  lambda r: ECA(4, rng=r), lambda r: EAA(4, rng=r)])
def test_blocks_are_batch_equivariant(rng, make):
    m = make(rng).eval()
    x = rng.standard_normal((3, 4, 6, 6)).astype(np.float32)
    perm = [1, 2, 0]
    np.testing.assert_allclose(run(m, x)[perm], run(m, x[perm]), atol=1e-5)
