import numpy as np
import pytest

from useanet import autodiff as ad
from useanet.config import PRESETS
from useanet.errors import ConfigurationError, ShapeMismatchError
from useanet.model import ModelConfig, USEANet, predict_mask
from useanet.profiler import profile


def forward(model, x):
    with ad.no_grad():
        return model(np.asarray(x, np.float32))


def test_default_scale_map_shapes():
    model = USEANet(ModelConfig(), seed=0).eval()
    out = forward(model, np.random.default_rng(0).standard_normal((1, 3, 256, 256)))
    assert out.shapes() == {2: (1, 1, 32, 32), 3: (1, 1, 16, 16), 4: (1, 1, 8, 8), 5: (1, 1, 32, 32)}
    assert out.final.shape == (1, 1, 256, 256)
    assert 0.0 <= out.final.value.min() and out.final.value.max() <= 1.0
    fg, bg = out.logits[5]
    assert not np.allclose(fg.value, bg.value)


def test_two_layer_drops_scales_three_and_four(micro_model):
    cfg = ModelConfig.micro(multi_scale=False)
    out = forward(USEANet(cfg, seed=0).eval(), np.zeros((1, 3, 64, 64)))
    assert sorted(out.logits) == [2, 5]


@pytest.mark.parametrize("toggle", ["attention", "multi_branch", "multi_scale", "ultrasound_specific"])
def test_each_toggle_reduces_parameters_and_flops(toggle):
    full = profile(ModelConfig.micro())
    ablated = profile(ModelConfig.micro(**{toggle: False}))
    assert ablated.params < full.params
    assert ablated.flops < full.flops


def test_identical_batch_items_give_identical_masks(micro_model):
    x = np.random.default_rng(1).standard_normal((1, 3, 64, 64))
    out = forward(micro_model, np.concatenate([x, x]))
    assert np.array_equal(out.final.value[0], out.final.value[1])


def test_forward_is_deterministic(micro_model):
    x = np.random.default_rng(2).standard_normal((1, 3, 64, 64))
    a = forward(micro_model, x).final.value
    b = forward(micro_model, x).final.value
    assert a.tobytes() == b.tobytes()


def test_fresh_models_with_same_seed_match():
    a = USEANet(ModelConfig.micro(), seed=3).state_dict()
    b = USEANet(ModelConfig.micro(), seed=3).state_dict()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)


def test_outputs_stay_in_range_over_random_seeds(micro_model):
    for seed in range(100):
        x = np.random.default_rng(seed).standard_normal((1, 3, 64, 64)) * (1 + seed % 5)
        out = forward(micro_model, x)
        assert np.isfinite(out.final.value).all()
        assert out.final.value.min() >= 0.0 and out.final.value.max() <= 1.0
        w = np.concatenate([p.last_weights for p in micro_model.processors])
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-5)


def test_predict_mask_examples():
    assert not predict_mask(np.full((4, 4), 0.4)).any()
    assert predict_mask(np.full((4, 4), 0.6)).all()
    m = np.random.default_rng(0).random((9, 9))
    assert np.array_equal(predict_mask(m, 0.3), (m >= 0.3).astype(np.uint8))
    assert predict_mask(np.array([0.5]))[0] == 1


def test_config_roundtrip_and_validation():
    cfg = ModelConfig.tiny(attention=False)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigurationError):
        ModelConfig.from_dict({"input_size": 48})
    with pytest.raises(ConfigurationError):
        ModelConfig.from_dict({"bogus": 1})
    assert set(PRESETS) == {"full", "tiny", "micro"}


def test_load_state_dict_names_first_offender():
    store = USEANet(ModelConfig.micro(), seed=0).state_dict()
    tiny = USEANet(ModelConfig.tiny(), seed=0)
    with pytest.raises(ShapeMismatchError) as err:
        tiny.load_state_dict(store)
    first_bad = next(k for k in sorted(store) if store[k].shape != tiny.state_dict()[k].shape)
    assert err.value.name == first_bad
    assert first_bad in str(err.value)
