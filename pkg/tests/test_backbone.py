import numpy as np
import pytest

from stsim import InvalidArgumentError, WeightNotFoundError, WeightStore
from stsim import backbone as bb
from stsim.harness import smoothed_noise


def zero_weights(cfg):
    store = WeightStore()
    for name, shape in bb.parameter_shapes(cfg).items():
        store.set(name, np.zeros(shape, dtype=np.float32))
    return store


class TestForward:
    def test_tiny_level_extents(self):
        cfg = bb.preset("tiny")
        store = bb.random_weights(cfg, 0)
        x = np.random.default_rng(0).normal(size=(3, 16, 16)).astype(np.float32)
        stack = bb.forward(cfg, store, x)
        assert [f.shape[-1] for f in stack] == [16, 8, 4]
        assert len(stack) == cfg.tap_count == 3

    def test_zero_weights_give_zero_levels(self):
        cfg = bb.preset("tiny")
        x = np.random.default_rng(1).normal(size=(3, 16, 16)).astype(np.float32)
        stack = bb.forward(cfg, zero_weights(cfg), x)
        for level in stack:
            np.testing.assert_array_equal(level, np.zeros_like(level))

    def test_forward_is_deterministic(self):
        cfg = bb.preset("vgg-small")
        store = bb.random_weights(cfg, 2)
        x = np.random.default_rng(2).normal(size=(3, 20, 20)).astype(np.float32)
        a = bb.forward(cfg, store, x)
        b = bb.forward(cfg, store, x)
        for la, lb in zip(a, b):
            np.testing.assert_array_equal(la, lb)

    def test_levels_are_finite(self):
        for name in ("tiny", "vgg-small", "alex-baseline", "alex-st"):
            cfg = bb.preset(name)
            store = bb.random_weights(cfg, 3)
            x = np.random.default_rng(3).normal(size=(3, 41, 40)).astype(np.float32)
            for level in bb.forward(cfg, store, x):
                assert np.isfinite(level).all()

    def test_missing_weight_entry_is_reported_by_name(self):
        cfg = bb.preset("tiny")
        store = bb.random_weights(cfg, 4)
        partial = WeightStore({n: store[n] for n in store.names() if n != "conv2.weight"})
        x = np.zeros((3, 16, 16), dtype=np.float32)
        with pytest.raises(WeightNotFoundError, match="conv2.weight"):
            bb.forward(cfg, partial, x)

    def test_undersized_input_rejected(self):
        cfg = bb.preset("alex-baseline")
        store = bb.random_weights(cfg, 5)
        with pytest.raises(InvalidArgumentError):
            bb.forward(cfg, store, np.zeros((3, 16, 16), dtype=np.float32))

    def test_wrong_channel_count_rejected(self):
        cfg = bb.preset("tiny")
        store = bb.random_weights(cfg, 6)
        with pytest.raises(InvalidArgumentError):
            bb.forward(cfg, store, np.zeros((1, 16, 16), dtype=np.float32))


class TestPresets:
    def test_baseline_trunk_stride_product(self):
        cfg = bb.preset("alex-baseline")
        last_tap = max(i for i, l in enumerate(cfg.layers) if l.tap)
        product = 1
        for layer in cfg.layers[: last_tap + 1]:
            product *= bb._total_stride(layer)
        assert product == 16  # 4 (first conv) * 2 * 2 (pools)
        assert cfg.layers[0].conv.stride == 4

    def test_shift_tolerant_first_conv_keeps_total_stride(self):
        cfg = bb.preset("alex-st")
        first = cfg.layers[0]
        assert first.kind == "aa_conv"
        assert first.conv.stride * first.blur_stride == 4
        assert first.placement == "blur_before_act"
        assert first.conv.pad_mode == "reflection" and first.conv.padding == 2

    def test_tiny_parameter_budget(self):
        assert bb.parameter_count(bb.preset("tiny")) <= 5000

    def test_unknown_preset_rejected(self):
        with pytest.raises(InvalidArgumentError):
            bb.preset("resnet-50")

    @pytest.mark.parametrize("hw", [(64, 64), (64, 61), (57, 63)])
    def test_antialiased_presets_preserve_level_extents(self, hw):
        h, w = hw
        cfg_b = bb.preset("alex-baseline")
        cfg_s = bb.preset("alex-st")
        store = bb.random_weights(cfg_b, 7)
        x = np.random.default_rng(7).normal(size=(3, h, w)).astype(np.float32)
        sb = bb.forward(cfg_b, store, x)
        ss = bb.forward(cfg_s, store, x)
        assert [f.shape for f in sb] == [f.shape for f in ss]

    def test_full_width_presets_share_topology(self):
        cfg = bb.preset("alex-baseline-full")
        shapes = bb.parameter_shapes(cfg)
        assert shapes["conv1.weight"] == (64, 3, 11, 11)
        assert shapes["conv5.weight"] == (256, 256, 3, 3)


class TestDescribe:
    def test_baseline_lists_five_taps(self):
        body = bb.describe(bb.preset("alex-baseline")).splitlines()[2:]  # skip headers
        assert sum(1 for line in body if " tap " in f" {line} ") == 5

    def test_tiny_lists_three_taps(self):
        text = bb.describe(bb.preset("tiny"))
        assert text.count("tap") >= 3

    def test_describe_is_stable(self):
        cfg = bb.preset("vgg-small")
        assert bb.describe(cfg) == bb.describe(cfg)


def stack_shift_gap(cfg, store, x):
    """Mean per-level L2 between the aligned and 1-px-shifted crops."""
    w = x.shape[-1]
    a = x[:, :, 0 : w - 3]
    b = x[:, :, 1 : w - 2]
    fa = bb.forward(cfg, store, a)
    fb = bb.forward(cfg, store, b)
    return float(np.mean([np.linalg.norm(la - lb) for la, lb in zip(fa, fb)]))


class TestProperties:
    def test_shift_damping_of_antialiased_preset(self):
        cfg_b = bb.preset("alex-baseline")
        cfg_s = bb.preset("alex-st")
        rng = np.random.default_rng(8)
        wins = 0
        trials = 50
        for t in range(trials):
            store = bb.random_weights(cfg_b, 100 + t)
            x = smoothed_noise(rng, 3, 40, 43)
            if stack_shift_gap(cfg_s, store, x) < stack_shift_gap(cfg_b, store, x):
                wins += 1
        assert wins >= 45, f"anti-aliased preset won only {wins}/{trials} trials"

    def test_first_conv_weight_scaling_scales_first_level(self):
        cfg = bb.preset("tiny")
        store = bb.random_weights(cfg, 9)
        store.set("conv1.bias", np.zeros_like(store["conv1.bias"]))
        x = np.abs(np.random.default_rng(9).normal(size=(3, 16, 16))).astype(np.float32)
        scaled = WeightStore({n: store[n] for n in store.names()})
        scaled.set("conv1.weight", store["conv1.weight"] * 2.0)
        base = bb.forward(cfg, store, x)
        doubled = bb.forward(cfg, scaled, x)
        np.testing.assert_allclose(doubled[0], 2.0 * base[0], rtol=1e-5, atol=1e-6)


class TestConfigFiles:
    @pytest.mark.parametrize("name", ["tiny", "vgg-small", "alex-st"])
    def test_json_round_trip_preserves_forward(self, name, tmp_path):
        from stsim.config import load_config, save_config

        cfg = bb.preset(name)
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        again = load_config(path)
        assert again.name == cfg.name
        store = bb.random_weights(cfg, 11)
        x = np.random.default_rng(11).normal(size=(3, 44, 44)).astype(np.float32)
        for a, b in zip(bb.forward(cfg, store, x), bb.forward(again, store, x)):
            np.testing.assert_array_equal(a, b)

    def test_bad_json_rejected(self, tmp_path):
        from stsim import FormatError
        from stsim.config import load_config

        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            load_config(path)

    def test_missing_fields_rejected(self):
        from stsim import FormatError
        from stsim.config import config_from_json

        with pytest.raises(FormatError):
            config_from_json('{"layers": []}')

    def test_presets_never_use_circular_padding(self):
        for name in bb.PRESET_NAMES:
            for layer in bb.preset(name).layers:
                if layer.conv is not None:
                    assert layer.conv.pad_mode in ("zero", "reflection")
