import numpy as np
import pytest

from stsim import (
    ConvSpec,
    InvalidArgumentError,
    PaddingSpec,
    avgpool,
    conv2d,
    downsample,
    maxpool,
    pad,
    shift_circular,
)
from oracles import avgpool_bruteforce, conv2d_bruteforce, maxpool_bruteforce


def t3(a):
    """Lift a 2-D list/array to a 1-channel tensor."""
    return np.asarray(a, dtype=np.float32)[None, :, :]


class TestPad:
    def test_zero_ring(self):
        out = pad(t3([[1, 2], [3, 4]]), PaddingSpec("zero", 1))
        expected = t3([
            [0, 0, 0, 0],
            [0, 1, 2, 0],
            [0, 3, 4, 0],
            [0, 0, 0, 0],
        ])
        np.testing.assert_array_equal(out, expected)

    def test_reflection_mirrors_without_edge_repeat(self):
        out = pad(t3([[1, 2, 3]]), PaddingSpec("reflection", (0, 1)))
        np.testing.assert_array_equal(out, t3([[2, 1, 2, 3, 2]]))

    def test_circular_pad_then_center_crop_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(1, 3, 5)).astype(np.float32)
        out = pad(x, PaddingSpec("circular", 1))
        np.testing.assert_array_equal(out[:, 1:-1, 1:-1], x)

    @pytest.mark.parametrize("mode", ["zero", "reflection", "circular"])
    def test_pad_then_center_crop_identity_all_modes(self, mode):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 4, 6)).astype(np.float32)
        out = pad(x, PaddingSpec(mode, 2))
        np.testing.assert_array_equal(out[:, 2:-2, 2:-2], x)

    def test_reflection_amount_must_be_less_than_extent(self):
        with pytest.raises(InvalidArgumentError):
            pad(t3([[1, 2, 3]]), PaddingSpec("reflection", 1))  # height extent is 1

    def test_unknown_mode_rejected(self):
        with pytest.raises(InvalidArgumentError):
            PaddingSpec("mirror", 1)


class TestConv2d:
    def test_scalar_kernel_doubles(self):
        x = t3(np.arange(9, dtype=np.float32).reshape(3, 3))
        spec = ConvSpec(kernel=np.full((1, 1, 1, 1), 2.0, dtype=np.float32))
        np.testing.assert_allclose(conv2d(x, spec), 2 * x)

    def test_identity_kernel_with_same_padding(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(1, 3, 3)).astype(np.float32)
        k = np.zeros((1, 1, 3, 3), dtype=np.float32)
        k[0, 0, 1, 1] = 1.0
        spec = ConvSpec(kernel=k, padding=PaddingSpec("zero", 1))
        np.testing.assert_allclose(conv2d(x, spec), x, atol=1e-7)

    def test_strided_conv_matches_bruteforce(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(3, 5, 5)).astype(np.float32)
        k = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
        b = rng.normal(size=4).astype(np.float32)
        got = conv2d(x, ConvSpec(kernel=k, bias=b, stride=2))
        want = conv2d_bruteforce(x, k, b, stride=2)
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_channel_mismatch_rejected(self):
        x = np.zeros((2, 4, 4), dtype=np.float32)
        k = np.zeros((1, 3, 3, 3), dtype=np.float32)
        with pytest.raises(InvalidArgumentError):
            conv2d(x, ConvSpec(kernel=k))

    def test_kernel_larger_than_padded_input_rejected(self):
        x = np.zeros((1, 2, 2), dtype=np.float32)
        k = np.zeros((1, 1, 5, 5), dtype=np.float32)
        with pytest.raises(InvalidArgumentError):
            conv2d(x, ConvSpec(kernel=k))


class TestPooling:
    def test_max_of_four(self):
        np.testing.assert_array_equal(maxpool(t3([[1, 3], [2, 4]]), 2, 1), t3([[4]]))

    def test_window_one_is_identity(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(maxpool(x, 1, 1), x)

    @pytest.mark.parametrize("factor", [2, 3, 4])
    def test_strided_maxpool_decomposes_exactly(self, factor):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(1, 6, 6)).astype(np.float32)
        direct = maxpool(x, 2, factor)
        composed = downsample(maxpool(x, 2, 1), factor)
        np.testing.assert_array_equal(direct, composed)

    def test_window_larger_than_extent_rejected(self):
        with pytest.raises(InvalidArgumentError):
            maxpool(np.zeros((1, 2, 2), dtype=np.float32), 3, 1)

    def test_mean_of_four(self):
        np.testing.assert_allclose(avgpool(t3([[1, 3], [2, 4]]), 2, 1), t3([[2.5]]))

    def test_avgpool_constant_stays_constant(self):
        x = np.full((2, 5, 5), 1.25, dtype=np.float32)
        for window in (1, 2, 3):
            out = avgpool(x, window, 1)
            np.testing.assert_allclose(out, np.full_like(out, 1.25), atol=1e-7)

    def test_avgpool_matches_bruteforce(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(1, 6, 6)).astype(np.float32)
        got = avgpool(x, 2, 2)
        np.testing.assert_allclose(got, avgpool_bruteforce(x, 2, 2), atol=1e-6)

    def test_maxpool_matches_bruteforce(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(2, 6, 6)).astype(np.float32)
        got = maxpool(x, 3, 2)
        np.testing.assert_allclose(got, maxpool_bruteforce(x, 3, 2), atol=0)


class TestDownsample:
    def test_keeps_even_indices(self):
        x = np.arange(4, dtype=np.float32).reshape(1, 1, 4)
        np.testing.assert_array_equal(downsample(x, 2), [[[0, 2]]])

    def test_factor_one_is_identity(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(1, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(downsample(x, 1), x)

    def test_ramp_keeps_even_grid(self):
        x = np.arange(25, dtype=np.float32).reshape(1, 5, 5)
        out = downsample(x, 2)
        np.testing.assert_array_equal(out[0], x[0][::2, ::2])
        assert out.shape == (1, 3, 3)


class TestShiftCircular:
    def test_zero_shift_identity(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(1, 4, 5)).astype(np.float32)
        np.testing.assert_array_equal(shift_circular(x, 0, 0), x)

    def test_full_wrap_identity(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(1, 4, 5)).astype(np.float32)
        np.testing.assert_array_equal(shift_circular(x, 0, 5), x)

    def test_shift_then_unshift_identity(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(1, 4, 5)).astype(np.float32)
        np.testing.assert_array_equal(shift_circular(shift_circular(x, 0, 1), 0, -1), x)


class TestProperties:
    def test_conv_equivariant_under_circular_shift(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            x = rng.normal(size=(2, 6, 6)).astype(np.float32)
            k = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
            spec = ConvSpec(kernel=k, padding=PaddingSpec("circular", 1))
            dy, dx = int(rng.integers(0, 6)), int(rng.integers(0, 6))
            lhs = conv2d(shift_circular(x, dy, dx), spec)
            rhs = shift_circular(conv2d(x, spec), dy, dx)
            np.testing.assert_allclose(lhs, rhs, atol=1e-6)

    def test_operators_are_pure(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(2, 6, 6)).astype(np.float32)
        snapshot = x.copy()
        k = rng.normal(size=(2, 2, 3, 3)).astype(np.float32)
        spec = ConvSpec(kernel=k, stride=2, padding=PaddingSpec("reflection", 1))
        first = conv2d(x, spec)
        second = conv2d(x, spec)
        np.testing.assert_array_equal(first, second)
        np.testing.assert_array_equal(x, snapshot)
        np.testing.assert_array_equal(maxpool(x, 2, 2), maxpool(x, 2, 2))

    def test_outputs_finite_for_finite_inputs(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            x = (rng.normal(size=(2, 7, 7)) * 100).astype(np.float32)
            k = rng.normal(size=(2, 2, 3, 3)).astype(np.float32)
            outs = [
                conv2d(x, ConvSpec(kernel=k, padding=PaddingSpec("reflection", 2))),
                maxpool(x, 2, 2),
                avgpool(x, 3, 1),
                downsample(x, 3),
                shift_circular(x, 2, -4),
            ]
            for out in outs:
                assert np.isfinite(out).all()
