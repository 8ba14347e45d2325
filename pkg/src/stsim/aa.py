"""Anti-aliased composite operators.

BlurPool (low-pass filter + strided downsampling) and the operators
built from it: MaxBlurPool, AvgBlurPool, the three placements of the
blur inside a strided convolution, full convolution, and the
anti-aliased strided skip block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError
from .tensor import ConvSpec, PaddingSpec, as_tensor, conv2d, downsample, maxpool, pad, relu

PLACEMENTS = ("original", "feat_after_blur", "blur_before_act")


@dataclass(frozen=True)
class BlurKernel:
    """Normalized 2-D binomial low-pass filter.

    Coefficients are the outer product of a binomial row, normalized to
    sum to 1 so constant signals pass through unchanged. Size 1 is the
    degenerate identity filter, useful for reducing composite operators
    to their un-blurred forms in tests.
    """

    size: int
    coefficients: np.ndarray

    def __post_init__(self):
        if self.size < 1:
            raise InvalidArgumentError("blur kernel size must be >= 1")
        if self.coefficients.shape != (self.size, self.size):
            raise InvalidArgumentError("coefficient grid must be size x size")
        total = float(self.coefficients.sum())
        if abs(total - 1.0) > 1e-7:
            raise InvalidArgumentError(f"blur coefficients sum to {total}, expected 1")


def binomial_kernel(size: int = 3) -> BlurKernel:
    """Build the binomial blur of a given size (2 -> [1,1]/2, 3 -> [1,2,1]/4, ...)."""
    if size < 1:
        raise InvalidArgumentError("blur kernel size must be >= 1")
    row = np.array([math.comb(size - 1, i) for i in range(size)], dtype=np.float64)
    grid = np.outer(row, row)
    return BlurKernel(size=size, coefficients=grid / grid.sum())


@dataclass(frozen=True)
class AAConvVariant:
    """Where the blur sits inside an anti-aliased strided convolution.

    ``conv_stride * blur_stride`` must equal the total stride of the
    plain strided convolution being replaced.
    """

    placement: str
    conv_stride: int
    blur_stride: int

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise InvalidArgumentError(f"unknown placement {self.placement!r}")
        if self.conv_stride < 1 or self.blur_stride < 1:
            raise InvalidArgumentError("strides must be >= 1")

    @property
    def total_stride(self) -> int:
        return self.conv_stride * self.blur_stride


def _blur(x: np.ndarray, k: BlurKernel, pad_mode: str) -> np.ndarray:
    """Depthwise low-pass filter; spatial extent is preserved for odd sizes."""
    p = k.size // 2
    xp = pad(x, PaddingSpec(pad_mode, p)).astype(np.float64)
    h, w = xp.shape[-2:]
    ho, wo = h - k.size + 1, w - k.size + 1
    acc = np.zeros(xp.shape[:-2] + (ho, wo), dtype=np.float64)
    for i in range(k.size):
        for j in range(k.size):
            acc += k.coefficients[i, j] * xp[..., i : i + ho, j : j + wo]
    return acc.astype(np.float32)


def blurpool(x: np.ndarray, k: BlurKernel, stride: int, pad_mode: str = "reflection") -> np.ndarray:
    """Low-pass filter each channel, then downsample by ``stride``."""
    if stride < 1:
        raise InvalidArgumentError("stride must be >= 1")
    return downsample(_blur(x, k, pad_mode), stride)


def _maxpool_stride1_circular(x: np.ndarray, window: int) -> np.ndarray:
    # Dense max over windows wrapping around the torus; extent is preserved.
    x = np.asarray(x, dtype=np.float32)
    out = x.copy()
    for di in range(window):
        for dj in range(window):
            if di == 0 and dj == 0:
                continue
            out = np.maximum(out, np.roll(x, (-di, -dj), axis=(-2, -1)))
    return out


def max_blurpool(
    x: np.ndarray, window: int, k: BlurKernel, stride: int, pad_mode: str = "reflection"
) -> np.ndarray:
    """Stride-1 max pooling followed by blurpool."""
    if pad_mode == "circular":
        pooled = _maxpool_stride1_circular(x, window)
    else:
        pooled = maxpool(x, window, 1)
    return blurpool(pooled, k, stride, pad_mode)


def avg_blurpool(x: np.ndarray, k: BlurKernel, stride: int, pad_mode: str = "reflection") -> np.ndarray:
    """Anti-aliased average pooling: the filter itself does the averaging."""
    return blurpool(x, k, stride, pad_mode)


def aa_strided_conv(
    x: np.ndarray,
    spec: ConvSpec,
    variant: AAConvVariant,
    k: BlurKernel,
    blur_pad_mode: str = "reflection",
) -> tuple[np.ndarray, np.ndarray]:
    """Strided convolution with the stride split between conv and blur.

    Returns ``(output, feature_tap)``. The tap is the activation exported
    as a feature-embedding level; for the ``original`` placement it is
    taken before the blur, for the other placements it equals the output.
    """
    if spec.stride != variant.conv_stride:
        raise ConfigurationError(
            f"conv stride {spec.stride} != variant conv_stride {variant.conv_stride}"
        )
    y = conv2d(x, spec)
    if variant.placement == "original":
        t = relu(y)
        return blurpool(t, k, variant.blur_stride, blur_pad_mode), t
    if variant.placement == "feat_after_blur":
        out = blurpool(relu(y), k, variant.blur_stride, blur_pad_mode)
        return out, out
    out = relu(blurpool(y, k, variant.blur_stride, blur_pad_mode))
    return out, out


def fconv(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Full convolution: zero padding of 2k for a (2k+1) kernel.

    Every kernel coefficient touches every input sample; at stride 1 the
    output is 2k larger than the input.
    """
    kh, kw = spec.kernel.shape[-2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise InvalidArgumentError("full convolution requires an odd kernel")
    full = ConvSpec(
        kernel=spec.kernel,
        bias=spec.bias,
        stride=spec.stride,
        padding=PaddingSpec("zero", (kh - 1, kw - 1)),
    )
    return conv2d(x, full)


def aa_skip_block(
    x: np.ndarray,
    main: list[ConvSpec],
    skip: str,
    k: BlurKernel | None = None,
    skip_spec: ConvSpec | None = None,
    blur_pad_mode: str = "reflection",
) -> np.ndarray:
    """Residual block: a conv chain plus an (optionally anti-aliased) skip path.

    The main path applies each conv followed by a ReLU, except after the
    last conv. The skip path is the identity, a strided 1x1 conv, or a
    stride-1 1x1 conv followed by blurpool at the block's total stride.
    """
    if not main:
        raise InvalidArgumentError("main path must contain at least one conv")
    x = as_tensor(x, rank=3)
    y = x
    for i, cs in enumerate(main):
        y = conv2d(y, cs)
        if i < len(main) - 1:
            y = relu(y)
    n = 1
    for cs in main:
        n *= cs.stride

    if skip == "identity":
        if n != 1:
            raise ConfigurationError("identity skip requires a stride-1 main path")
        s = x
    elif skip == "strided":
        if skip_spec is None:
            raise ConfigurationError("strided skip needs a 1x1 conv spec")
        if skip_spec.stride != n:
            raise ConfigurationError(
                f"skip stride {skip_spec.stride} != main path stride {n}"
            )
        s = conv2d(x, skip_spec)
    elif skip == "aa_strided":
        if skip_spec is None or k is None:
            raise ConfigurationError("aa_strided skip needs a 1x1 conv spec and a blur kernel")
        if skip_spec.stride != 1:
            raise ConfigurationError("aa_strided skip conv must have stride 1")
        s = blurpool(conv2d(x, skip_spec), k, n, blur_pad_mode)
    else:
        raise InvalidArgumentError(f"unknown skip kind {skip!r}")

    if s.shape != y.shape:
        raise ConfigurationError(f"skip path shape {s.shape} != main path shape {y.shape}")
    return (y.astype(np.float64) + s.astype(np.float64)).astype(np.float32)
