"""Primitive spatial operators on dense float32 tensors.

Tensors are plain numpy arrays in channels x height x width layout
(C-order, so ``.ravel()`` is the flat row-major buffer). Spatial
operators act on the last two axes and are pure: they never mutate
their inputs and always return freshly allocated float32 arrays.
Reductions (convolution, average pooling) accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

PAD_MODES = ("zero", "reflection", "circular")

_NP_PAD_MODE = {"zero": "constant", "reflection": "reflect", "circular": "wrap"}


def as_tensor(a, rank: int | None = None) -> np.ndarray:
    """Coerce to a float32 array, optionally checking its rank."""
    t = np.asarray(a, dtype=np.float32)
    if rank is not None and t.ndim != rank:
        raise InvalidArgumentError(f"expected rank-{rank} tensor, got rank {t.ndim}")
    return t


@dataclass(frozen=True)
class PaddingSpec:
    """How to grow the two spatial axes before a windowed operator.

    ``amount`` is either one integer applied to all four sides or a
    (vertical, horizontal) pair. ``circular`` exists for equivariance
    testing and is never used by the built-in presets.
    """

    mode: str = "zero"
    amount: int | tuple[int, int] = 0

    def __post_init__(self):
        if self.mode not in PAD_MODES:
            raise InvalidArgumentError(f"unknown padding mode {self.mode!r}")
        pv, ph = self.per_axis()
        if pv < 0 or ph < 0:
            raise InvalidArgumentError("padding amount must be nonnegative")

    def per_axis(self) -> tuple[int, int]:
        if isinstance(self.amount, tuple):
            return self.amount
        return (self.amount, self.amount)


@dataclass(frozen=True)
class ConvSpec:
    """A convolution's kernel, bias, stride and padding.

    Kernel layout is (out_channels, in_channels, kh, kw); semantics are
    cross-correlation (no kernel flip), the usual CNN inference convention.
    """

    kernel: np.ndarray
    bias: np.ndarray | None = None
    stride: int = 1
    padding: PaddingSpec = field(default_factory=PaddingSpec)

    def __post_init__(self):
        if self.kernel.ndim != 4:
            raise InvalidArgumentError("kernel must be (out, in, kh, kw)")
        if self.stride < 1:
            raise InvalidArgumentError("stride must be >= 1")
        if self.bias is not None and self.bias.shape != (self.kernel.shape[0],):
            raise InvalidArgumentError("bias length must equal out_channels")


def pad(x: np.ndarray, spec: PaddingSpec) -> np.ndarray:
    """Pad the last two axes by ``spec.amount`` per side.

    Reflection mirrors without repeating the edge sample and requires the
    pad amount to be smaller than the padded axis extent.
    """
    x = np.asarray(x)
    if x.ndim < 2:
        raise InvalidArgumentError("pad expects at least two spatial axes")
    pv, ph = spec.per_axis()
    h, w = x.shape[-2:]
    if spec.mode == "reflection" and (pv >= h or ph >= w):
        raise InvalidArgumentError(
            f"reflection amount ({pv},{ph}) must be < spatial extent ({h},{w})"
        )
    width = [(0, 0)] * (x.ndim - 2) + [(pv, pv), (ph, ph)]
    out = np.pad(x, width, mode=_NP_PAD_MODE[spec.mode])
    return np.ascontiguousarray(out, dtype=np.float32)


def conv2d(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """2-D cross-correlation of a (C,H,W) tensor with a (O,C,kh,kw) kernel."""
    x = as_tensor(x, rank=3)
    k = spec.kernel
    n_out, n_in, kh, kw = k.shape
    if x.shape[0] != n_in:
        raise InvalidArgumentError(
            f"input has {x.shape[0]} channels, kernel expects {n_in}"
        )
    xp = pad(x, spec.padding).astype(np.float64)
    hp, wp = xp.shape[-2:]
    if hp < kh or wp < kw:
        raise InvalidArgumentError(
            f"padded extent ({hp},{wp}) smaller than kernel ({kh},{kw})"
        )
    s = spec.stride
    ho = (hp - kh) // s + 1
    wo = (wp - kw) // s + 1
    cols = np.empty((n_in, kh, kw, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i : i + s * (ho - 1) + 1 : s, j : j + s * (wo - 1) + 1 : s]
    acc = np.tensordot(k.astype(np.float64), cols, axes=([1, 2, 3], [0, 1, 2]))
    if spec.bias is not None:
        acc += spec.bias.astype(np.float64)[:, None, None]
    return acc.astype(np.float32)


def _window_views(x: np.ndarray, window: int, stride: int):
    h, w = x.shape[-2:]
    if window < 1 or stride < 1:
        raise InvalidArgumentError("window and stride must be >= 1")
    if window > h or window > w:
        raise InvalidArgumentError(f"window {window} exceeds extent ({h},{w})")
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    for i in range(window):
        for j in range(window):
            yield x[..., i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]


def maxpool(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Per-window maximum over the last two axes."""
    x = np.asarray(x, dtype=np.float32)
    out = None
    for v in _window_views(x, window, stride):
        out = v.copy() if out is None else np.maximum(out, v)
    return np.ascontiguousarray(out)


def avgpool(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Per-window arithmetic mean over the last two axes."""
    x = np.asarray(x, dtype=np.float32)
    acc = None
    for v in _window_views(x, window, stride):
        acc = v.astype(np.float64) if acc is None else acc + v
    return (acc / (window * window)).astype(np.float32)


def downsample(x: np.ndarray, factor: int) -> np.ndarray:
    """Keep indices 0, factor, 2*factor, ... along each spatial axis."""
    if factor < 1:
        raise InvalidArgumentError("downsample factor must be >= 1")
    x = np.asarray(x, dtype=np.float32)
    return np.ascontiguousarray(x[..., ::factor, ::factor])


def shift_circular(x: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Circularly shift content by (dy, dx); the value at (i,j) moves to (i+dy, j+dx)."""
    x = np.asarray(x, dtype=np.float32)
    return np.roll(x, (dy, dx), axis=(-2, -1))


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0))
