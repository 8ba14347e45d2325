"""Declarative feature-extraction backbones with tap points.

A backbone is an ordered list of layer specs. Layers marked ``tap``
export their activation as one level of the feature stack used by the
distance head. Presets cover an AlexNet-style baseline, its
shift-tolerant variant (stride-1 first conv + blur, blurred max pools),
a small VGG-style net with a skip block, and a tiny net for fast
training experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import aa
from .errors import ConfigurationError, InvalidArgumentError
from .tensor import ConvSpec, PaddingSpec, as_tensor, conv2d, maxpool, relu

LAYER_KINDS = (
    "conv",
    "aa_conv",
    "maxpool",
    "max_blurpool",
    "avg_blurpool",
    "relu",
    "skip_block",
    "fconv",
)


@dataclass(frozen=True)
class ConvDef:
    """Declarative geometry of one convolution (weights live in a WeightStore)."""

    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0
    pad_mode: str = "zero"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    tap: bool = False
    conv: ConvDef | None = None
    window: int = 0
    stride: int = 1
    blur_size: int = 3
    blur_stride: int = 1
    placement: str = "original"
    main: tuple[ConvDef, ...] = ()
    skip: str = "identity"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise InvalidArgumentError(f"unknown layer kind {self.kind!r}")


def conv_layer(name, out_channels, kernel_size, stride=1, padding=0, pad_mode="zero", tap=False):
    return LayerSpec(name, "conv", tap=tap,
                     conv=ConvDef(out_channels, kernel_size, stride, padding, pad_mode))


def aa_conv_layer(name, out_channels, kernel_size, conv_stride, blur_stride,
                  placement, padding=0, pad_mode="zero", blur_size=3, tap=False):
    return LayerSpec(name, "aa_conv", tap=tap,
                     conv=ConvDef(out_channels, kernel_size, conv_stride, padding, pad_mode),
                     blur_stride=blur_stride, blur_size=blur_size, placement=placement)


def fconv_layer(name, out_channels, kernel_size, stride=1, tap=False):
    return LayerSpec(name, "fconv", tap=tap,
                     conv=ConvDef(out_channels, kernel_size, stride))


def relu_layer(name, tap=False):
    return LayerSpec(name, "relu", tap=tap)


def maxpool_layer(name, window, stride):
    return LayerSpec(name, "maxpool", window=window, stride=stride)


def max_blurpool_layer(name, window, stride, blur_size=3):
    return LayerSpec(name, "max_blurpool", window=window, stride=stride, blur_size=blur_size)


def avg_blurpool_layer(name, stride, blur_size=3):
    return LayerSpec(name, "avg_blurpool", stride=stride, blur_size=blur_size)


def skip_block_layer(name, main, skip="aa_strided", blur_size=3, tap=False):
    return LayerSpec(name, "skip_block", tap=tap, main=tuple(main), skip=skip, blur_size=blur_size)


@dataclass(frozen=True)
class BackboneConfig:
    name: str
    layers: tuple[LayerSpec, ...]
    input_channels: int = 3
    min_input: int = 16

    def __post_init__(self):
        if not any(l.tap for l in self.layers):
            raise ConfigurationError("a backbone needs at least one tap")
        # Channel chaining and minimum-extent validation happen here so a
        # bad config fails at construction, not mid-forward.
        self.trace(self.min_input, self.min_input)

    @property
    def tap_count(self) -> int:
        return sum(1 for l in self.layers if l.tap)

    def trace(self, h: int, w: int) -> list[tuple[LayerSpec, int, int, int]]:
        """Walk the graph symbolically, returning (layer, channels, h, w) per layer."""
        c = self.input_channels
        rows = []
        for layer in self.layers:
            c, h, w = _layer_geometry(layer, c, h, w)
            if h < 1 or w < 1:
                raise ConfigurationError(
                    f"layer {layer.name!r} reduces spatial extent below 1 "
                    f"for the declared minimum input"
                )
            rows.append((layer, c, h, w))
        return rows

    def tap_channels(self) -> list[int]:
        """Channel count of each tapped level, in layer order."""
        return [c for layer, c, _, _ in self.trace(self.min_input, self.min_input) if layer.tap]


@dataclass(frozen=True)
class FeatureStack:
    """Per-level feature tensors produced by one backbone forward pass."""

    levels: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i):
        return self.levels[i]


def _conv_out(h: int, pad: int, k: int, s: int) -> int:
    return (h + 2 * pad - k) // s + 1


def _down_out(h: int, f: int) -> int:
    return (h - 1) // f + 1


def _check_blur_extent(layer: LayerSpec, h: int, w: int) -> None:
    # The blur's reflection padding requires the padded axis to be longer
    # than the pad amount.
    need = layer.blur_size // 2 + 1
    if h < need or w < need:
        raise ConfigurationError(
            f"layer {layer.name!r}: blur input extent ({h},{w}) too small "
            f"for a size-{layer.blur_size} filter"
        )


def _layer_geometry(layer: LayerSpec, c: int, h: int, w: int) -> tuple[int, int, int]:
    if layer.kind == "conv":
        d = layer.conv
        return d.out_channels, _conv_out(h, d.padding, d.kernel_size, d.stride), \
            _conv_out(w, d.padding, d.kernel_size, d.stride)
    if layer.kind == "aa_conv":
        d = layer.conv
        h2 = _conv_out(h, d.padding, d.kernel_size, d.stride)
        w2 = _conv_out(w, d.padding, d.kernel_size, d.stride)
        _check_blur_extent(layer, h2, w2)
        blur_grow = 0 if layer.blur_size % 2 else 1  # even filters grow the extent by 1
        return d.out_channels, _down_out(h2 + blur_grow, layer.blur_stride), \
            _down_out(w2 + blur_grow, layer.blur_stride)
    if layer.kind == "fconv":
        d = layer.conv
        p = d.kernel_size - 1
        return d.out_channels, _conv_out(h, p, d.kernel_size, d.stride), \
            _conv_out(w, p, d.kernel_size, d.stride)
    if layer.kind == "maxpool":
        return c, (h - layer.window) // layer.stride + 1, (w - layer.window) // layer.stride + 1
    if layer.kind == "max_blurpool":
        _check_blur_extent(layer, h - layer.window + 1, w - layer.window + 1)
        blur_grow = 0 if layer.blur_size % 2 else 1
        return c, _down_out(h - layer.window + 1 + blur_grow, layer.stride), \
            _down_out(w - layer.window + 1 + blur_grow, layer.stride)
    if layer.kind == "avg_blurpool":
        _check_blur_extent(layer, h, w)
        blur_grow = 0 if layer.blur_size % 2 else 1
        return c, _down_out(h + blur_grow, layer.stride), _down_out(w + blur_grow, layer.stride)
    if layer.kind == "relu":
        return c, h, w
    if layer.kind == "skip_block":
        for d in layer.main:
            c = d.out_channels
            h = _conv_out(h, d.padding, d.kernel_size, d.stride)
            w = _conv_out(w, d.padding, d.kernel_size, d.stride)
        return c, h, w
    raise InvalidArgumentError(f"unknown layer kind {layer.kind!r}")


def parameter_shapes(cfg: BackboneConfig) -> dict[str, tuple[int, ...]]:
    """Expected shape of every named weight entry the config consumes."""
    shapes: dict[str, tuple[int, ...]] = {}
    c = cfg.input_channels
    for layer in cfg.layers:
        if layer.kind in ("conv", "aa_conv", "fconv"):
            d = layer.conv
            shapes[f"{layer.name}.weight"] = (d.out_channels, c, d.kernel_size, d.kernel_size)
            shapes[f"{layer.name}.bias"] = (d.out_channels,)
        elif layer.kind == "skip_block":
            cin = c
            for i, d in enumerate(layer.main):
                shapes[f"{layer.name}.main{i}.weight"] = (d.out_channels, cin, d.kernel_size, d.kernel_size)
                shapes[f"{layer.name}.main{i}.bias"] = (d.out_channels,)
                cin = d.out_channels
            if layer.skip in ("strided", "aa_strided"):
                shapes[f"{layer.name}.skip.weight"] = (layer.main[-1].out_channels, c, 1, 1)
                shapes[f"{layer.name}.skip.bias"] = (layer.main[-1].out_channels,)
        c, _, _ = _layer_geometry(layer, c, cfg.min_input, cfg.min_input)
    return shapes


def parameter_count(cfg: BackboneConfig) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(cfg).values())


def _conv_spec(store, prefix: str, d: ConvDef, stride: int | None = None) -> ConvSpec:
    return ConvSpec(
        kernel=store[f"{prefix}.weight"],
        bias=store[f"{prefix}.bias"],
        stride=d.stride if stride is None else stride,
        padding=PaddingSpec(d.pad_mode, d.padding),
    )


def forward(cfg: BackboneConfig, weights, x: np.ndarray) -> FeatureStack:
    """Run the backbone, collecting tapped activations into a FeatureStack."""
    x = as_tensor(x, rank=3)
    if x.shape[0] != cfg.input_channels:
        raise InvalidArgumentError(
            f"input has {x.shape[0]} channels, config expects {cfg.input_channels}"
        )
    if min(x.shape[-2:]) < cfg.min_input:
        raise InvalidArgumentError(
            f"input extent {x.shape[-2:]} below preset minimum {cfg.min_input}"
        )
    levels: list[np.ndarray] = []
    cur = x
    for layer in cfg.layers:
        tapped = None
        if layer.kind == "conv":
            cur = conv2d(cur, _conv_spec(weights, layer.name, layer.conv))
        elif layer.kind == "fconv":
            cur = aa.fconv(cur, _conv_spec(weights, layer.name, layer.conv))
        elif layer.kind == "aa_conv":
            variant = aa.AAConvVariant(layer.placement, layer.conv.stride, layer.blur_stride)
            cur, tapped = aa.aa_strided_conv(
                cur, _conv_spec(weights, layer.name, layer.conv),
                variant, aa.binomial_kernel(layer.blur_size),
            )
        elif layer.kind == "maxpool":
            cur = maxpool(cur, layer.window, layer.stride)
        elif layer.kind == "max_blurpool":
            cur = aa.max_blurpool(cur, layer.window, aa.binomial_kernel(layer.blur_size), layer.stride)
        elif layer.kind == "avg_blurpool":
            cur = aa.avg_blurpool(cur, aa.binomial_kernel(layer.blur_size), layer.stride)
        elif layer.kind == "relu":
            cur = relu(cur)
        elif layer.kind == "skip_block":
            main = []
            cin_def = layer.main
            for i, d in enumerate(cin_def):
                main.append(_conv_spec(weights, f"{layer.name}.main{i}", d))
            skip_spec = None
            if layer.skip in ("strided", "aa_strided"):
                n = 1
                for d in cin_def:
                    n *= d.stride
                skip_def = ConvDef(cin_def[-1].out_channels, 1,
                                   stride=n if layer.skip == "strided" else 1)
                skip_spec = _conv_spec(weights, f"{layer.name}.skip", skip_def)
            cur = aa.aa_skip_block(cur, main, layer.skip,
                                   k=aa.binomial_kernel(layer.blur_size), skip_spec=skip_spec)
        if layer.tap:
            levels.append(tapped if tapped is not None else cur)
    return FeatureStack(tuple(levels))


# ---------------------------------------------------------------------------
# Presets

_ALEX_WIDTHS_FULL = (64, 192, 384, 256, 256)


def _alex_tail(widths, pool):
    _, c2, c3, c4, c5 = widths
    return (
        pool("pool1"),
        conv_layer("conv2", c2, 5, padding=2),
        relu_layer("relu2", tap=True),
        pool("pool2"),
        conv_layer("conv3", c3, 3, padding=1),
        relu_layer("relu3", tap=True),
        conv_layer("conv4", c4, 3, padding=1),
        relu_layer("relu4", tap=True),
        conv_layer("conv5", c5, 3, padding=1),
        relu_layer("relu5", tap=True),
    )


def _alex_baseline(widths, name):
    layers = (
        conv_layer("conv1", widths[0], 11, stride=4, padding=2),
        relu_layer("relu1", tap=True),
    ) + _alex_tail(widths, pool=lambda n: maxpool_layer(n, 3, 2))
    return BackboneConfig(name=name, layers=layers, min_input=40)


def _alex_shift_tolerant(widths, name):
    layers = (
        aa_conv_layer(
            "conv1", widths[0], 11, conv_stride=1, blur_stride=4,
            placement="blur_before_act", padding=2, pad_mode="reflection", tap=True,
        ),
    ) + _alex_tail(widths, pool=lambda n: max_blurpool_layer(n, 3, 2))
    return BackboneConfig(name=name, layers=layers, min_input=40)


def _vgg_small():
    layers = (
        conv_layer("conv1", 12, 3, padding=1),
        relu_layer("relu1", tap=True),
        avg_blurpool_layer("pool1", 2),
        conv_layer("conv2", 24, 3, padding=1),
        relu_layer("relu2", tap=True),
        avg_blurpool_layer("pool2", 2),
        skip_block_layer(
            "block1",
            main=(ConvDef(32, 3, stride=2, padding=1), ConvDef(32, 3, stride=1, padding=1)),
            skip="aa_strided",
        ),
        relu_layer("relu3", tap=True),
    )
    return BackboneConfig(name="vgg-small", layers=layers, min_input=16)


def _tiny():
    layers = (
        conv_layer("conv1", 8, 3, padding=1),
        relu_layer("relu1", tap=True),
        avg_blurpool_layer("pool1", 2),
        conv_layer("conv2", 12, 3, padding=1),
        relu_layer("relu2", tap=True),
        avg_blurpool_layer("pool2", 2),
        conv_layer("conv3", 16, 3, padding=1),
        relu_layer("relu3", tap=True),
    )
    return BackboneConfig(name="tiny", layers=layers, min_input=16)


PRESET_NAMES = (
    "alex-baseline",
    "alex-st",
    "vgg-small",
    "tiny",
    "alex-baseline-full",
    "alex-st-full",
)


def preset(name: str) -> BackboneConfig:
    """Named backbone configurations.

    ``alex-baseline``/``alex-st`` use channel widths reduced 4x from the
    classical network so CPU runs stay fast; the ``-full`` variants keep
    the published widths so converted pretrained checkpoints load as-is.
    """
    scaled = tuple(w // 4 for w in _ALEX_WIDTHS_FULL)
    if name == "alex-baseline":
        return _alex_baseline(scaled, name)
    if name == "alex-st":
        return _alex_shift_tolerant(scaled, name)
    if name == "alex-baseline-full":
        return _alex_baseline(_ALEX_WIDTHS_FULL, name)
    if name == "alex-st-full":
        return _alex_shift_tolerant(_ALEX_WIDTHS_FULL, name)
    if name == "vgg-small":
        return _vgg_small()
    if name == "tiny":
        return _tiny()
    raise InvalidArgumentError(f"unknown preset {name!r} (choose from {', '.join(PRESET_NAMES)})")


def describe(cfg: BackboneConfig) -> str:
    """Human-readable table of layers, strides, taps, and parameter counts."""
    shapes = parameter_shapes(cfg)
    rows = cfg.trace(cfg.min_input, cfg.min_input)
    lines = [
        f"backbone {cfg.name!r}  (input {cfg.input_channels}ch, min extent {cfg.min_input})",
        f"{'layer':<12}{'kind':<14}{'stride':<8}{'out':<14}{'tap':<5}{'params':>8}",
    ]
    for layer, c, h, w in rows:
        n_params = sum(
            int(np.prod(s)) for name, s in shapes.items()
            if name == f"{layer.name}.weight" or name == f"{layer.name}.bias"
            or name.startswith(f"{layer.name}.main") or name.startswith(f"{layer.name}.skip")
        )
        stride = _total_stride(layer)
        lines.append(
            f"{layer.name:<12}{layer.kind:<14}{stride:<8}{f'{c}x{h}x{w}':<14}"
            f"{'tap' if layer.tap else '':<5}{n_params:>8}"
        )
    lines.append(f"total parameters: {parameter_count(cfg)}   taps: {cfg.tap_count}")
    return "\n".join(lines)


def _total_stride(layer: LayerSpec) -> int:
    if layer.kind == "conv" or layer.kind == "fconv":
        return layer.conv.stride
    if layer.kind == "aa_conv":
        return layer.conv.stride * layer.blur_stride
    if layer.kind in ("maxpool", "max_blurpool", "avg_blurpool"):
        return layer.stride
    if layer.kind == "skip_block":
        n = 1
        for d in layer.main:
            n *= d.stride
        return n
    return 1


def random_weights(cfg: BackboneConfig, seed: int, bias_std: float = 0.1):
    """He-normal kernels and small random biases, deterministic in the seed.

    Nonzero biases matter: an all-zero-bias network is positively
    homogeneous, so channel-normalized features become blind to intensity
    scaling of the input.
    """
    from .weights import WeightStore

    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name, shape in parameter_shapes(cfg).items():
        if name.endswith(".bias"):
            store.set(name, rng.normal(0.0, bias_std, size=shape).astype(np.float32))
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            store.set(name, rng.normal(0.0, std, size=shape).astype(np.float32))
    return store
