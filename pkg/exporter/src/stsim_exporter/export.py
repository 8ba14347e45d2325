"""Checkpoint conversion and parity-fixture generation.

Maps torchvision-style AlexNet feature checkpoints (``features.N.weight``)
onto the metric engine's layer names (``conv1..conv5``), optionally
slicing channel widths down to the engine's reduced presets. Fixtures
pair a deterministic input tensor with the expected per-level outputs of
this module's own torch forward pass; the metric engine must reproduce
them within a fixed tolerance.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .stpw import read_stpw, write_stpw

FIXTURE_TOLERANCE = 1e-4

FULL_WIDTHS = (64, 192, 384, 256, 256)

# torchvision AlexNet feature-extractor indices for conv1..conv5
_TORCHVISION_KEYS = {i + 1: f"features.{n}" for i, n in enumerate((0, 3, 6, 8, 10))}

PRESET_WIDTHS = {
    "alex-baseline": tuple(w // 4 for w in FULL_WIDTHS),
    "alex-st": tuple(w // 4 for w in FULL_WIDTHS),
    "alex-baseline-full": FULL_WIDTHS,
    "alex-st-full": FULL_WIDTHS,
}

# Fixture forwards replicate only the plain baseline trunk; the
# anti-aliased operators stay exclusive to the metric engine.
FIXTURE_PRESETS = ("alex-baseline", "alex-baseline-full")


class ExportError(ValueError):
    pass


def load_checkpoint(path) -> dict[str, torch.Tensor]:
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise ExportError(f"{path}: cannot read checkpoint ({e})") from e
    if not isinstance(state, dict):
        raise ExportError(f"{path}: checkpoint is not a state dict")
    return {k: v for k, v in state.items() if isinstance(v, torch.Tensor)}


def _checkpoint_conv(state: dict[str, torch.Tensor], index: int):
    """Kernel and bias of conv<index>, accepting either naming scheme."""
    for prefix in (_TORCHVISION_KEYS[index], f"conv{index}"):
        if f"{prefix}.weight" in state:
            return state[f"{prefix}.weight"], state.get(f"{prefix}.bias")
    raise ExportError(f"layer conv{index}: no matching entry in checkpoint")


def convert(state: dict[str, torch.Tensor], preset: str) -> dict[str, np.ndarray]:
    """Map checkpoint tensors onto the preset's layer names and widths.

    Reduced-width presets take the leading slice of each kernel along both
    channel axes; shapes that cannot cover the target report the first
    offending layer.
    """
    if preset not in PRESET_WIDTHS:
        raise ExportError(f"unknown preset {preset!r}")
    widths = PRESET_WIDTHS[preset]
    out: dict[str, np.ndarray] = {}
    in_channels = 3
    for i, out_channels in enumerate(widths, start=1):
        kernel, bias = _checkpoint_conv(state, i)
        if kernel.ndim != 4:
            raise ExportError(f"layer conv{i}: kernel has rank {kernel.ndim}, expected 4")
        have = tuple(kernel.shape)
        if have[0] < out_channels or have[1] < in_channels:
            raise ExportError(
                f"layer conv{i}: checkpoint shape {have} does not cover "
                f"({out_channels}, {in_channels}, ...)"
            )
        sliced = kernel[:out_channels, :in_channels].contiguous()
        out[f"conv{i}.weight"] = sliced.numpy().astype(np.float32)
        if bias is None:
            out[f"conv{i}.bias"] = np.zeros(out_channels, dtype=np.float32)
        else:
            if bias.shape[0] < out_channels:
                raise ExportError(
                    f"layer conv{i}: bias length {bias.shape[0]} < {out_channels}"
                )
            out[f"conv{i}.bias"] = bias[:out_channels].numpy().astype(np.float32)
        in_channels = out_channels
    return out


def forward_levels(weights: dict[str, np.ndarray], x: np.ndarray) -> list[np.ndarray]:
    """Baseline-trunk forward pass (torch), returning the five tapped levels."""
    t = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32)).unsqueeze(0)

    def conv(t, i, stride, padding):
        w = torch.from_numpy(weights[f"conv{i}.weight"])
        b = torch.from_numpy(weights[f"conv{i}.bias"])
        return F.conv2d(t, w, b, stride=stride, padding=padding)

    levels = []
    t = F.relu(conv(t, 1, 4, 2))
    levels.append(t)
    t = F.max_pool2d(t, 3, 2)
    t = F.relu(conv(t, 2, 1, 2))
    levels.append(t)
    t = F.max_pool2d(t, 3, 2)
    t = F.relu(conv(t, 3, 1, 1))
    levels.append(t)
    t = F.relu(conv(t, 4, 1, 1))
    levels.append(t)
    t = F.relu(conv(t, 5, 1, 1))
    levels.append(t)
    return [l.squeeze(0).numpy().astype(np.float32) for l in levels]


@dataclass
class FixturePaths:
    meta: str
    input: str
    expected: str


def fixture_paths(out_path: str, seed: int) -> FixturePaths:
    stem, _ = os.path.splitext(out_path)
    return FixturePaths(
        meta=f"{stem}.fixture{seed}.json",
        input=f"{stem}.fixture{seed}.input.stpw",
        expected=f"{stem}.fixture{seed}.expected.stpw",
    )


def make_fixture(weights: dict[str, np.ndarray], preset: str, seed: int,
                 out_path: str, size: int = 48) -> FixturePaths:
    """Write a deterministic input tensor and its expected level outputs."""
    if preset not in FIXTURE_PRESETS:
        raise ExportError(
            f"fixtures are only generated for {FIXTURE_PRESETS}; "
            f"{preset!r} shares its weights with the matching baseline"
        )
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(3, size, size)).astype(np.float32)
    levels = forward_levels(weights, x)
    paths = fixture_paths(out_path, seed)
    write_stpw({"input": x}, paths.input)
    write_stpw({f"level{i}": lvl for i, lvl in enumerate(levels)}, paths.expected)
    with open(paths.meta, "w", encoding="utf-8") as f:
        json.dump(
            {
                "preset": preset,
                "seed": seed,
                "tolerance": FIXTURE_TOLERANCE,
                "input": os.path.basename(paths.input),
                "expected": os.path.basename(paths.expected),
                "levels": len(levels),
            },
            f,
            indent=2,
        )
        f.write("\n")
    return paths


def verify_fixture(paths: FixturePaths, got_path: str) -> float:
    """Worst elementwise gap between an engine's outputs and the fixture."""
    expected = read_stpw(paths.expected)
    got = read_stpw(got_path)
    worst = 0.0
    for name, want in expected.items():
        if name not in got:
            raise ExportError(f"engine output missing {name!r}")
        if got[name].shape != want.shape:
            raise ExportError(
                f"{name}: shape {got[name].shape} != expected {want.shape}"
            )
        worst = max(worst, float(np.abs(got[name] - want).max()))
    return worst


def export(checkpoint_path, preset: str, out_path, fixture_seed: int | None = None):
    state = load_checkpoint(checkpoint_path)
    weights = convert(state, preset)
    write_stpw(weights, out_path)
    if fixture_seed is not None:
        return make_fixture(weights, preset, fixture_seed, str(out_path))
    return None
