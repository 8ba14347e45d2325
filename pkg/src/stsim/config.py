"""JSON serialization for backbone configurations.

Lets the CLI run custom layer graphs: anywhere a preset name is
accepted, a path to a config file works too.
"""

from __future__ import annotations

import json
from dataclasses import asdict

from .backbone import BackboneConfig, ConvDef, LayerSpec
from .errors import FormatError

_CONV_KINDS = ("conv", "aa_conv", "fconv")


def config_to_json(cfg: BackboneConfig) -> str:
    layers = []
    for layer in cfg.layers:
        entry = {"name": layer.name, "kind": layer.kind}
        if layer.tap:
            entry["tap"] = True
        if layer.conv is not None:
            entry["conv"] = asdict(layer.conv)
        if layer.kind in ("maxpool", "max_blurpool"):
            entry["window"] = layer.window
        if layer.kind in ("maxpool", "max_blurpool", "avg_blurpool"):
            entry["stride"] = layer.stride
        if layer.kind in ("aa_conv", "max_blurpool", "avg_blurpool", "skip_block"):
            entry["blur_size"] = layer.blur_size
        if layer.kind == "aa_conv":
            entry["blur_stride"] = layer.blur_stride
            entry["placement"] = layer.placement
        if layer.kind == "skip_block":
            entry["main"] = [asdict(d) for d in layer.main]
            entry["skip"] = layer.skip
        layers.append(entry)
    doc = {
        "name": cfg.name,
        "input_channels": cfg.input_channels,
        "min_input": cfg.min_input,
        "layers": layers,
    }
    return json.dumps(doc, indent=2) + "\n"


def _layer_from_dict(entry: dict) -> LayerSpec:
    try:
        kind = entry["kind"]
        conv = ConvDef(**entry["conv"]) if "conv" in entry else None
        main = tuple(ConvDef(**d) for d in entry.get("main", ()))
        return LayerSpec(
            name=entry["name"],
            kind=kind,
            tap=bool(entry.get("tap", False)),
            conv=conv,
            window=int(entry.get("window", 0)),
            stride=int(entry.get("stride", 1)),
            blur_size=int(entry.get("blur_size", 3)),
            blur_stride=int(entry.get("blur_stride", 1)),
            placement=entry.get("placement", "original"),
            main=main,
            skip=entry.get("skip", "identity"),
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"bad layer entry {entry.get('name', '?')!r}: {e}") from e


def config_from_json(text: str) -> BackboneConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"config is not valid JSON: {e}") from e
    for field in ("name", "layers"):
        if field not in doc:
            raise FormatError(f"config missing field {field!r}")
    layers = tuple(_layer_from_dict(entry) for entry in doc["layers"])
    return BackboneConfig(
        name=doc["name"],
        layers=layers,
        input_channels=int(doc.get("input_channels", 3)),
        min_input=int(doc.get("min_input", 16)),
    )


def save_config(cfg: BackboneConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(config_to_json(cfg))


def load_config(path) -> BackboneConfig:
    with open(path, "r", encoding="utf-8") as f:
        return config_from_json(f.read())
