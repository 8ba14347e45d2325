"""Command-line interface.

Exit codes: 0 on success, 1 for usage errors, 2 for data or file-format
errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import backbone as bb
from . import harness, images, manifest, metric
from .errors import StsimError
from .weights import WeightStore, load_weights, save_weights


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="stsim", description="Shift-tolerant perceptual image similarity metric")
    sub = p.add_subparsers(dest="command", metavar="command")

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        return sp

    sp = add("compare", "print the distance between two images")
    sp.add_argument("ref")
    sp.add_argument("img")
    _weight_opts(sp)

    sp = add("eval", "score a triplet manifest: 2AFC and rank-flip rates")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--shifts", default="1,2,3", help="comma-separated pixel shifts")
    sp.add_argument("--format", choices=("table", "csv"), default="table")
    _weight_opts(sp)

    sp = add("train-head", "fit the linear distance head on a triplet manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--weights", help="backbone weight file (default: seeded random init)")
    sp.add_argument("--backbone", default="alex-st",
                    help="preset name or path to a backbone config file")
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--lr", type=float, default=1e-2)
    sp.add_argument("--dropout", type=float, default=0.01)

    sp = add("jnd", "area under precision/recall for a same/different pair manifest")
    sp.add_argument("--manifest", required=True)
    _weight_opts(sp)

    sp = add("synth", "materialize a synthetic triplet dataset")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=int, default=64)

    sp = add("diffmaps", "export per-level feature difference maps for a shifted image")
    sp.add_argument("img")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--out", required=True)
    _weight_opts(sp)

    sp = add("describe", "print a backbone's layer table")
    sp.add_argument("--backbone", default="alex-st",
                    help="preset name or path to a backbone config file")

    sp = add("forward", "run a backbone forward pass on a tensor file")
    sp.add_argument("--input", required=True, help="STPW file with one input tensor")
    sp.add_argument("--out", required=True, help="STPW file for the per-level outputs")
    _weight_opts(sp)

    return p


def _weight_opts(sp):
    sp.add_argument("--backbone", default="alex-st",
                    help="preset name or path to a backbone config file")
    sp.add_argument("--weights", help="STPW weight file")
    sp.add_argument("--init-seed", type=int, default=0,
                    help="seed for random backbone weights when no file is given")


def _backbone(name_or_path: str):
    if name_or_path in bb.PRESET_NAMES:
        return bb.preset(name_or_path)
    if os.path.isfile(name_or_path):
        from .config import load_config

        return load_config(name_or_path)
    raise _UsageError(
        f"unknown backbone {name_or_path!r}: expected one of "
        f"{', '.join(bb.PRESET_NAMES)} or a config file path"
    )


def _load_setup(args):
    cfg = _backbone(args.backbone)
    if args.weights:
        store = load_weights(args.weights)
    else:
        store = bb.random_weights(cfg, args.init_seed)
    head = metric.head_from_store(store)
    if head is None:
        head = metric.uniform_head(cfg.tap_channels())
    return cfg, store, head


def _load_triplets(path):
    rows = manifest.load_triplet_manifest(path)
    out = []
    for r in rows:
        out.append((r.category, metric.TripletSample(
            images.decode_image(r.ref_path),
            images.decode_image(r.p0_path),
            images.decode_image(r.p1_path),
            r.h,
        )))
    return out


def _print_report(report: harness.EvalReport, shifts, fmt: str):
    cols = ["2AFC"] + [f"r_rf@{k}" for k in shifts]
    rows = []
    for cat in sorted(report.per_category):
        scores = report.per_category[cat]
        rows.append([cat, scores.two_afc] + [scores.rank_flip[k] for k in shifts])
    rows.append(["overall", report.two_afc] + [report.rank_flip[k] for k in shifts])
    if fmt == "csv":
        print(",".join(["category"] + cols))
        for row in rows:
            print(",".join([row[0]] + [f"{v:.6g}" for v in row[1:]]))
    else:
        width = max(len(r[0]) for r in rows) + 2
        print(f"{'category':<{width}}" + "".join(f"{c:>10}" for c in cols))
        for row in rows:
            print(f"{row[0]:<{width}}" + "".join(f"{v:>10.6g}" for v in row[1:]))


def _cmd_compare(args) -> int:
    cfg, store, head = _load_setup(args)
    a = images.decode_image(args.ref)
    b = images.decode_image(args.img)
    d = metric.distance(head, bb.forward(cfg, store, a), bb.forward(cfg, store, b))
    print(f"{d:.6g}")
    return 0


def _cmd_eval(args) -> int:
    cfg, store, head = _load_setup(args)
    shifts = tuple(int(s) for s in args.shifts.split(",") if s.strip())
    samples = _load_triplets(args.manifest)
    report = harness.evaluate(cfg, store, head, samples, shifts=shifts)
    _print_report(report, shifts, args.format)
    return 0


def _cmd_train_head(args) -> int:
    cfg = _backbone(args.backbone)
    store = load_weights(args.weights) if args.weights else bb.random_weights(cfg, args.seed)
    samples = _load_triplets(args.manifest)
    cropped = [harness.shift_crop(s, 0).original for _, s in samples]
    opts = metric.TrainOpts(seed=args.seed, lr=args.lr, steps=args.steps, dropout=args.dropout)
    head = metric.train_head(cfg, store, cropped, opts)
    out = WeightStore()
    out.update(store)
    for name, value in metric.head_entries(head).items():
        out.set(name, value)
    save_weights(out, args.out)
    print(f"trained head on {len(cropped)} samples -> {args.out}")
    return 0


def _cmd_jnd(args) -> int:
    cfg, store, head = _load_setup(args)
    rows = manifest.load_pair_manifest(args.manifest)
    pairs = []
    for r in rows:
        fa = bb.forward(cfg, store, images.decode_image(r.img_a))
        fb = bb.forward(cfg, store, images.decode_image(r.img_b))
        pairs.append((metric.distance(head, fa, fb), r.same))
    print(f"{harness.jnd_map(pairs):.6g}")
    return 0


def _cmd_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    data = harness.synth_dataset(args.seed, args.n, args.size)
    rows = []
    for i, (category, s) in enumerate(data):
        names = {}
        for role, img in (("ref", s.ref), ("p0", s.p0), ("p1", s.p1)):
            fname = f"{role}_{i:04d}.ppm"
            images.encode_image(img, os.path.join(args.out, fname))
            names[role] = fname
        rows.append(manifest.TripletRow(
            f"s{i:04d}", category, names["ref"], names["p0"], names["p1"], s.h,
        ))
    path = os.path.join(args.out, "manifest.csv")
    manifest.save_triplet_manifest(rows, path)
    print(f"wrote {len(rows)} triplets to {args.out}")
    return 0


def _cmd_diffmaps(args) -> int:
    cfg, store, _ = _load_setup(args)
    x = images.decode_image(args.img)
    maps = harness.difference_maps(cfg, store, x, args.k, normalize=True)
    os.makedirs(args.out, exist_ok=True)
    for i, m in enumerate(maps):
        images.write_pgm(m, os.path.join(args.out, f"level{i}.pgm"))
    print(f"wrote {len(maps)} difference maps to {args.out}")
    return 0


def _cmd_describe(args) -> int:
    print(bb.describe(_backbone(args.backbone)))
    return 0


def _cmd_forward(args) -> int:
    cfg, store, _ = _load_setup(args)
    inputs = load_weights(args.input)
    if "input" in inputs:
        x = inputs["input"]
    elif len(inputs) == 1:
        x = inputs[inputs.names()[0]]
    else:
        raise StsimError("input file must hold a single tensor or one named 'input'")
    stack = bb.forward(cfg, store, x)
    out = WeightStore()
    for i, level in enumerate(stack):
        out.set(f"level{i}", level)
    save_weights(out, args.out)
    print(f"wrote {len(stack)} levels to {args.out}")
    return 0


_COMMANDS = {
    "compare": _cmd_compare,
    "eval": _cmd_eval,
    "train-head": _cmd_train_head,
    "jnd": _cmd_jnd,
    "synth": _cmd_synth,
    "diffmaps": _cmd_diffmaps,
    "describe": _cmd_describe,
    "forward": _cmd_forward,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (StsimError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
