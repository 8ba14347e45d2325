"""CSV dataset manifests.

Triplet manifests list (sampleId, category, refPath, p0Path, p1Path, h);
pair manifests for just-noticeable-difference data list
(pairId, imgAPath, imgBPath, sameLabel). Files are UTF-8 CSV with a
header row; image paths are resolved relative to the manifest's
directory. Errors report the offending row number.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from .errors import FormatError

TRIPLET_FIELDS = ["sampleId", "category", "refPath", "p0Path", "p1Path", "h"]
PAIR_FIELDS = ["pairId", "imgAPath", "imgBPath", "sameLabel"]


@dataclass(frozen=True)
class TripletRow:
    sample_id: str
    category: str
    ref_path: str
    p0_path: str
    p1_path: str
    h: float


@dataclass(frozen=True)
class PairRow:
    pair_id: str
    img_a: str
    img_b: str
    same: bool


def _rows(path, fields):
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty manifest") from None
        if [c.strip() for c in header] != fields:
            raise FormatError(
                f"{path}: header {header} does not match {fields}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(fields):
                raise FormatError(
                    f"{path}: row {lineno}: expected {len(fields)} columns, got {len(row)}"
                )
            yield lineno, row


def _resolve(base_dir: str, rel: str, lineno: int, path) -> str:
    full = rel if os.path.isabs(rel) else os.path.join(base_dir, rel)
    if not os.path.exists(full):
        raise FormatError(f"{path}: row {lineno}: image path does not resolve: {rel}")
    return full


def load_triplet_manifest(path) -> list[TripletRow]:
    base = os.path.dirname(os.path.abspath(str(path)))
    out, seen = [], set()
    for lineno, row in _rows(path, TRIPLET_FIELDS):
        sample_id, category, ref, p0, p1, h_text = (c.strip() for c in row)
        if sample_id in seen:
            raise FormatError(f"{path}: row {lineno}: duplicate sample id {sample_id!r}")
        seen.add(sample_id)
        try:
            h = float(h_text)
        except ValueError:
            raise FormatError(f"{path}: row {lineno}: h is not a number: {h_text!r}") from None
        if not 0.0 <= h <= 1.0:
            raise FormatError(f"{path}: row {lineno}: h={h} outside [0, 1]")
        out.append(TripletRow(
            sample_id, category,
            _resolve(base, ref, lineno, path),
            _resolve(base, p0, lineno, path),
            _resolve(base, p1, lineno, path),
            h,
        ))
    if not out:
        raise FormatError(f"{path}: manifest contains no samples")
    return out


_TRUE = {"1", "true", "yes", "same"}
_FALSE = {"0", "false", "no", "different"}


def load_pair_manifest(path) -> list[PairRow]:
    base = os.path.dirname(os.path.abspath(str(path)))
    out, seen = [], set()
    for lineno, row in _rows(path, PAIR_FIELDS):
        pair_id, a, b, label = (c.strip() for c in row)
        if pair_id in seen:
            raise FormatError(f"{path}: row {lineno}: duplicate pair id {pair_id!r}")
        seen.add(pair_id)
        low = label.lower()
        if low in _TRUE:
            same = True
        elif low in _FALSE:
            same = False
        else:
            raise FormatError(f"{path}: row {lineno}: bad sameLabel {label!r}")
        out.append(PairRow(
            pair_id,
            _resolve(base, a, lineno, path),
            _resolve(base, b, lineno, path),
            same,
        ))
    if not out:
        raise FormatError(f"{path}: manifest contains no pairs")
    return out


def save_triplet_manifest(rows, path) -> None:
    """Write triplet rows; paths are stored as given (callers pass relative ones)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRIPLET_FIELDS)
        for r in rows:
            writer.writerow([r.sample_id, r.category, r.ref_path, r.p0_path, r.p1_path, f"{r.h:g}"])


def save_pair_manifest(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PAIR_FIELDS)
        for r in rows:
            writer.writerow([r.pair_id, r.img_a, r.img_b, "1" if r.same else "0"])
