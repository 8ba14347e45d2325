"""Evaluation machinery: shifted-sample construction, rank-flip rate,
2AFC scoring, JND average precision, difference-map probes, and a
synthetic triplet generator for fast experiments.

Shifted samples crop the distorted images ``k`` columns to the right
while the reference keeps the left-aligned crop, so every image ends up
``w - 3`` wide regardless of the shift and score changes can only come
from the misalignment itself.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backbone import BackboneConfig, forward
from .errors import InvalidArgumentError
from .metric import LinearHead, TripletSample, distance

CATEGORIES = ("gaussian-noise", "box-blur", "intensity-scale", "block-shuffle")

MAX_SHIFT = 3
CROP_MARGIN = 3  # every evaluated image is (w - 3) x h


@dataclass(frozen=True)
class ShiftedSample:
    original: TripletSample
    shifted: TripletSample
    k: int


def shift_crop(sample: TripletSample, k: int) -> ShiftedSample:
    """Build the aligned and k-shifted crops of a triplet."""
    if not 0 <= k <= MAX_SHIFT:
        raise InvalidArgumentError(f"shift {k} outside [0, {MAX_SHIFT}]")
    w = sample.ref.shape[-1]
    if w < k + CROP_MARGIN + 1:
        raise InvalidArgumentError(f"width {w} too small for shift {k}")
    out = w - CROP_MARGIN

    def left(img):
        return np.ascontiguousarray(img[..., :, 0:out])

    def moved(img):
        return np.ascontiguousarray(img[..., :, k : k + out])

    original = TripletSample(left(sample.ref), left(sample.p0), left(sample.p1), sample.h)
    shifted = TripletSample(left(sample.ref), moved(sample.p0), moved(sample.p1), sample.h)
    return ShiftedSample(original=original, shifted=shifted, k=k)


def rank_flip_rate(scores) -> float:
    """Percent of samples whose candidate ordering reverses after the shift.

    Each element is (s1, s2, shifted_s1, shifted_s2); ties compare as
    "not less-than" on both sides.
    """
    scores = list(scores)
    if not scores:
        raise InvalidArgumentError("rank_flip_rate needs at least one sample")
    flips = sum(1 for s1, s2, t1, t2 in scores if (s1 < s2) != (t1 < t2))
    return 100.0 * flips / len(scores)


def two_afc(scores) -> float:
    """Mean agreement with human preferences, in percent.

    Each element is (s1, s2, h) with distances s1, s2 of the two
    candidates and h the fraction of raters preferring the second.
    Exact ties earn half credit.
    """
    scores = list(scores)
    if not scores:
        raise InvalidArgumentError("two_afc needs at least one sample")
    total = 0.0
    for s1, s2, h in scores:
        if not 0.0 <= h <= 1.0:
            raise InvalidArgumentError(f"human score {h} outside [0, 1]")
        if s2 < s1:
            total += h
        elif s1 < s2:
            total += 1.0 - h
        else:
            total += 0.5
    return 100.0 * total / len(scores)


def aggregate_by_category(per_sample) -> tuple[float, dict[str, float]]:
    """Mean per category, then the unweighted mean of the category means."""
    groups: dict[str, list[float]] = {}
    for category, value in per_sample:
        if not category:
            raise InvalidArgumentError("sample with empty category label")
        groups.setdefault(category, []).append(float(value))
    if not groups:
        raise InvalidArgumentError("nothing to aggregate")
    per_category = {c: float(np.mean(v)) for c, v in groups.items()}
    return float(np.mean(list(per_category.values()))), per_category


def jnd_map(pairs) -> float:
    """Area under the precision/recall curve when ranking pairs by distance.

    Pairs humans judged *different* are the positives; ranking is by
    descending distance with a stable order on ties.
    """
    pairs = list(pairs)
    labels = np.array([not same for _, same in pairs], dtype=bool)
    if labels.all() or not labels.any():
        raise InvalidArgumentError("need both same and different pairs")
    distances = np.array([d for d, _ in pairs], dtype=np.float64)
    order = np.argsort(-distances, kind="stable")
    ranked = labels[order]
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    precisions = hits[ranked] / ranks[ranked]
    return float(precisions.sum() / labels.sum())


# ---------------------------------------------------------------------------
# Synthetic data


def smoothed_noise(rng: np.random.Generator, channels: int, h: int, w: int,
                   passes: int = 6) -> np.ndarray:
    """Noise with short-range spatial correlations, scaled into [-0.9, 0.9]."""
    x = rng.normal(0.0, 1.0, size=(channels, h, w))
    for _ in range(passes):
        for axis in (-2, -1):
            x = (np.roll(x, 1, axis) + 2.0 * x + np.roll(x, -1, axis)) / 4.0
    peak = np.max(np.abs(x)) + 1e-12
    return (0.9 * x / peak).astype(np.float32)


def _box3(x: np.ndarray) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    for axis in (-2, -1):
        out = (np.roll(out, 1, axis) + out + np.roll(out, -1, axis)) / 3.0
    return out.astype(np.float32)


def _iterated_blur(base: np.ndarray, amount: float) -> np.ndarray:
    # amount >= 1: whole box-blur rounds plus a fractional mix toward the
    # next round, so strength varies continuously but every candidate has
    # been fully low-passed at least once.
    out = base
    for _ in range(int(amount)):
        out = _box3(out)
    frac = amount - int(amount)
    if frac <= 0:
        return out.astype(np.float32)
    return ((1 - frac) * out + frac * _box3(out)).astype(np.float32)


def _distort(rng: np.random.Generator, base: np.ndarray, category: str,
             strength: float) -> np.ndarray:
    """Apply one distortion at a normalized strength in (0, 1]."""
    t = strength
    if category == "gaussian-noise":
        return np.clip(base + rng.normal(0.0, 0.08 + 0.4 * t, base.shape), -1, 1).astype(np.float32)
    if category == "box-blur":
        return _iterated_blur(base, 1.0 + 2.2 * t)
    if category == "intensity-scale":
        return np.clip(base * (1.0 - 0.45 * t), -1, 1).astype(np.float32)
    if category == "block-shuffle":
        out = base.copy()
        h, w = base.shape[-2:]
        bs = 10
        cells = [(i, j) for i in range(0, h - bs + 1, bs) for j in range(0, w - bs + 1, bs)]
        swaps = max(1, int(round(t * len(cells) / 2)))
        for _ in range(swaps):
            (i1, j1), (i2, j2) = (cells[q] for q in rng.choice(len(cells), 2, replace=False))
            a = out[:, i1 : i1 + bs, j1 : j1 + bs].copy()
            out[:, i1 : i1 + bs, j1 : j1 + bs] = out[:, i2 : i2 + bs, j2 : j2 + bs]
            out[:, i2 : i2 + bs, j2 : j2 + bs] = a
        return out
    raise InvalidArgumentError(f"unknown distortion category {category!r}")


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a, np.float64) - np.asarray(b, np.float64)
    return float(np.sqrt(np.mean(d * d)))


# Fraction of near-margin strength pairs per category. Noise and intensity
# orderings degrade gracefully with misalignment, so they carry the
# hard-but-decidable cases; blur and shuffle pairs stay clearly separated
# because misalignment penalizes their sharper candidate asymmetrically.
_BORDERLINE_FRACTION = {
    "gaussian-noise": 0.6,
    "intensity-scale": 0.4,
    "box-blur": 0.0,
    "block-shuffle": 0.0,
}


def synth_dataset(seed: int, n: int, size: int) -> list[tuple[str, TripletSample]]:
    """Generate labeled triplets: smoothed-noise references, two same-category
    distortions at different strengths, and a simulated human score favoring
    the lower-RMSE candidate."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if size < 16:
        raise InvalidArgumentError("size must be >= 16")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        category = CATEGORIES[i % len(CATEGORIES)]
        base = smoothed_noise(rng, 3, size, size)
        t0 = rng.uniform(0.15, 0.7)
        if rng.random() < _BORDERLINE_FRACTION[category]:
            ratio = rng.uniform(1.12, 1.24)
        else:
            ratio = rng.uniform(1.4, 2.0)
        t1 = t0 * ratio if rng.random() < 0.5 else t0 / ratio
        t1 = min(1.0, max(0.05, t1))
        p0 = _distort(rng, base, category, t0)
        p1 = _distort(rng, base, category, t1)
        prefers_p1 = rmse(p1, base) < rmse(p0, base)
        strong = bool(rng.random() < 0.5)
        if prefers_p1:
            h = 1.0 if strong else 0.8
        else:
            h = 0.0 if strong else 0.2
        out.append((category, TripletSample(base, p0, p1, h)))
    return out


# ---------------------------------------------------------------------------
# Metric evaluation


@dataclass
class CategoryScores:
    two_afc: float
    rank_flip: dict[int, float]


@dataclass
class EvalReport:
    two_afc: float
    rank_flip: dict[int, float]
    per_category: dict[str, CategoryScores]
    jnd: float | None = None


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    return max(1, int(os.environ.get("STIM_THREADS", "1")))


def _score_sample(cfg, weights, head, sample: TripletSample, shifts):
    """Distances for the aligned crop and for every requested shift."""
    base = shift_crop(sample, 0).original
    f_ref = forward(cfg, weights, base.ref)

    def dist(img):
        return distance(head, f_ref, forward(cfg, weights, img))

    s1, s2 = dist(base.p0), dist(base.p1)
    shifted = {}
    for k in shifts:
        moved = shift_crop(sample, k).shifted
        shifted[k] = (dist(moved.p0), dist(moved.p1))
    return s1, s2, shifted


def evaluate(cfg: BackboneConfig, weights, head: LinearHead, labeled_samples,
             shifts=(1, 2, 3), threads: int | None = None) -> EvalReport:
    """Score a labeled triplet dataset: per-category and overall 2AFC plus
    rank-flip rates at each shift.

    Per-sample work may run on several threads (``STIM_THREADS``); the
    reduction happens in sample order either way, so reports are stable.
    """
    labeled_samples = list(labeled_samples)
    if not labeled_samples:
        raise InvalidArgumentError("no samples to evaluate")
    shifts = tuple(shifts)

    def work(item):
        _, sample = item
        return _score_sample(cfg, weights, head, sample, shifts)

    n_threads = _thread_count(threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            scored = list(pool.map(work, labeled_samples))
    else:
        scored = [work(item) for item in labeled_samples]

    afc_overall, afc_cat = aggregate_by_category(
        (cat, two_afc([(s1, s2, s.h)]))
        for (cat, s), (s1, s2, _) in zip(labeled_samples, scored)
    )
    flip_overall: dict[int, float] = {}
    flip_cat: dict[int, dict[str, float]] = {}
    for k in shifts:
        overall, per_cat = aggregate_by_category(
            (cat, rank_flip_rate([(s1, s2, *shifted[k])]))
            for (cat, _), (s1, s2, shifted) in zip(labeled_samples, scored)
        )
        flip_overall[k] = overall
        flip_cat[k] = per_cat

    per_category = {
        cat: CategoryScores(
            two_afc=afc_cat[cat],
            rank_flip={k: flip_cat[k][cat] for k in shifts},
        )
        for cat in afc_cat
    }
    return EvalReport(two_afc=afc_overall, rank_flip=flip_overall, per_category=per_category)


def difference_maps(cfg: BackboneConfig, weights, x: np.ndarray, k: int,
                    normalize: bool = False) -> list[np.ndarray]:
    """Per-level mean absolute feature difference between the aligned crop
    and the k-shifted crop of one image.

    Raw magnitudes by default; ``normalize`` rescales each map into [0, 1]
    for export as a grayscale image.
    """
    if k < 0:
        raise InvalidArgumentError("shift must be >= 0")
    w = x.shape[-1]
    if w < k + CROP_MARGIN + 1:
        raise InvalidArgumentError(f"width {w} too small for shift {k}")
    out = w - CROP_MARGIN
    a = np.ascontiguousarray(x[..., :, 0:out])
    b = np.ascontiguousarray(x[..., :, k : k + out])
    fa = forward(cfg, weights, a)
    fb = forward(cfg, weights, b)
    maps = []
    for la, lb in zip(fa, fb):
        m = np.abs(la.astype(np.float64) - lb.astype(np.float64)).mean(axis=0)
        if normalize:
            peak = m.max()
            m = m / peak if peak > 0 else m
        maps.append(m.astype(np.float32))
    return maps
