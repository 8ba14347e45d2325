"""Learned distance head over backbone feature stacks.

The distance between two images is a weighted sum of squared
differences between their channel-normalized feature embeddings,
averaged over space and summed over levels. Only the head (one
nonnegative weight per channel) is trained; backbone weights stay
frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backbone import BackboneConfig, FeatureStack, forward
from .errors import DivergenceError, InvalidArgumentError

EPS = 1e-10


@dataclass
class TripletSample:
    """A reference image, two distorted candidates, and the fraction of
    human raters who preferred the second candidate."""

    ref: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    h: float

    def __post_init__(self):
        if not (self.ref.shape == self.p0.shape == self.p1.shape):
            raise InvalidArgumentError("triplet images must share dimensions")
        if not 0.0 <= self.h <= 1.0:
            raise InvalidArgumentError(f"human score {self.h} outside [0, 1]")


@dataclass
class LinearHead:
    """Per-level, per-channel nonnegative combination weights."""

    weights: list[np.ndarray]

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float32) for w in self.weights]
        for w in self.weights:
            if w.ndim != 1:
                raise InvalidArgumentError("head weights must be one vector per level")
            if np.any(w < 0):
                raise InvalidArgumentError("head weights must be nonnegative")

    @property
    def levels(self) -> int:
        return len(self.weights)

    def scaled(self, alpha: float) -> "LinearHead":
        return LinearHead([w * alpha for w in self.weights])


def uniform_head(channels: list[int], value: float = 1.0) -> LinearHead:
    return LinearHead([np.full(c, value, dtype=np.float32) for c in channels])


def head_entries(head: LinearHead) -> dict[str, np.ndarray]:
    """Reserved weight-file entry names for a trained head."""
    return {f"head.level{i}": w for i, w in enumerate(head.weights)}


def head_from_store(store) -> LinearHead | None:
    """Collect head.level{i} entries from a weight store, if present."""
    ws = []
    while f"head.level{len(ws)}" in store:
        ws.append(store[f"head.level{len(ws)}"])
    return LinearHead(ws) if ws else None


def _normalize64(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    norm = np.sqrt((f * f).sum(axis=0, keepdims=True))
    return f / (norm + EPS)


def normalize_channels(f: np.ndarray) -> np.ndarray:
    """Scale each spatial location's channel vector to (almost) unit length."""
    return _normalize64(f).astype(np.float32)


def _check_compat(head: LinearHead, a: FeatureStack, b: FeatureStack) -> None:
    if not (len(a) == len(b) == head.levels):
        raise InvalidArgumentError(
            f"level mismatch: stacks have {len(a)}/{len(b)} levels, head has {head.levels}"
        )
    for i, (fa, fb, w) in enumerate(zip(a, b, head.weights)):
        if fa.shape != fb.shape:
            raise InvalidArgumentError(f"level {i} shapes differ: {fa.shape} vs {fb.shape}")
        if fa.shape[0] != w.shape[0]:
            raise InvalidArgumentError(
                f"level {i} has {fa.shape[0]} channels, head expects {w.shape[0]}"
            )


def channel_diffs(a: FeatureStack, b: FeatureStack) -> list[np.ndarray]:
    """Per-level, per-channel spatial means of squared normalized differences.

    The distance is linear in the head weights applied to these vectors,
    which is what makes head training cheap: features are extracted once
    and every gradient step works on the cached vectors.
    """
    out = []
    for fa, fb in zip(a, b):
        d = _normalize64(fa) - _normalize64(fb)
        out.append((d * d).mean(axis=(1, 2)))
    return out


def distance(head: LinearHead, a: FeatureStack, b: FeatureStack) -> float:
    """Weighted squared distance between two feature stacks."""
    _check_compat(head, a, b)
    total = 0.0
    for w, v in zip(head.weights, channel_diffs(a, b)):
        total += float(np.dot(w.astype(np.float64), v))
    return total


def preference(head: LinearHead, cfg: BackboneConfig, weights, sample: TripletSample):
    """Distances of both candidates to the reference and the preference ratio.

    Returns (s1, s2, s) with s = s1 / (s1 + s2 + eps); s near 0 means the
    first candidate is judged closer to the reference.
    """
    f_ref = forward(cfg, weights, sample.ref)
    s1 = distance(head, f_ref, forward(cfg, weights, sample.p0))
    s2 = distance(head, f_ref, forward(cfg, weights, sample.p1))
    return s1, s2, s1 / (s1 + s2 + EPS)


@dataclass
class TrainOpts:
    seed: int
    lr: float = 1e-2
    steps: int = 1000
    dropout: float = 0.01


def _flat_diff_vectors(cfg, weights, data):
    """Stack per-sample channel-difference vectors for both candidates."""
    v1, v2, hs = [], [], []
    for s in data:
        f_ref = forward(cfg, weights, s.ref)
        d1 = channel_diffs(f_ref, forward(cfg, weights, s.p0))
        d2 = channel_diffs(f_ref, forward(cfg, weights, s.p1))
        v1.append(np.concatenate(d1))
        v2.append(np.concatenate(d2))
        hs.append(s.h)
    return np.asarray(v1), np.asarray(v2), np.asarray(hs, dtype=np.float64)


def _split_levels(w: np.ndarray, channels: list[int]) -> list[np.ndarray]:
    out, i = [], 0
    for c in channels:
        out.append(w[i : i + c].astype(np.float32))
        i += c
    return out


def train_head(cfg: BackboneConfig, weights, data: list[TripletSample], opts: TrainOpts) -> LinearHead:
    """Fit head weights by full-batch gradient descent on MSE(s, h).

    The backbone is frozen; features are extracted once up front. Weights
    are projected back to >= 0 after every step. Deterministic given
    ``opts.seed``.
    """
    if not data:
        raise InvalidArgumentError("training data must be nonempty")
    channels = cfg.tap_channels()
    v1, v2, hs = _flat_diff_vectors(cfg, weights, data)
    rng = np.random.default_rng(opts.seed)
    w = np.ones(v1.shape[1], dtype=np.float64)
    n = len(data)
    keep = 1.0 - opts.dropout
    for step in range(opts.steps):
        if opts.dropout > 0.0:
            m1 = (rng.random(v1.shape) < keep) / keep
            m2 = (rng.random(v2.shape) < keep) / keep
            a1, a2 = v1 * m1, v2 * m2
        else:
            a1, a2 = v1, v2
        s1 = a1 @ w
        s2 = a2 @ w
        denom = s1 + s2 + EPS
        s = s1 / denom
        residual = s - hs
        loss = float(np.mean(residual**2))
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at step {step}")
        coef = 2.0 * residual / (denom * denom) / n
        grad = (coef * (s2 + EPS)) @ a1 - (coef * s1) @ a2
        w = np.maximum(w - opts.lr * grad, 0.0)
    return LinearHead(_split_levels(w, channels))


def preference_loss(cfg, weights, head: LinearHead, data: list[TripletSample]) -> float:
    """Evaluation-mode MSE(s, h) over a dataset (no dropout)."""
    if not data:
        raise InvalidArgumentError("data must be nonempty")
    err = 0.0
    for s in data:
        _, _, pred = preference(head, cfg, weights, s)
        err += (pred - s.h) ** 2
    return err / len(data)


def grad_check(cfg: BackboneConfig, weights, head: LinearHead, sample: TripletSample) -> float:
    """Worst-case relative gap between analytic and central-difference
    gradients of the per-sample loss with respect to the head weights."""
    f_ref = forward(cfg, weights, sample.ref)
    f0 = forward(cfg, weights, sample.p0)
    f1 = forward(cfg, weights, sample.p1)
    v1 = np.concatenate(channel_diffs(f_ref, f0))
    v2 = np.concatenate(channel_diffs(f_ref, f1))
    channels = [w.shape[0] for w in head.weights]
    w = np.concatenate([hw.astype(np.float64) for hw in head.weights])

    s1 = float(v1 @ w)
    s2 = float(v2 @ w)
    denom = s1 + s2 + EPS
    s = s1 / denom
    analytic = 2.0 * (s - sample.h) * (v1 * (s2 + EPS) - v2 * s1) / (denom * denom)

    step = 1e-3

    def loss_at(wvec: np.ndarray) -> float:
        # Probe head keeps float64 weights and may dip below zero by the
        # finite-difference step; bypass the constructor's validation.
        h = LinearHead.__new__(LinearHead)
        parts, i = [], 0
        for c in channels:
            parts.append(wvec[i : i + c])
            i += c
        h.weights = parts
        d1 = distance(h, f_ref, f0)
        d2 = distance(h, f_ref, f1)
        pred = d1 / (d1 + d2 + EPS)
        return (pred - sample.h) ** 2

    worst = 0.0
    for i in range(w.shape[0]):
        wp, wm = w.copy(), w.copy()
        wp[i] += step
        wm[i] -= step
        numeric = (loss_at(wp) - loss_at(wm)) / (2 * step)
        gap = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-8)
        worst = max(worst, gap)
    return worst
