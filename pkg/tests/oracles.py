"""Independent brute-force reference implementations.

Everything here is written as plain quadruple loops over output
positions with explicit index arithmetic, deliberately sharing no code
with the package so the two routes can check each other.
"""

import numpy as np


def _sample(x, c, i, j, mode, pv, ph):
    """Value of padded x at padded coordinates (i, j) for channel c."""
    h, w = x.shape[-2:]
    yi, xj = i - pv, j - ph
    if mode == "zero":
        if yi < 0 or yi >= h or xj < 0 or xj >= w:
            return 0.0
        return float(x[c, yi, xj])
    if mode == "reflection":
        if yi < 0:
            yi = -yi
        elif yi >= h:
            yi = 2 * h - 2 - yi
        if xj < 0:
            xj = -xj
        elif xj >= w:
            xj = 2 * w - 2 - xj
        return float(x[c, yi, xj])
    if mode == "circular":
        return float(x[c, yi % h, xj % w])
    raise ValueError(mode)


def conv2d_bruteforce(x, kernel, bias, stride, pad_mode="zero", pad_amount=0):
    """Direct-summation cross-correlation."""
    n_out, n_in, kh, kw = kernel.shape
    h, w = x.shape[-2:]
    pv = ph = pad_amount
    hp, wp = h + 2 * pv, w + 2 * ph
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.zeros((n_out, ho, wo), dtype=np.float64)
    for o in range(n_out):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for c in range(n_in):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += float(kernel[o, c, ky, kx]) * _sample(
                                x, c, oy * stride + ky, ox * stride + kx, pad_mode, pv, ph
                            )
                out[o, oy, ox] = acc + (float(bias[o]) if bias is not None else 0.0)
    return out


def maxpool_bruteforce(x, window, stride):
    c, h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.zeros((c, ho, wo), dtype=np.float64)
    for ci in range(c):
        for oy in range(ho):
            for ox in range(wo):
                best = -np.inf
                for ky in range(window):
                    for kx in range(window):
                        best = max(best, float(x[ci, oy * stride + ky, ox * stride + kx]))
                out[ci, oy, ox] = best
    return out


def avgpool_bruteforce(x, window, stride):
    c, h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.zeros((c, ho, wo), dtype=np.float64)
    for ci in range(c):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for ky in range(window):
                    for kx in range(window):
                        acc += float(x[ci, oy * stride + ky, ox * stride + kx])
                out[ci, oy, ox] = acc / (window * window)
    return out


def blurpool_bruteforce(x, coefficients, stride, pad_mode="reflection"):
    """Depthwise blur with floor(size/2) padding, then phase-0 subsampling."""
    size = coefficients.shape[0]
    p = size // 2
    c, h, w = x.shape
    hb = h + 2 * p - size + 1
    wb = w + 2 * p - size + 1
    blurred = np.zeros((c, hb, wb), dtype=np.float64)
    for ci in range(c):
        for oy in range(hb):
            for ox in range(wb):
                acc = 0.0
                for ky in range(size):
                    for kx in range(size):
                        acc += float(coefficients[ky, kx]) * _sample(
                            x, ci, oy + ky, ox + kx, pad_mode, p, p
                        )
                blurred[ci, oy, ox] = acc
    return blurred[:, ::stride, ::stride]


def average_precision_bruteforce(distances, positives):
    """AP by literal rank walking: stable descending-distance order."""
    order = sorted(range(len(distances)), key=lambda i: (-distances[i], i))
    hits = 0
    total = 0.0
    n_pos = sum(positives)
    for rank, idx in enumerate(order, start=1):
        if positives[idx]:
            hits += 1
            total += hits / rank
    return total / n_pos
