"""Slow, obviously-correct reference implementations used only by tests."""
import functools
import itertools
import math
from fractions import Fraction

import numpy as np


def levenshtein(a, b) -> int:
    """Plain recursive edit distance with memoization (no DP table, no backtrace)."""
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def all_alignments(pred, truth):
    """Every alignment of two tiny sequences as (S, D, I, C) tuples.

    An alignment consumes truth and prediction left to right with moves
    match/sub (both), delete (truth only) and insert (prediction only).
    """
    out = set()

    def walk(i, j, s, d, ins, c):
        if i == len(truth) and j == len(pred):
            out.add((s, d, ins, c))
            return
        if i < len(truth) and j < len(pred):
            same = truth[i] == pred[j]
            walk(i + 1, j + 1, s + (not same), d, ins, c + same)
        if i < len(truth):
            walk(i + 1, j, s, d + 1, ins, c)
        if j < len(pred):
            walk(i, j + 1, s, d, ins + 1, c)

    walk(0, 0, 0, 0, 0, 0)
    return out


def minimal_alignments(pred, truth):
    every = all_alignments(pred, truth)
    best = min(s + d + i for s, d, i, _ in every)
    return {a for a in every if a[0] + a[1] + a[2] == best}


def blur_direct(px, q16):
    """2-D direct-sum Gaussian with exact rationals, edge replication, round half up.

    Uses the outer product of the taps over the 2-D neighbourhood instead
    of two 1-D passes.
    """
    h, w, ch = px.shape
    r = (len(q16) - 1) // 2
    taps = [Fraction(int(t), 65536) for t in q16]
    out = np.zeros_like(px)
    for y, x, c in itertools.product(range(h), range(w), range(ch)):
        acc = Fraction(0)
        for ky, kx in itertools.product(range(len(taps)), repeat=2):
            yy = min(max(y + ky - r, 0), h - 1)
            xx = min(max(x + kx - r, 0), w - 1)
            acc += taps[ky] * taps[kx] * int(px[yy, xx, c])
        out[y, x, c] = min(255, max(0, math.floor(acc + Fraction(1, 2))))
    return out


def blur_float(px, sigma):
    """Continuous-weight Gaussian in float64, for a closeness check."""
    h, w, ch = px.shape
    r = int(math.ceil(3 * sigma))
    k = np.exp(-np.arange(-r, r + 1) ** 2 / (2 * sigma * sigma))
    k /= k.sum()
    padded = np.pad(px.astype(np.float64), ((r, r), (r, r), (0, 0)), mode="edge")
    tmp = sum(k[i] * padded[:, i:i + w] for i in range(2 * r + 1))
    out = sum(k[i] * tmp[i:i + h] for i in range(2 * r + 1))
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def bilinear_sample(px, x, y, fill=None):
    """Float bilinear sample at one point; out-of-range taps use ``fill`` or clamp."""
    h, w, _ = px.shape
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    acc = np.zeros(px.shape[2])
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            xx, yy = x0 + dx, y0 + dy
            if fill is not None and not (0 <= xx < w and 0 <= yy < h):
                v = np.asarray(fill, dtype=np.float64)
            else:
                v = px[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)].astype(np.float64)
            acc += wx * wy * v
    return acc
