"""Pure numpy / Python implementations of the hot kernels.

These are the reference path and must stay bit-for-bit identical to
``_kernels.pyx``. All image kernels work in fixed point:

* convolution weights are Q16 integers summing to ``1 << 16``; a separable
  pass pair therefore scales by ``1 << 32`` and is rounded half-up once;
* remap coordinates are Q8 (1/256 px), bilinear weights are Q16.
"""
import numpy as np

BACKEND = "python"

_HALF32 = np.int64(1 << 31)


def edit_ops(pred, truth):
    """Unit-cost alignment of two int sequences, returns (S, D, I, C).

    D counts truth tokens with no counterpart in ``pred``; I counts ``pred``
    tokens absent from ``truth``. Backtrace prefers diagonal, then deletion,
    then insertion.
    """
    p = [int(v) for v in pred]
    t = [int(v) for v in truth]
    n, m = len(t), len(p)
    # rows index truth, columns index prediction
    table = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = table[i - 1]
        row = [i] * (m + 1)
        ti = t[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (ti != p[j - 1])
            alt = prev[j] + 1
            if alt < best:
                best = alt
            alt = row[j - 1] + 1
            if alt < best:
                best = alt
            row[j] = best
        table.append(row)

    s = d = ins = c = 0
    i, j = n, m
    while i > 0 or j > 0:
        cur = table[i][j]
        if i > 0 and j > 0:
            same = t[i - 1] == p[j - 1]
            if cur == table[i - 1][j - 1] + (not same):
                if same:
                    c += 1
                else:
                    s += 1
                i -= 1
                j -= 1
                continue
        if i > 0 and cur == table[i - 1][j] + 1:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return s, d, ins, c


def convolve_separable(src, weights):
    """Convolve an int32 (H, W, C) array with ``weights`` along W then H.

    Borders replicate the edge value. Returns int64, rounded half-up after
    removing the combined Q32 scale.
    """
    src = np.asarray(src, dtype=np.int64)
    w = np.asarray(weights, dtype=np.int64)
    radius = (len(w) - 1) // 2
    h, wd = src.shape[:2]

    padded = np.pad(src, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    tmp = np.zeros_like(src)
    for k in range(len(w)):
        tmp += w[k] * padded[:, k:k + wd]

    padded = np.pad(tmp, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(src)
    for k in range(len(w)):
        out += w[k] * padded[k:k + h]
    return (out + _HALF32) >> 32


def remap_bilinear(src, map_x, map_y, fill=None):
    """Sample ``src`` (uint8 H, W, C) at Q8 coordinates.

    With ``fill`` None, coordinates are clamped to the image (edge
    replication). Otherwise any tap falling outside takes ``fill``.
    """
    src = np.asarray(src, dtype=np.uint8)
    h, w, ch = src.shape
    mx = np.asarray(map_x, dtype=np.int64)
    my = np.asarray(map_y, dtype=np.int64)
    if fill is None:
        mx = np.clip(mx, 0, (w - 1) << 8)
        my = np.clip(my, 0, (h - 1) << 8)
    x0 = mx >> 8
    y0 = my >> 8
    fx = mx & 255
    fy = my & 255
    x1 = x0 + 1
    y1 = y0 + 1

    src64 = src.astype(np.int64)
    if fill is None:
        x1 = np.minimum(x1, w - 1)
        y1 = np.minimum(y1, h - 1)
        fill_v = None
    else:
        fill_v = np.asarray(fill, dtype=np.int64).reshape(1, 1, ch)

    def tap(yy, xx):
        if fill_v is None:
            return src64[yy, xx]
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals = src64[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(inside[..., None], vals, fill_v)

    w00 = ((256 - fx) * (256 - fy))[..., None]
    w10 = (fx * (256 - fy))[..., None]
    w01 = ((256 - fx) * fy)[..., None]
    w11 = (fx * fy)[..., None]
    acc = tap(y0, x0) * w00 + tap(y0, x1) * w10 + tap(y1, x0) * w01 + tap(y1, x1) * w11
    return ((acc + 32768) >> 16).astype(np.uint8)
