# Compiled twins of the functions in _kernels_py.py; outputs must match
# bit for bit. Right shifts of negative int64 rely on arithmetic shift
# (gcc and clang both guarantee it).
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint8_t

cnp.import_array()

BACKEND = "cython"


def edit_ops(pred, truth):
    cdef const int64_t[::1] p = np.ascontiguousarray(pred, dtype=np.int64)
    cdef const int64_t[::1] t = np.ascontiguousarray(truth, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0], m = p.shape[0]
    cdef Py_ssize_t stride = m + 1
    cdef int32_t[::1] table = np.empty((n + 1) * stride, dtype=np.int32)
    cdef Py_ssize_t i, j
    cdef int32_t best, alt, cur
    cdef int64_t ti
    cdef bint same

    for j in range(m + 1):
        table[j] = <int32_t>j
    for i in range(1, n + 1):
        table[i * stride] = <int32_t>i
        ti = t[i - 1]
        for j in range(1, m + 1):
            best = table[(i - 1) * stride + j - 1] + (ti != p[j - 1])
            alt = table[(i - 1) * stride + j] + 1
            if alt < best:
                best = alt
            alt = table[i * stride + j - 1] + 1
            if alt < best:
                best = alt
            table[i * stride + j] = best

    cdef long s = 0, d = 0, ins = 0, c = 0
    i = n
    j = m
    while i > 0 or j > 0:
        cur = table[i * stride + j]
        if i > 0 and j > 0:
            same = t[i - 1] == p[j - 1]
            if cur == table[(i - 1) * stride + j - 1] + (not same):
                if same:
                    c += 1
                else:
                    s += 1
                i -= 1
                j -= 1
                continue
        if i > 0 and cur == table[(i - 1) * stride + j] + 1:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return int(s), int(d), int(ins), int(c)


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t n) noexcept nogil:
    if v < 0:
        return 0
    if v >= n:
        return n - 1
    return v


def convolve_separable(src, weights):
    cdef const int32_t[:, :, ::1] a = np.ascontiguousarray(src, dtype=np.int32)
    cdef const int64_t[::1] w = np.ascontiguousarray(weights, dtype=np.int64)
    cdef Py_ssize_t h = a.shape[0], wd = a.shape[1], ch = a.shape[2]
    cdef Py_ssize_t k_len = w.shape[0], radius = (k_len - 1) // 2
    cdef Py_ssize_t row_len = wd * ch
    cdef int64_t[:, ::1] tmp = np.zeros((h, row_len), dtype=np.int64)
    cdef int64_t[::1] padded = np.empty((wd + 2 * radius) * ch, dtype=np.int64)
    out_arr = np.zeros((h, wd, ch), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_arr.reshape(h, row_len)
    cdef Py_ssize_t y, x, c, k, i, src_x
    cdef int64_t wk
    cdef int64_t *prow
    cdef int64_t *trow
    cdef int64_t *orow
    cdef int64_t *qrow
    cdef bint sym = k_len % 2 == 1
    for k in range(radius):
        if w[k] != w[k_len - 1 - k]:
            sym = False

    with nogil:
        for y in range(h):
            for x in range(wd + 2 * radius):
                src_x = x - radius
                if src_x < 0:
                    src_x = 0
                elif src_x >= wd:
                    src_x = wd - 1
                for c in range(ch):
                    padded[x * ch + c] = a[y, src_x, c]
            trow = &tmp[y, 0]
            if sym:
                # paired taps share a weight: one multiply per pair
                for k in range(radius):
                    wk = w[k]
                    prow = &padded[k * ch]
                    qrow = &padded[(k_len - 1 - k) * ch]
                    for i in range(row_len):
                        trow[i] += wk * (prow[i] + qrow[i])
                wk = w[radius]
                prow = &padded[radius * ch]
                for i in range(row_len):
                    trow[i] += wk * prow[i]
            else:
                for k in range(k_len):
                    wk = w[k]
                    prow = &padded[k * ch]
                    for i in range(row_len):
                        trow[i] += wk * prow[i]
        for y in range(h):
            orow = &out[y, 0]
            if sym:
                for k in range(radius):
                    wk = w[k]
                    trow = &tmp[_clamp(y + k - radius, h), 0]
                    qrow = &tmp[_clamp(y + radius - k, h), 0]
                    for i in range(row_len):
                        orow[i] += wk * (trow[i] + qrow[i])
                wk = w[radius]
                trow = &tmp[y, 0]
                for i in range(row_len):
                    orow[i] += wk * trow[i]
            else:
                for k in range(k_len):
                    wk = w[k]
                    trow = &tmp[_clamp(y + k - radius, h), 0]
                    for i in range(row_len):
                        orow[i] += wk * trow[i]
            for i in range(row_len):
                orow[i] = (orow[i] + (<int64_t>1 << 31)) >> 32
    return out_arr


def remap_bilinear(src, map_x, map_y, fill=None):
    cdef const uint8_t[:, :, ::1] s = np.ascontiguousarray(src, dtype=np.uint8)
    cdef const int32_t[:, ::1] mx = np.ascontiguousarray(map_x, dtype=np.int32)
    cdef const int32_t[:, ::1] my = np.ascontiguousarray(map_y, dtype=np.int32)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1], ch = s.shape[2]
    cdef Py_ssize_t oh = mx.shape[0], ow = mx.shape[1]
    out_arr = np.empty((oh, ow, ch), dtype=np.uint8)
    cdef uint8_t[:, :, ::1] out = out_arr
    cdef bint edge = fill is None
    cdef int64_t[::1] fv = np.zeros(ch, dtype=np.int64) if edge else np.ascontiguousarray(fill, dtype=np.int64)
    cdef Py_ssize_t y, x, c
    cdef int64_t cx, cy, x0, y0, x1, y1, fx, fy, w00, w10, w01, w11, acc
    cdef int64_t xmax = (w - 1) << 8, ymax = (h - 1) << 8
    cdef int64_t v00, v10, v01, v11
    cdef bint in00, in10, in01, in11

    with nogil:
        for y in range(oh):
            for x in range(ow):
                cx = mx[y, x]
                cy = my[y, x]
                if edge:
                    if cx < 0:
                        cx = 0
                    elif cx > xmax:
                        cx = xmax
                    if cy < 0:
                        cy = 0
                    elif cy > ymax:
                        cy = ymax
                x0 = cx >> 8
                y0 = cy >> 8
                fx = cx & 255
                fy = cy & 255
                x1 = x0 + 1
                y1 = y0 + 1
                if edge:
                    if x1 > w - 1:
                        x1 = w - 1
                    if y1 > h - 1:
                        y1 = h - 1
                w00 = (256 - fx) * (256 - fy)
                w10 = fx * (256 - fy)
                w01 = (256 - fx) * fy
                w11 = fx * fy
                in00 = edge or (0 <= x0 < w and 0 <= y0 < h)
                in10 = edge or (0 <= x1 < w and 0 <= y0 < h)
                in01 = edge or (0 <= x0 < w and 0 <= y1 < h)
                in11 = edge or (0 <= x1 < w and 0 <= y1 < h)
                for c in range(ch):
                    v00 = s[y0, x0, c] if in00 else fv[c]
                    v10 = s[y0, x1, c] if in10 else fv[c]
                    v01 = s[y1, x0, c] if in01 else fv[c]
                    v11 = s[y1, x1, c] if in11 else fv[c]
                    acc = v00 * w00 + v10 * w10 + v01 * w01 + v11 * w11
                    out[y, x, c] = <uint8_t>((acc + 32768) >> 16)
    return out_arr
