# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for mask-to-box projection, its gradient, component
boxes and binary overlap counts. Mirrors ``boxseg._fallback`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def project(const double[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1], r, c
    row = np.empty(w, dtype=np.float64)
    col = np.empty(h, dtype=np.float64)
    row_arg = np.zeros(w, dtype=np.intp)
    col_arg = np.zeros(h, dtype=np.intp)
    cdef double[::1] rp = row, cp = col
    cdef Py_ssize_t[::1] ra = row_arg, ca = col_arg
    cdef double v
    for c in range(w):
        rp[c] = mask[0, c]
    for r in range(h):
        cp[r] = mask[r, 0]
        for c in range(w):
            v = mask[r, c]
            # strict comparison keeps the first maximal index
            if v > rp[c]:
                rp[c] = v
                ra[c] = r
            if v > cp[r]:
                cp[r] = v
                ca[r] = c
    return row, col, row_arg, col_arg


def back_project(const double[::1] row, const double[::1] col):
    cdef Py_ssize_t h = col.shape[0], w = row.shape[0], r, c
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] o = out
    for r in range(h):
        for c in range(w):
            o[r, c] = row[c] if row[c] <= col[r] else col[r]
    return out


def m2b(const double[:, ::1] mask):
    row, col, _, _ = project(mask)
    return back_project(row, col)


def m2b_backward(const double[:, ::1] mask, const double[:, ::1] grad):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1], r, c
    row, col, row_arg, col_arg = project(mask)
    cdef double[::1] rp = row, cp = col
    cdef Py_ssize_t[::1] ra = row_arg, ca = col_arg
    g_row = np.zeros(w, dtype=np.float64)
    g_col = np.zeros(h, dtype=np.float64)
    cdef double[::1] gr = g_row, gc = g_col
    for r in range(h):
        for c in range(w):
            if rp[c] <= cp[r]:
                gr[c] += grad[r, c]
            else:
                gc[r] += grad[r, c]
    out = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] o = out
    for c in range(w):
        o[ra[c], c] += gr[c]
    for r in range(h):
        o[r, ca[r]] += gc[r]
    return out


def component_boxes(const unsigned char[:, ::1] mask):
    """Tight inclusive boxes of 4-connected components, scan order."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef Py_ssize_t r, c, rr, cc, head, tail, k, n
    cdef Py_ssize_t r0, c0, r1, c1
    seen_arr = np.zeros((h, w), dtype=np.uint8)
    stack_arr = np.empty(h * w, dtype=np.intp)
    cdef unsigned char[:, ::1] seen = seen_arr
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef int[4] dr
    cdef int[4] dc
    dr[0] = -1; dr[1] = 1; dr[2] = 0; dr[3] = 0
    dc[0] = 0; dc[1] = 0; dc[2] = -1; dc[3] = 1
    boxes = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] == 0 or seen[r, c]:
                continue
            seen[r, c] = 1
            tail = 0
            stack[tail] = r * w + c
            tail += 1
            r0 = r1 = r
            c0 = c1 = c
            while tail > 0:
                tail -= 1
                n = stack[tail]
                rr = n // w
                cc = n - rr * w
                if rr < r0: r0 = rr
                if rr > r1: r1 = rr
                if cc < c0: c0 = cc
                if cc > c1: c1 = cc
                for k in range(4):
                    head = rr + dr[k]
                    n = cc + dc[k]
                    if head < 0 or head >= h or n < 0 or n >= w:
                        continue
                    if mask[head, n] == 0 or seen[head, n]:
                        continue
                    seen[head, n] = 1
                    stack[tail] = head * w + n
                    tail += 1
            boxes.append((int(r0), int(c0), int(r1), int(c1)))
    return boxes


def overlap_counts(const unsigned char[:, :, ::1] pred, const unsigned char[:, :, ::1] gt):
    """Per-image (intersection, |pred|, |gt|) for stacked binary masks."""
    cdef Py_ssize_t n = pred.shape[0], m = pred.shape[1] * pred.shape[2]
    cdef Py_ssize_t i, k
    out = np.zeros((n, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef const unsigned char *pp
    cdef const unsigned char *gp
    cdef cnp.int64_t inter, np_, ng
    cdef unsigned char p, g
    if n == 0 or m == 0:
        return out
    for i in range(n):
        pp = &pred[i, 0, 0]
        gp = &gt[i, 0, 0]
        inter = np_ = ng = 0
        for k in range(m):
            p = pp[k] != 0
            g = gp[k] != 0
            inter += p & g
            np_ += p
            ng += g
        o[i, 0] = inter
        o[i, 1] = np_
        o[i, 2] = ng
    return out
