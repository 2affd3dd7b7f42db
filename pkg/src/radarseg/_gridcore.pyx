# cython: language_level=3
"""Compiled hot kernels: uniform-grid neighbor counting and DBSCAN labeling.

Semantics are identical to radarseg.kernels.pygrid (the pure-Python
fallback); tests assert exact label equality between the two backends.
"""

import numpy as np

from libc.math cimport fabs, floor


UNVISITED = -2
NOISE = -1

# neighborhood criterion codes (shared with the fallback backend)
BOX = 0
EUCLID_XY = 1
EUCLID_XYVR = 2

cdef long long C_UNVISITED = -2
cdef long long C_NOISE = -1


cdef inline Py_ssize_t _bisect_left(long long[::1] a, long long v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _grid_keys(double[::1] x, double[::1] y, double cell):
    """Cell key per point: (cx << 32) | cy with non-negative cell indices."""
    xs = np.asarray(x)
    ys = np.asarray(y)
    cx = np.floor((xs - xs.min()) / cell).astype(np.int64)
    cy = np.floor((ys - ys.min()) / cell).astype(np.int64)
    keys = (cx << 32) | cy
    order = np.argsort(keys, kind="stable").astype(np.int64)
    return keys[order], order, cx, cy


def neighbor_counts(double[::1] x, double[::1] y, double[::1] t,
                    double d_xy, double dt):
    """Count, per point, the OTHER points with xy-distance <= d_xy and
    |time difference| <= dt (non-strict on both)."""
    cdef Py_ssize_t n = x.shape[0]
    counts_np = np.zeros(n, dtype=np.int64)
    if n == 0:
        return counts_np
    if d_xy <= 0 or dt < 0:
        raise ValueError("d_xy must be > 0 and dt >= 0")

    skeys_np, order_np, cx_np, cy_np = _grid_keys(x, y, d_xy)
    cdef long long[::1] skeys = skeys_np
    cdef long long[::1] order = order_np
    cdef long long[::1] cx = cx_np
    cdef long long[::1] cy = cy_np
    cdef long long[::1] counts = counts_np
    cdef long long maxcx = np.max(cx_np), maxcy = np.max(cy_np)

    cdef Py_ssize_t i, j, lo
    cdef long long gx, gy, key
    cdef int dxc, dyc
    cdef double dx, dy, dts, r2 = d_xy * d_xy
    cdef long long c
    with nogil:
        for i in range(n):
            c = 0
            for dxc in range(-1, 2):
                gx = cx[i] + dxc
                if gx < 0 or gx > maxcx:
                    continue
                for dyc in range(-1, 2):
                    gy = cy[i] + dyc
                    if gy < 0 or gy > maxcy:
                        continue
                    key = (gx << 32) | gy
                    lo = _bisect_left(skeys, key)
                    while lo < n and skeys[lo] == key:
                        j = order[lo]
                        lo += 1
                        if j == i:
                            continue
                        dts = fabs(t[i] - t[j])
                        if dts > dt:
                            continue
                        dx = x[i] - x[j]
                        dy = y[i] - y[j]
                        if dx * dx + dy * dy <= r2:
                            c += 1
            counts[i] = c
    return counts_np


cdef inline Py_ssize_t _collect(Py_ssize_t i,
                                double[::1] x, double[::1] y,
                                double[::1] vr, double[::1] t,
                                long long[::1] skeys, long long[::1] order,
                                long long[::1] cx, long long[::1] cy,
                                long long maxcx, long long maxcy,
                                int variant, double eps_a, double eps_b,
                                double eps_t, long long[::1] buf) noexcept nogil:
    """Write the neighbor indices of point i (self excluded, strict
    inequalities) into buf; return how many."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = 0, j, lo
    cdef long long gx, gy, key
    cdef int dxc, dyc
    cdef double dx, dy, dvr, q, a2 = eps_a * eps_a
    for dxc in range(-1, 2):
        gx = cx[i] + dxc
        if gx < 0 or gx > maxcx:
            continue
        for dyc in range(-1, 2):
            gy = cy[i] + dyc
            if gy < 0 or gy > maxcy:
                continue
            key = (gx << 32) | gy
            lo = _bisect_left(skeys, key)
            while lo < n and skeys[lo] == key:
                j = order[lo]
                lo += 1
                if j == i:
                    continue
                if fabs(t[i] - t[j]) >= eps_t:
                    continue
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                dvr = vr[i] - vr[j]
                if variant == 0:
                    if fabs(dx) < eps_a and fabs(dy) < eps_a and fabs(dvr) < eps_b:
                        buf[m] = j
                        m += 1
                elif variant == 1:
                    if dx * dx + dy * dy < a2 and fabs(dvr) < eps_b:
                        buf[m] = j
                        m += 1
                else:
                    q = dvr / eps_b
                    if (dx * dx + dy * dy) + q * q < a2:
                        buf[m] = j
                        m += 1
    return m


def dbscan_labels(double[::1] x, double[::1] y, double[::1] vr, double[::1] t,
                  double[::1] nmin, double vr_min,
                  int variant, double eps_a, double eps_b, double eps_t):
    """Density clustering over (x, y, v_r, t) points.

    A point is a core point iff |vr| > vr_min (strict) and its neighbor
    count (self excluded) is >= its per-point nmin threshold. Cluster ids
    are dense and assigned in order of first core-point discovery; points
    reachable from no core point are labeled -1.
    """
    cdef Py_ssize_t n = x.shape[0]
    labels_np = np.full(n, C_UNVISITED, dtype=np.int64)
    if n == 0:
        return labels_np
    if eps_a <= 0 or eps_b <= 0 or eps_t <= 0:
        raise ValueError("all epsilons must be > 0")

    skeys_np, order_np, cx_np, cy_np = _grid_keys(x, y, eps_a)
    cdef long long[::1] skeys = skeys_np
    cdef long long[::1] order = order_np
    cdef long long[::1] cx = cx_np
    cdef long long[::1] cy = cy_np
    cdef long long maxcx = np.max(cx_np), maxcy = np.max(cy_np)

    cdef long long[::1] labels = labels_np
    buf_np = np.empty(n, dtype=np.int64)
    stack_np = np.empty(n, dtype=np.int64)
    cdef long long[::1] buf = buf_np
    cdef long long[::1] stack = stack_np

    cdef Py_ssize_t i, j, k, m, sp
    cdef long long cid = 0
    with nogil:
        for i in range(n):
            if labels[i] != C_UNVISITED:
                continue
            m = _collect(i, x, y, vr, t, skeys, order, cx, cy, maxcx, maxcy,
                         variant, eps_a, eps_b, eps_t, buf)
            if fabs(vr[i]) <= vr_min or m < nmin[i]:
                labels[i] = C_NOISE
                continue
            labels[i] = cid
            sp = 0
            for k in range(m):
                j = buf[k]
                if labels[j] == C_NOISE:
                    labels[j] = cid
                elif labels[j] == C_UNVISITED:
                    labels[j] = cid
                    stack[sp] = j
                    sp += 1
            while sp > 0:
                sp -= 1
                j = stack[sp]
                m = _collect(j, x, y, vr, t, skeys, order, cx, cy, maxcx, maxcy,
                             variant, eps_a, eps_b, eps_t, buf)
                if fabs(vr[j]) <= vr_min or m < nmin[j]:
                    continue
                for k in range(m):
                    if labels[buf[k]] == C_NOISE:
                        labels[buf[k]] = cid
                    elif labels[buf[k]] == C_UNVISITED:
                        labels[buf[k]] = cid
                        stack[sp] = buf[k]
                        sp += 1
            cid += 1
    return labels_np
