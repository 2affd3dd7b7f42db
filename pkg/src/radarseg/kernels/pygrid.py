"""Pure-numpy fallback for the compiled neighbor/DBSCAN kernels.

Same public functions and exact same semantics as radarseg._gridcore;
used automatically when the extension is not built. Neighbor candidates
are gathered per grid cell (3x3 block) and tested with vectorized
comparisons, so the fallback stays usable on full scenes.
"""

from __future__ import annotations

import numpy as np

UNVISITED = -2
NOISE = -1

BOX = 0
EUCLID_XY = 1
EUCLID_XYVR = 2


def _cell_blocks(x: np.ndarray, y: np.ndarray, cell: float):
    """Yield (member_indices, candidate_indices) per occupied grid cell.

    Members are the points in the cell (ascending index); candidates are
    all points in the surrounding 3x3 block.
    """
    cx = np.floor((x - x.min()) / cell).astype(np.int64)
    cy = np.floor((y - y.min()) / cell).astype(np.int64)
    keys = (cx << 32) | cy
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    uniq, starts = np.unique(skeys, return_index=True)
    bounds = np.append(starts, len(skeys))
    span = {int(k): (int(s), int(e)) for k, s, e in zip(uniq, bounds[:-1], bounds[1:])}
    for k, s, e in zip(uniq, bounds[:-1], bounds[1:]):
        gx, gy = int(k) >> 32, int(k) & 0xFFFFFFFF
        parts = []
        for dxc in (-1, 0, 1):
            for dyc in (-1, 0, 1):
                ngy = gy + dyc
                if ngy < 0 or ngy > 0xFFFFFFFF:
                    continue
                k2 = ((gx + dxc) << 32) | ngy
                se = span.get(k2)
                if se is not None:
                    parts.append(order[se[0]:se[1]])
        yield order[s:e], np.concatenate(parts)


def neighbor_counts(x, y, t, d_xy: float, dt: float) -> np.ndarray:
    """Count, per point, the OTHER points with xy-distance <= d_xy and
    |time difference| <= dt (non-strict on both)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    n = len(x)
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return counts
    if d_xy <= 0 or dt < 0:
        raise ValueError("d_xy must be > 0 and dt >= 0")
    r2 = d_xy * d_xy
    for rows, cand in _cell_blocks(x, y, d_xy):
        dx = x[rows, None] - x[cand][None, :]
        dy = y[rows, None] - y[cand][None, :]
        dts = np.abs(t[rows, None] - t[cand][None, :])
        ok = (dx * dx + dy * dy <= r2) & (dts <= dt)
        # self always satisfies both non-strict tests
        counts[rows] = ok.sum(axis=1) - 1
    return counts


def _neighbor_lists(x, y, vr, t, variant, eps_a, eps_b, eps_t):
    n = len(x)
    lists: list[np.ndarray] = [None] * n
    a2 = eps_a * eps_a
    for rows, cand in _cell_blocks(x, y, eps_a):
        dx = x[rows, None] - x[cand][None, :]
        dy = y[rows, None] - y[cand][None, :]
        dvr = vr[rows, None] - vr[cand][None, :]
        dts = np.abs(t[rows, None] - t[cand][None, :])
        if variant == BOX:
            ok = (np.abs(dx) < eps_a) & (np.abs(dy) < eps_a) & (np.abs(dvr) < eps_b)
        elif variant == EUCLID_XY:
            ok = (dx * dx + dy * dy < a2) & (np.abs(dvr) < eps_b)
        elif variant == EUCLID_XYVR:
            q = dvr / eps_b
            ok = (dx * dx + dy * dy) + q * q < a2
        else:
            raise ValueError(f"unknown criterion variant {variant}")
        ok &= dts < eps_t
        col_of = {int(j): c for c, j in enumerate(cand)}
        for k, i in enumerate(rows):
            ok[k, col_of[int(i)]] = False  # exclude self
            lists[int(i)] = cand[ok[k]]
    return lists


def dbscan_labels(x, y, vr, t, nmin, vr_min: float,
                  variant: int, eps_a: float, eps_b: float, eps_t: float) -> np.ndarray:
    """Density clustering over (x, y, v_r, t) points; see the compiled
    backend for the exact contract."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    vr = np.asarray(vr, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    nmin = np.asarray(nmin, dtype=np.float64)
    n = len(x)
    labels = np.full(n, UNVISITED, dtype=np.int64)
    if n == 0:
        return labels
    if eps_a <= 0 or eps_b <= 0 or eps_t <= 0:
        raise ValueError("all epsilons must be > 0")

    nbrs = _neighbor_lists(x, y, vr, t, variant, eps_a, eps_b, eps_t)
    counts = np.array([len(v) for v in nbrs])
    core = (counts >= nmin) & (np.abs(vr) > vr_min)

    cid = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cid
        stack = []
        for j in nbrs[i]:
            if labels[j] == NOISE:
                labels[j] = cid
            elif labels[j] == UNVISITED:
                labels[j] = cid
                stack.append(j)
        while stack:
            j = stack.pop()
            if not core[j]:
                continue
            for q in nbrs[j]:
                if labels[q] == NOISE:
                    labels[q] = cid
                elif labels[q] == UNVISITED:
                    labels[q] = cid
                    stack.append(q)
        cid += 1
    return labels
