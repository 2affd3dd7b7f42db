"""Independent brute-force references used by the tests.

Everything here is written against full O(n^2) pairwise matrices and plain
Python loops, deliberately sharing no code with the library's grid/kernel
implementations.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

NOISE = -1
UNVISITED = -2


def brute_neighbor_counts(x, y, t, d_xy, dt):
    x = np.asarray(x)
    y = np.asarray(y)
    t = np.asarray(t)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    dts = np.abs(t[:, None] - t[None, :])
    ok = (dx * dx + dy * dy <= d_xy * d_xy) & (dts <= dt)
    np.fill_diagonal(ok, False)
    return ok.sum(axis=1)


def brute_filter_removed(x, y, t, vr, d_xy, dt, vr_thresh):
    """Removal mask of the velocity/density cascade, from full matrices."""
    counts = brute_neighbor_counts(x, y, t, d_xy, dt)
    thresholds = [vr_thresh, vr_thresh / 5.0, vr_thresh / 10.0, vr_thresh / 50.0]
    limits = [2, 3, 4, 10]
    removed = []
    for i in range(len(x)):
        if counts[i] < 1:
            removed.append(True)
            continue
        hit = False
        for thr, lim in zip(thresholds, limits):
            if abs(vr[i]) < thr and counts[i] < lim:
                hit = True
                break
        removed.append(hit)
    return np.array(removed)


def brute_neighbor_matrix(x, y, vr, t, variant, eps_a, eps_b, eps_t):
    """Boolean adjacency under the stage-1 neighborhood criteria (strict)."""
    x = np.asarray(x)
    y = np.asarray(y)
    vr = np.asarray(vr)
    t = np.asarray(t)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    dvr = vr[:, None] - vr[None, :]
    dts = np.abs(t[:, None] - t[None, :])
    if variant == 0:
        ok = (np.abs(dx) < eps_a) & (np.abs(dy) < eps_a) & (np.abs(dvr) < eps_b)
    elif variant == 1:
        ok = dx * dx + dy * dy < eps_a * eps_a
        ok &= np.abs(dvr) < eps_b
    elif variant == 2:
        q = dvr / eps_b
        ok = (dx * dx + dy * dy) + q * q < eps_a * eps_a
    else:
        raise ValueError(variant)
    ok &= dts < eps_t
    np.fill_diagonal(ok, False)
    return ok


def brute_dbscan(x, y, vr, t, nmin, vr_min, variant, eps_a, eps_b, eps_t):
    """Canonical DBSCAN on precomputed adjacency: FIFO expansion, seeds in
    index order, ids in order of first core discovery."""
    adj = brute_neighbor_matrix(x, y, vr, t, variant, eps_a, eps_b, eps_t)
    n = len(x)
    nmin = np.asarray(nmin, dtype=float)
    neighbor_lists = [np.nonzero(adj[i])[0].tolist() for i in range(n)]
    core = [len(neighbor_lists[i]) >= nmin[i] and abs(vr[i]) > vr_min for i in range(n)]

    labels = [UNVISITED] * n
    cid = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cid
        queue = list(neighbor_lists[i])
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == NOISE:
                labels[j] = cid
            if labels[j] != UNVISITED:
                continue
            labels[j] = cid
            if core[j]:
                queue.extend(neighbor_lists[j])
        cid += 1
    return np.array(labels)


def canonical_labels(labels) -> np.ndarray:
    """Renumber ids in order of first appearance; noise (< 0) maps to -1."""
    out = np.empty(len(labels), dtype=np.int64)
    seen: dict[int, int] = {}
    for i, lab in enumerate(labels):
        lab = int(lab)
        if lab < 0:
            out[i] = -1
            continue
        if lab not in seen:
            seen[lab] = len(seen)
        out[i] = seen[lab]
    return out


def same_partition(a, b) -> bool:
    return np.array_equal(canonical_labels(a), canonical_labels(b))


def direct_entropy_scores(truth, pred):
    """(homogeneity, completeness_modified, v_measure) from raw counts with
    plain loops; background truth rows (== -1) are dropped for completeness."""
    truth = [int(v) for v in truth]
    pred = [int(v) for v in pred]
    n = len(truth)

    def entropy(labels):
        total = len(labels)
        h = 0.0
        for c in Counter(labels).values():
            p = c / total
            h -= p * math.log(p)
        return h

    def cond_entropy(a, b):
        # H(A | B)
        total = len(a)
        joint = Counter(zip(a, b))
        nb = Counter(b)
        h = 0.0
        for (va, vb), c in joint.items():
            h -= c / total * math.log(c / nb[vb])
        return h

    if n == 0:
        return 1.0, 1.0, 1.0
    h_truth = entropy(truth)
    homog = 1.0 if h_truth == 0 else 1.0 - cond_entropy(truth, pred) / h_truth

    keep = [(c, k) for c, k in zip(truth, pred) if c != -1]
    if not keep:
        comp = 1.0
    else:
        sc = [c for c, _ in keep]
        sk = [k for _, k in keep]
        h_pred = entropy(sk)
        comp = 1.0 if h_pred == 0 else 1.0 - cond_entropy(sk, sc) / h_pred

    v = 0.0 if homog + comp == 0 else 2 * homog * comp / (homog + comp)
    return homog, comp, v
