"""Clustering quality scores and the pre-clustered optimization target.

Homogeneity rewards pure predicted clusters; completeness rewards keeping
each annotated object in one predicted cluster. Completeness is computed
only over detections that belong to an annotated object, so clusters
formed out of background never cost anything there. The combined score is
the harmonic mean of the two. Natural logarithms throughout; noise
predictions count as one extra predicted class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import BACKGROUND, detection_columns


@dataclass
class LabeledPartition:
    """Ground-truth object ids (BACKGROUND = -1) and predicted cluster ids
    (NOISE = -1) for the same detections."""

    ground_truth: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        self.ground_truth = np.asarray(self.ground_truth, dtype=np.int64)
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        if self.ground_truth.shape != self.predicted.shape:
            raise ValueError("ground_truth and predicted must have equal length")

    def __len__(self) -> int:
        return len(self.ground_truth)


def _contingency(a: np.ndarray, b: np.ndarray):
    """Joint counts n_ab plus marginals, with labels densified."""
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    na = ai.max() + 1 if len(ai) else 0
    nb = bi.max() + 1 if len(bi) else 0
    joint = np.zeros((na, nb), dtype=np.int64)
    np.add.at(joint, (ai, bi), 1)
    return joint


def _entropy(counts: np.ndarray, n: int) -> float:
    counts = counts[counts > 0]
    p = counts / n
    return float(-(p * np.log(p)).sum())


def _conditional_entropy(joint: np.ndarray, n: int) -> float:
    """H(rows | cols) from joint counts."""
    col = joint.sum(axis=0)
    h = 0.0
    for j in range(joint.shape[1]):
        cj = joint[:, j]
        cj = cj[cj > 0]
        if len(cj) == 0:
            continue
        h -= float((cj / n * np.log(cj / col[j])).sum())
    return h


def homogeneity(p: LabeledPartition) -> float:
    """1 - H(truth | predicted) / H(truth); 1.0 when H(truth) = 0."""
    n = len(p)
    if n == 0:
        return 1.0
    joint = _contingency(p.ground_truth, p.predicted)
    h_c = _entropy(joint.sum(axis=1), n)
    if h_c == 0.0:
        return 1.0
    return 1.0 - _conditional_entropy(joint, n) / h_c


def completeness(p: LabeledPartition) -> float:
    """Unmodified counterpart: 1 - H(predicted | truth) / H(predicted),
    over all rows. Kept for tests and symmetry checks."""
    return homogeneity(LabeledPartition(ground_truth=p.predicted, predicted=p.ground_truth))


def completeness_modified(p: LabeledPartition) -> float:
    """Completeness over the annotated-object rows only.

    Background rows are dropped before computing the entropies, so
    predicted clusters that contain only background cannot be penalized.
    1.0 for an empty sub-partition or when H(predicted) = 0 on it.
    """
    sel = p.ground_truth != BACKGROUND
    if not np.any(sel):
        return 1.0
    sub = LabeledPartition(ground_truth=p.ground_truth[sel], predicted=p.predicted[sel])
    return completeness(sub)


def v_measure(p: LabeledPartition) -> float:
    """Harmonic mean of homogeneity and modified completeness; 0 when both
    are 0."""
    h = homogeneity(p)
    c = completeness_modified(p)
    if h + c == 0.0:
        return 0.0
    return 2.0 * h * c / (h + c)


def score_triplet(p: LabeledPartition) -> tuple[float, float, float]:
    h = homogeneity(p)
    c = completeness_modified(p)
    v = 0.0 if h + c == 0.0 else 2.0 * h * c / (h + c)
    return h, c, v


@dataclass
class WindowScore:
    window: tuple[float, float]
    n: int
    homogeneity: float
    completeness: float
    v_measure: float


def score_windows(assignments, target_labels: np.ndarray) -> list[WindowScore]:
    """Score each window assignment against the per-detection target labels
    (restricted to the rows present in the window)."""
    out = []
    for a in assignments:
        gt = target_labels[a.indices]
        p = LabeledPartition(ground_truth=gt, predicted=a.labels)
        h, c, v = score_triplet(p)
        out.append(WindowScore(window=a.window, n=len(a.labels), homogeneity=h, completeness=c, v_measure=v))
    return out


def aggregate_v_measure(window_scores: list[WindowScore]) -> float:
    """Detection-count weighted mean of per-window scores; 0-row windows
    carry no weight. Returns 1.0 for an empty list (vacuous)."""
    total = sum(w.n for w in window_scores)
    if total == 0:
        return 1.0
    return sum(w.n * w.v_measure for w in window_scores) / total


# Liberal clustering settings used to turn annotations into target labels.
PRECLUSTER_EPS_XY = 2.0
PRECLUSTER_EPS_VR = 25.0
PRECLUSTER_EPS_T = 0.25
PRECLUSTER_VR_MIN = 0.01
PRECLUSTER_MIN_PTS = 2


def preclusters_from_ground_truth(detections) -> np.ndarray:
    """Per-detection optimization target labels.

    Each annotated object is clustered on its own with deliberately loose
    box parameters, so an object splits only where it genuinely vanishes
    from the data for longer than the time window (a track with a gap
    yields one target cluster per contiguous segment, and two nearby
    objects can never fuse). Object detections the loose pass leaves as
    noise become BACKGROUND in the target.
    """
    from .stage1 import CorePointRule, NeighborhoodCriterion, cluster_window

    cols = detection_columns(detections)
    gt = cols["gt_label"]
    target = np.full(len(detections), BACKGROUND, dtype=np.int64)
    crit = NeighborhoodCriterion.box(PRECLUSTER_EPS_XY, PRECLUSTER_EPS_VR, PRECLUSTER_EPS_T)
    rule = CorePointRule.fixed(PRECLUSTER_MIN_PTS, vr_min=PRECLUSTER_VR_MIN)
    next_id = 0
    for obj in np.unique(gt):
        if obj == BACKGROUND:
            continue
        idx = np.nonzero(gt == obj)[0]
        sub = [detections[i] for i in idx]
        labels = cluster_window(sub, crit, rule).labels
        for k in range(int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0):
            target[idx[labels == k]] = next_id
            next_id += 1
    return target
