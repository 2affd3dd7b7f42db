"""Background detection filtering.

A detection is removed when it is isolated (no neighbor within d_xy and
dt) or when some stage of a fixed velocity/density cascade fires: slow
points need many neighbors to survive, fast points survive with few. The
cascade has two free parameters (the top velocity threshold and the
neighbor radius); the remaining thresholds are fixed ratios.

The tuner enumerates a parameter grid and counts, per cell, how often a
labeled object would lose more than the allowed share of its detections
within one evaluation frame.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .types import BACKGROUND, Detection, detection_columns

CASCADE_RATIOS = (1.0, 1.0 / 5.0, 1.0 / 10.0, 1.0 / 50.0)
CASCADE_COUNTS = (2, 3, 4, 10)


@dataclass(frozen=True)
class FilterConfig:
    """Cascade parameters. vr_thresh is the top (stage 1) velocity
    threshold in m/s; stages 2..4 use vr_thresh/5, /10, /50 against
    neighbor counts below 2, 3, 4, 10 respectively."""

    vr_thresh: float = 0.10
    d_xy: float = 1.4
    dt: float = 0.25
    literal_all_stages: bool = False  # remove only when every stage fires

    def __post_init__(self):
        if self.vr_thresh <= 0:
            raise ValueError("vr_thresh must be > 0")
        if self.d_xy <= 0:
            raise ValueError("d_xy must be > 0")
        if self.dt < 0:
            raise ValueError("dt must be >= 0")

    @property
    def thresholds(self) -> tuple[float, float, float, float]:
        return tuple(self.vr_thresh * r for r in CASCADE_RATIOS)


@dataclass(frozen=True)
class FilterTunerCriterion:
    """Violation rule for the tuner: an object must retain at least
    retention_fraction of its detections in every frame_length window."""

    retention_fraction: float = 0.75
    frame_length: float = 0.150
    max_violations: int = 0

    def __post_init__(self):
        if not (0 < self.retention_fraction <= 1):
            raise ValueError("retention_fraction must be in (0, 1]")
        if self.frame_length <= 0:
            raise ValueError("frame_length must be > 0")


def count_neighbors(detections, d_xy: float, dt: float) -> np.ndarray:
    """Neighbor count per detection: OTHER detections with xy-distance
    <= d_xy and |time difference| <= dt, in the active coordinate frame."""
    cols = detection_columns(detections)
    return kernels.neighbor_counts(cols["x"], cols["y"], cols["time"], d_xy, dt)


def removal_mask(detections, cfg: FilterConfig) -> np.ndarray:
    """Boolean mask of detections the cascade removes."""
    cols = detection_columns(detections)
    counts = kernels.neighbor_counts(cols["x"], cols["y"], cols["time"], cfg.d_xy, cfg.dt)
    return _removal_from_counts(np.abs(cols["radial_velocity"]), counts, cfg)


def _removal_from_counts(abs_vr: np.ndarray, counts: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    removed = counts < 1
    stages = None
    for thr, nmax in zip(cfg.thresholds, CASCADE_COUNTS):
        fired = (abs_vr < thr) & (counts < nmax)
        if cfg.literal_all_stages:
            stages = fired if stages is None else (stages & fired)
        else:
            stages = fired if stages is None else (stages | fired)
    return removed | stages


def filter_detections(detections, cfg: FilterConfig) -> tuple[list[Detection], list[Detection]]:
    """Split a log into (kept, removed); order preserved within each part."""
    mask = removal_mask(detections, cfg)
    kept = [d for d, rm in zip(detections, mask) if not rm]
    removed = [d for d, rm in zip(detections, mask) if rm]
    return kept, removed


def default_grid() -> tuple[np.ndarray, np.ndarray]:
    """Tuning grid: velocity threshold 0.05..0.35 m/s step 0.05, neighbor
    radius 0.8..2.0 m step 0.2."""
    vr = np.round(np.arange(0.05, 0.35 + 1e-9, 0.05), 10)
    d = np.round(np.arange(0.8, 2.0 + 1e-9, 0.2), 10)
    return vr, d


@dataclass
class TuneResult:
    config: FilterConfig
    vr_values: np.ndarray
    d_xy_values: np.ndarray
    violations: np.ndarray  # (len(vr), len(d_xy)) int
    removal_rates: np.ndarray  # same shape, background removal fraction


def _count_violations(
    removed_mask: np.ndarray,
    gt: np.ndarray,
    times: np.ndarray,
    crit: FilterTunerCriterion,
) -> int:
    """(object, frame) pairs where the object keeps < retention_fraction of
    its detections. Frames tile the log span; objects present for less than
    one frame length are skipped."""
    t0 = times.min()
    violations = 0
    for obj in np.unique(gt):
        if obj == BACKGROUND:
            continue
        sel = gt == obj
        ot = times[sel]
        if ot.max() - ot.min() < crit.frame_length:
            continue
        frames = np.floor((ot - t0) / crit.frame_length).astype(np.int64)
        orm = removed_mask[sel]
        for f in np.unique(frames):
            in_f = frames == f
            total = int(in_f.sum())
            keptn = total - int(orm[in_f].sum())
            if keptn < crit.retention_fraction * total:
                violations += 1
    return violations


def tune_filter(
    detections,
    crit: FilterTunerCriterion = FilterTunerCriterion(),
    vr_values: np.ndarray | None = None,
    d_xy_values: np.ndarray | None = None,
    dt: float = 0.25,
    prefer=None,
    threads: int = 1,
) -> TuneResult:
    """Grid-enumerate filter settings on a labeled log.

    Selection: among cells within the violation budget, maximize background
    removal rate; ties prefer larger d_xy, then smaller velocity threshold.
    ``prefer`` may override: it receives [(i, j, removal_rate), ...] of the
    eligible cells and returns the chosen (i, j). If no cell meets the
    budget, the cells with the fewest violations are used instead.
    """
    if len(detections) == 0:
        raise ValueError("empty training data")
    cols = detection_columns(detections)
    gt = cols["gt_label"]
    if not np.any(gt != BACKGROUND):
        raise ValueError("training data has no labeled objects")
    if vr_values is None or d_xy_values is None:
        gv, gd = default_grid()
        vr_values = gv if vr_values is None else np.asarray(vr_values, dtype=float)
        d_xy_values = gd if d_xy_values is None else np.asarray(d_xy_values, dtype=float)

    abs_vr = np.abs(cols["radial_velocity"])
    times = cols["time"]
    background = gt == BACKGROUND
    n_bg = int(background.sum())

    violations = np.zeros((len(vr_values), len(d_xy_values)), dtype=np.int64)
    removal = np.zeros_like(violations, dtype=np.float64)

    def eval_column(j: int):
        # neighbor counts depend only on d_xy; shared across the vr axis
        counts = kernels.neighbor_counts(cols["x"], cols["y"], times, float(d_xy_values[j]), dt)
        out = []
        for i, vr_thr in enumerate(vr_values):
            cfg = FilterConfig(vr_thresh=float(vr_thr), d_xy=float(d_xy_values[j]), dt=dt)
            rm = _removal_from_counts(abs_vr, counts, cfg)
            v = _count_violations(rm, gt, times, crit)
            rate = float(rm[background].sum()) / n_bg if n_bg else 0.0
            out.append((i, v, rate))
        return j, out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(eval_column, range(len(d_xy_values))))
    else:
        results = [eval_column(j) for j in range(len(d_xy_values))]
    for j, col in results:
        for i, v, rate in col:
            violations[i, j] = v
            removal[i, j] = rate

    eligible = np.argwhere(violations <= crit.max_violations)
    if len(eligible) == 0:
        eligible = np.argwhere(violations == violations.min())
    cells = [(int(i), int(j), float(removal[i, j])) for i, j in eligible]
    if prefer is not None:
        bi, bj = prefer(cells)
    else:
        # max removal; ties -> larger d_xy, then smaller velocity threshold
        cells.sort(key=lambda c: (-c[2], -d_xy_values[c[1]], vr_values[c[0]]))
        bi, bj = cells[0][0], cells[0][1]

    cfg = FilterConfig(vr_thresh=float(vr_values[bi]), d_xy=float(d_xy_values[bj]), dt=dt)
    return TuneResult(
        config=cfg,
        vr_values=np.asarray(vr_values, dtype=float),
        d_xy_values=np.asarray(d_xy_values, dtype=float),
        violations=violations,
        removal_rates=removal,
    )
