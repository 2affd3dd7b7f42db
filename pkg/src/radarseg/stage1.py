"""First clustering stage: sliding-window DBSCAN over filtered detections.

Three neighborhood criteria are available (axis-aligned box, Euclidean
xy, and Euclidean xy with scaled radial velocity folded in); all treat
time as an independent variable with a strict window |dt| < eps_t. Core
points additionally need |v_r| above a gate and a minimum neighbor count
that can grow with sensor range.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .types import ClusterAssignment, detection_columns

BOX = "box"
EUCLID_XY = "euclid_xy"
EUCLID_XYVR = "euclid_xyvr"

_VARIANT_CODE = {BOX: kernels.BOX, EUCLID_XY: kernels.EUCLID_XY, EUCLID_XYVR: kernels.EUCLID_XYVR}

RANGE_CLIP = (25.0, 125.0)
RANGE_BASELINE = 50.0


@dataclass(frozen=True)
class NeighborhoodCriterion:
    """Neighborhood predicate for one detection pair.

    box:         |dx| < eps_xy and |dy| < eps_xy and |dvr| < eps_vr
    euclid_xy:   hypot(dx, dy) < eps_xy and |dvr| < eps_vr
    euclid_xyvr: dx^2 + dy^2 + (dvr/eps_vr_scale)^2 < eps_xyvr^2

    All variants also require |dt| < eps_t (strict).
    """

    variant: str
    eps_xy: float = 0.0
    eps_vr: float = 0.0
    eps_xyvr: float = 0.0
    eps_vr_scale: float = 0.0
    eps_t: float = 0.25

    def __post_init__(self):
        if self.variant not in _VARIANT_CODE:
            raise ValueError(f"unknown criterion variant {self.variant!r}")
        if self.eps_t <= 0:
            raise ValueError("eps_t must be > 0")
        for name in self._used_fields():
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0 for variant {self.variant}")

    def _used_fields(self) -> tuple[str, ...]:
        if self.variant == EUCLID_XYVR:
            return ("eps_xyvr", "eps_vr_scale")
        return ("eps_xy", "eps_vr")

    @classmethod
    def box(cls, eps_xy: float, eps_vr: float, eps_t: float = 0.25):
        return cls(variant=BOX, eps_xy=eps_xy, eps_vr=eps_vr, eps_t=eps_t)

    @classmethod
    def euclid_xy(cls, eps_xy: float, eps_vr: float, eps_t: float = 0.25):
        return cls(variant=EUCLID_XY, eps_xy=eps_xy, eps_vr=eps_vr, eps_t=eps_t)

    @classmethod
    def euclid_xyvr(cls, eps_xyvr: float, eps_vr_scale: float, eps_t: float = 0.25):
        return cls(variant=EUCLID_XYVR, eps_xyvr=eps_xyvr, eps_vr_scale=eps_vr_scale, eps_t=eps_t)

    def kernel_args(self) -> tuple[int, float, float, float]:
        """(variant code, eps_a, eps_b, eps_t) for the kernel backends."""
        if self.variant == EUCLID_XYVR:
            return _VARIANT_CODE[self.variant], self.eps_xyvr, self.eps_vr_scale, self.eps_t
        return _VARIANT_CODE[self.variant], self.eps_xy, self.eps_vr, self.eps_t


@dataclass(frozen=True)
class CorePointRule:
    """Gate for DBSCAN core points.

    A point can seed/extend a cluster only if |v_r| > vr_min (strict) and
    its neighbor count (self excluded) is >= the minimum-points threshold.
    The threshold is either fixed (min_pts) or range-adaptive: a baseline
    value at 50 m scaled linearly in clip(r, 25, 125)/50 with the given
    slope. With reciprocal=True the scaling uses 50/clip(r) instead, which
    lowers the demand for remote points.
    """

    vr_min: float = 0.0
    min_pts: float | None = None
    min_pts_50m: float | None = None
    range_slope: float = 0.0
    reciprocal: bool = False

    def __post_init__(self):
        if self.vr_min < 0:
            raise ValueError("vr_min must be >= 0")
        if (self.min_pts is None) == (self.min_pts_50m is None):
            raise ValueError("set exactly one of min_pts (fixed) or min_pts_50m (adaptive)")
        if self.min_pts is not None and self.min_pts <= 0:
            raise ValueError("min_pts must be > 0")
        if self.min_pts_50m is not None and self.min_pts_50m <= 0:
            raise ValueError("min_pts_50m must be > 0")

    @property
    def adaptive(self) -> bool:
        return self.min_pts_50m is not None

    @classmethod
    def fixed(cls, min_pts: float, vr_min: float = 0.0):
        return cls(vr_min=vr_min, min_pts=min_pts)

    @classmethod
    def adaptive_range(cls, min_pts_50m: float, range_slope: float, vr_min: float = 0.0, reciprocal: bool = False):
        return cls(vr_min=vr_min, min_pts_50m=min_pts_50m, range_slope=range_slope, reciprocal=reciprocal)


def n_min_at(r, rule: CorePointRule):
    """Minimum-neighbor threshold at sensor range r (scalar or array).

    Real-valued on purpose: integer neighbor counts are compared against it
    with >= and no rounding, which keeps the optimizer's landscape smooth.
    """
    if not rule.adaptive:
        return rule.min_pts if np.isscalar(r) else np.full(np.shape(r), float(rule.min_pts))
    rc = np.clip(r, RANGE_CLIP[0], RANGE_CLIP[1])
    if rule.reciprocal:
        scale = RANGE_BASELINE / rc
    else:
        scale = rc / RANGE_BASELINE
    return rule.min_pts_50m * (1.0 + rule.range_slope * (scale - 1.0))


def neighbors(index: int, detections, crit: NeighborhoodCriterion) -> set[int]:
    """Indices of the detections neighboring detections[index] (self
    excluded). Reference implementation used for small inputs and tests."""
    cols = detection_columns(detections)
    x, y, vr, t = cols["x"], cols["y"], cols["radial_velocity"], cols["time"]
    dx = x - x[index]
    dy = y - y[index]
    dvr = vr - vr[index]
    dt = np.abs(t - t[index])
    if crit.variant == BOX:
        ok = (np.abs(dx) < crit.eps_xy) & (np.abs(dy) < crit.eps_xy) & (np.abs(dvr) < crit.eps_vr)
    elif crit.variant == EUCLID_XY:
        ok = (dx * dx + dy * dy < crit.eps_xy**2) & (np.abs(dvr) < crit.eps_vr)
    else:
        q = dvr / crit.eps_vr_scale
        ok = (dx * dx + dy * dy) + q * q < crit.eps_xyvr**2
    ok &= dt < crit.eps_t
    ok[index] = False
    return set(np.nonzero(ok)[0].tolist())


def _nmin_array(r: np.ndarray, rule: CorePointRule) -> np.ndarray:
    nmin = np.asarray(n_min_at(r, rule), dtype=np.float64)
    if nmin.ndim == 0:
        nmin = np.full(len(r), float(nmin))
    return np.ascontiguousarray(nmin)


def cluster_window(
    detections,
    crit: NeighborhoodCriterion,
    rule: CorePointRule,
    window: tuple[float, float] | None = None,
    indices: np.ndarray | None = None,
) -> ClusterAssignment:
    """DBSCAN one window of detections. Labels are dense ids in order of
    first core-point discovery; unreachable points get NOISE."""
    cols = detection_columns(detections)
    code, eps_a, eps_b, eps_t = crit.kernel_args()
    labels = kernels.dbscan_labels(
        cols["x"], cols["y"], cols["radial_velocity"], cols["time"],
        _nmin_array(cols["r"], rule), rule.vr_min, code, eps_a, eps_b, eps_t,
    )
    if window is None:
        if len(detections):
            window = (float(cols["time"].min()), float(cols["time"].max()))
        else:
            window = (0.0, 0.0)
    return ClusterAssignment(labels=labels, window=window, indices=indices)


def window_spans(t_min: float, t_max: float, eps_t: float, hop: float) -> list[tuple[float, float]]:
    """Sliding windows of length eps_t advanced by hop over [t_min, t_max].

    Logs shorter than eps_t get a single window. When the span is not
    hop-divisible, a final window anchored at t_max is appended so the
    newest detections are always covered.
    """
    span = t_max - t_min
    if span <= eps_t:
        return [(t_min, t_min + eps_t)]
    count = int(math.floor((span - eps_t) / hop + 1e-9)) + 1
    out = [(t_min + k * hop, t_min + k * hop + eps_t) for k in range(count)]
    if out[-1][1] < t_max - 1e-12:
        out.append((t_max - eps_t, t_max))
    return out


def cluster_stream_columns(
    cols: dict[str, np.ndarray],
    crit: NeighborhoodCriterion,
    rule: CorePointRule,
    hop: float = 0.05,
    threads: int = 1,
) -> list[ClusterAssignment]:
    """Array-level cluster_stream: takes a columnar log (detection_columns
    output) and avoids per-window record conversion. Used directly by the
    optimizer, which runs thousands of windows per parameter evaluation."""
    if hop <= 0:
        raise ValueError("hop must be > 0")
    times = cols["time"]
    n = len(times)
    if n == 0:
        return []
    if np.any(np.diff(times) < 0):
        raise ValueError("detection log must be time-sorted")

    spans = window_spans(float(times[0]), float(times[-1]), crit.eps_t, hop)
    nmin = _nmin_array(cols["r"], rule)
    code, eps_a, eps_b, eps_t = crit.kernel_args()
    x, y, vr = cols["x"], cols["y"], cols["radial_velocity"]

    def run(span: tuple[float, float]) -> ClusterAssignment:
        lo = int(np.searchsorted(times, span[0], side="left"))
        hi = int(np.searchsorted(times, span[1], side="right"))
        labels = kernels.dbscan_labels(
            x[lo:hi], y[lo:hi], vr[lo:hi], times[lo:hi],
            nmin[lo:hi], rule.vr_min, code, eps_a, eps_b, eps_t,
        )
        return ClusterAssignment(labels=labels, window=span, indices=np.arange(lo, hi, dtype=np.int64))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, spans))
    return [run(s) for s in spans]


def cluster_stream(
    detections,
    crit: NeighborhoodCriterion,
    rule: CorePointRule,
    hop: float = 0.05,
    threads: int = 1,
) -> list[ClusterAssignment]:
    """Cluster a time-sorted log window by window.

    Each window [start, start + eps_t] is clustered independently (windows
    overlap when hop < eps_t); the result order equals window time order
    and is independent of the thread count.
    """
    return cluster_stream_columns(detection_columns(detections), crit, rule, hop=hop, threads=threads)


def flatten_assignments(n_detections: int, assignments: list[ClusterAssignment]) -> np.ndarray:
    """Per-detection labels over the whole log from per-window output.

    Each detection takes the cluster of the first window that assigned it
    a non-noise label; ids are renumbered densely in order of first
    appearance. Detections never clustered stay NOISE.
    """
    out = np.full(n_detections, kernels.NOISE, dtype=np.int64)
    remap: dict[tuple[int, int], int] = {}
    for w, a in enumerate(assignments):
        for idx, lab in zip(a.indices, a.labels):
            if lab < 0 or out[idx] != kernels.NOISE:
                continue
            key = (w, int(lab))
            if key not in remap:
                remap[key] = len(remap)
            out[idx] = remap[key]
    return out
