"""Second clustering stage: merge window-level clusters into object-level
clusters.

Each first-stage cluster is summarized (members, per-time-step centers,
an estimated full velocity vector, and a short-horizon center prediction).
A second DBSCAN then runs over the summaries with one of two neighborhood
predicates:

* velocity: closest-member distance, velocity orientation difference and
  speed difference, all within their thresholds;
* continuation: distance between predicted centers (sampled at the start,
  middle and end of the association frame) and predicted speed difference.

Either way the time gap between the two clusters' spans must stay below
the association window. Only points that carried a cluster label take
part; first-stage noise stays noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .types import ClusterAssignment, detection_columns

NOISE = -1

VELOCITY = "velocity"
CONTINUATION = "continuation"

RESAMPLE_STEP = 0.01  # trajectory resampling period, seconds
_TIME_QUANTUM = 1e-6  # member times are grouped into steps at this resolution


@dataclass(frozen=True)
class VelocitySolverConfig:
    """Robust least-squares settings for the full-velocity estimate."""

    min_inliers: int = 3
    inlier_threshold: float = 0.5
    max_rounds: int = 5

    def __post_init__(self):
        if self.min_inliers < 2:
            raise ValueError("min_inliers must be >= 2")
        if self.inlier_threshold <= 0 or self.max_rounds < 1:
            raise ValueError("bad solver settings")


@dataclass(frozen=True)
class MergeConfig:
    method: str = CONTINUATION
    eps_dist: float = 0.94
    eps_orient: float = math.radians(23.11)  # velocity method only
    eps_speed: float = 2.72
    eps_t_merge: float = 0.35
    min_pts: int = 1
    solver: VelocitySolverConfig = field(default_factory=VelocitySolverConfig)

    def __post_init__(self):
        if self.method not in (VELOCITY, CONTINUATION):
            raise ValueError(f"unknown merge method {self.method!r}")
        if min(self.eps_dist, self.eps_orient, self.eps_speed, self.eps_t_merge) <= 0:
            raise ValueError("all merge epsilons must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass
class ClusterSummary:
    """Aggregate view of one first-stage cluster."""

    source: tuple[int, int]  # (window position, window-local label)
    member_indices: np.ndarray
    xy: np.ndarray  # (n, 2) member positions
    vr: np.ndarray
    times: np.ndarray
    bearings: np.ndarray
    step_times: np.ndarray  # unique member time steps
    centers: np.ndarray  # (k, 2) mean position per step
    velocity: tuple[float, float] | None = None  # None = no valid estimate
    inlier_count: int = 0
    traj_center: np.ndarray | None = None  # trajectory endpoint (smoothed)
    traj_velocity: np.ndarray | None = None  # gradient at the endpoint

    @property
    def t_first(self) -> float:
        return float(self.times.min())

    @property
    def t_last(self) -> float:
        return float(self.times.max())

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.traj_velocity))


def _lstsq_velocity(bearings, vr):
    """One bounded-error solve; None on degenerate ray geometry."""
    # doubled-angle resultant: 1.0 iff all rays are parallel (mod pi)
    resultant = np.hypot(np.cos(2 * bearings).mean(), np.sin(2 * bearings).mean())
    if resultant > 1.0 - 1e-12:
        return None
    a = np.column_stack([np.cos(bearings), np.sin(bearings)])
    sol, _, rank, sv = np.linalg.lstsq(a, vr, rcond=None)
    if rank < 2 or sv[-1] / sv[0] < 1e-6:
        return None
    return sol


def estimate_velocity(bearings, vr, solver: VelocitySolverConfig = VelocitySolverConfig()):
    """Full (vx, vy) of a rigid object from member radial velocities.

    Solves vr_j = vx cos(b_j) + vy sin(b_j) by least squares, then
    iterates: refit on the members whose residual is within the inlier
    threshold of the current fit (membership is re-evaluated against every
    new fit, so points rejected by an early contaminated fit can return).
    Returns (vx, vy, inlier_count) or None when fewer than min_inliers
    survive or the bearing geometry is degenerate (all rays parallel
    within ~1e-6 rad).
    """
    bearings = np.asarray(bearings, dtype=np.float64)
    vr = np.asarray(vr, dtype=np.float64)
    n = len(bearings)
    if n < max(solver.min_inliers, 2):
        return None
    active = np.arange(n)
    sol = None
    for _ in range(solver.max_rounds):
        sol = _lstsq_velocity(bearings[active], vr[active])
        if sol is None:
            return None
        residuals = np.abs(np.cos(bearings) * sol[0] + np.sin(bearings) * sol[1] - vr)
        keep = np.nonzero(residuals <= solver.inlier_threshold)[0]
        if len(keep) < 2:  # not enough points left to fit through
            return None
        if np.array_equal(keep, active):
            break
        active = keep
    else:
        sol = _lstsq_velocity(bearings[active], vr[active])
        if sol is None:
            return None
    if len(active) < solver.min_inliers:
        return None
    return float(sol[0]), float(sol[1]), len(active)


def _smooth_centers(centers: np.ndarray) -> np.ndarray:
    """Centered moving average, window 3, shrinking symmetrically at the
    edges (end points keep their raw value, so straight uniform motion
    stays exactly straight)."""
    k = len(centers)
    out = np.empty_like(centers)
    for i in range(k):
        w = min(i, k - 1 - i, 1)
        out[i] = centers[i - w : i + w + 1].mean(axis=0)
    return out


def fit_trajectory(step_times: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(endpoint, velocity) of the smoothed center trajectory.

    Smoothed centers are interpolated with a cubic spline (>= 4 support
    points), linearly (>= 2), or held constant (1); the interpolant is
    resampled on a fine grid and the gradient at the newest sample is the
    velocity. Degenerate inputs yield zero velocity.
    """
    k = len(step_times)
    if k == 0:
        raise ValueError("no centers")
    sm = _smooth_centers(centers)
    if k == 1:
        return sm[0].copy(), np.zeros(2)
    t0, t1 = float(step_times[0]), float(step_times[-1])
    tt = np.linspace(t0, t1, max(2, int(round((t1 - t0) / RESAMPLE_STEP)) + 1))
    if k >= 4:
        spline = CubicSpline(step_times, sm, axis=0)
        path = spline(tt)
    else:
        path = np.column_stack([np.interp(tt, step_times, sm[:, 0]), np.interp(tt, step_times, sm[:, 1])])
    grad = np.gradient(path, tt, axis=0)
    return path[-1].copy(), grad[-1].copy()


def predict_centers(summary: ClusterSummary, at_times) -> tuple[np.ndarray, float]:
    """Constant-velocity continuation of the cluster center.

    Returns the predicted (x, y) at each requested time plus the predicted
    speed. Single-step clusters predict their static center with speed 0.
    """
    at_times = np.atleast_1d(np.asarray(at_times, dtype=np.float64))
    t_ref = float(summary.step_times[-1])
    offs = (at_times - t_ref)[:, None] * summary.traj_velocity[None, :]
    return summary.traj_center[None, :] + offs, summary.speed


def build_summaries(
    detections,
    assignments: list[ClusterAssignment],
    bearings: np.ndarray | None = None,
    solver: VelocitySolverConfig = VelocitySolverConfig(),
) -> list[ClusterSummary]:
    """One summary per (window, cluster) of the first-stage output.

    ``bearings`` are per-detection sensor-to-detection ray angles in the
    active frame (coords.detection_bearings); without them the rays are
    taken from the frame origin, which is only right for a single
    origin-mounted sensor.
    """
    cols = detection_columns(detections)
    if bearings is None:
        bearings = np.arctan2(cols["y"], cols["x"])
    bearings = np.asarray(bearings, dtype=np.float64)

    out: list[ClusterSummary] = []
    for w, a in enumerate(assignments):
        if len(a.labels) == 0:
            continue
        top = int(a.labels.max())
        for lab in range(top + 1):
            idx = a.indices[a.labels == lab]
            if len(idx) == 0:
                continue
            xy = np.column_stack([cols["x"][idx], cols["y"][idx]])
            times = cols["time"][idx]
            steps = np.unique(np.round(times / _TIME_QUANTUM).astype(np.int64))
            step_times = steps * _TIME_QUANTUM
            centers = np.empty((len(steps), 2))
            keys = np.round(times / _TIME_QUANTUM).astype(np.int64)
            for si, s in enumerate(steps):
                centers[si] = xy[keys == s].mean(axis=0)
            summary = ClusterSummary(
                source=(w, lab),
                member_indices=idx,
                xy=xy,
                vr=cols["radial_velocity"][idx],
                times=times,
                bearings=bearings[idx],
                step_times=step_times,
                centers=centers,
            )
            est = estimate_velocity(summary.bearings, summary.vr, solver)
            if est is not None:
                summary.velocity = (est[0], est[1])
                summary.inlier_count = est[2]
            summary.traj_center, summary.traj_velocity = fit_trajectory(step_times, centers)
            out.append(summary)
    return out


def _span_gap(a: ClusterSummary, b: ClusterSummary) -> float:
    return max(b.t_first - a.t_last, a.t_first - b.t_last, 0.0)


def _pair_frame(a: ClusterSummary, b: ClusterSummary, eps_t: float) -> tuple[float, float]:
    """Association frame of length eps_t centered between the two spans."""
    mid = 0.5 * (min(a.t_last, b.t_last) + max(a.t_first, b.t_first))
    return mid - 0.5 * eps_t, mid + 0.5 * eps_t


def _min_member_distance(a: ClusterSummary, b: ClusterSummary, frame: tuple[float, float]) -> float:
    ma = (a.times >= frame[0]) & (a.times <= frame[1])
    mb = (b.times >= frame[0]) & (b.times <= frame[1])
    if not (np.any(ma) and np.any(mb)):
        return math.inf
    pa, pb = a.xy[ma], b.xy[mb]
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
    return math.sqrt(float(d2.min()))


def summaries_mergeable(a: ClusterSummary, b: ClusterSummary, cfg: MergeConfig) -> bool:
    """Neighbor predicate of the second-stage DBSCAN (strict inequalities)."""
    if _span_gap(a, b) >= cfg.eps_t_merge:
        return False
    frame = _pair_frame(a, b, cfg.eps_t_merge)
    if cfg.method == VELOCITY:
        if a.velocity is None or b.velocity is None:
            return False
        dphi = abs(math.atan2(a.velocity[1], a.velocity[0]) - math.atan2(b.velocity[1], b.velocity[0]))
        dphi = min(dphi, 2 * math.pi - dphi)
        if dphi >= cfg.eps_orient:
            return False
        if abs(math.hypot(*a.velocity) - math.hypot(*b.velocity)) >= cfg.eps_speed:
            return False
        return _min_member_distance(a, b, frame) < cfg.eps_dist
    # continuation
    if abs(a.speed - b.speed) >= cfg.eps_speed:
        return False
    samples = np.array([frame[0], 0.5 * (frame[0] + frame[1]), frame[1]])
    pa, _ = predict_centers(a, samples)
    pb, _ = predict_centers(b, samples)
    d = float(np.sqrt(((pa - pb) ** 2).sum(axis=1)).min())
    return d < cfg.eps_dist


def merge_summaries(summaries: list[ClusterSummary], cfg: MergeConfig) -> np.ndarray:
    """Merged group id per summary (dense, deterministic).

    DBSCAN over summaries: with min_pts=1 this is exactly the connected
    components of the mergeable relation; summaries left as density noise
    keep their own singleton group.
    """
    n = len(summaries)
    adj: list[list[int]] = [[] for _ in range(n)]
    order = sorted(range(n), key=lambda i: summaries[i].t_first)
    for oi in range(n):
        i = order[oi]
        for oj in range(oi + 1, n):
            j = order[oj]
            if summaries[j].t_first - summaries[i].t_last >= cfg.eps_t_merge:
                break
            if summaries_mergeable(summaries[i], summaries[j], cfg):
                adj[i].append(j)
                adj[j].append(i)

    groups = np.full(n, -2, dtype=np.int64)  # -2 unvisited, -1 density noise
    gid = 0
    for i in range(n):
        if groups[i] != -2:
            continue
        if len(adj[i]) < cfg.min_pts:
            groups[i] = -1
            continue
        groups[i] = gid
        stack = []
        for j in adj[i]:
            if groups[j] in (-1, -2):
                groups[j] = gid
                if len(adj[j]) >= cfg.min_pts:
                    stack.append(j)
        while stack:
            j = stack.pop()
            for q in adj[j]:
                if groups[q] in (-1, -2):
                    groups[q] = gid
                    if len(adj[q]) >= cfg.min_pts:
                        stack.append(q)
        gid += 1
    for i in range(n):
        if groups[i] == -1:
            groups[i] = gid
            gid += 1
    return groups


def relabel_from_groups(n_detections: int, summaries: list[ClusterSummary], groups: np.ndarray) -> np.ndarray:
    """Per-detection merged labels (dense ids in order of first claim).

    A detection in several summaries takes the group of its earliest one;
    detections never clustered in stage 1 stay NOISE.
    """
    labels = np.full(n_detections, NOISE, dtype=np.int64)
    remap: dict[int, int] = {}
    for s, g in zip(summaries, groups):
        unclaimed = s.member_indices[labels[s.member_indices] == NOISE]
        if len(unclaimed) == 0:
            continue
        gg = int(g)
        if gg not in remap:
            remap[gg] = len(remap)
        labels[unclaimed] = remap[gg]
    return labels


def merge_clusters(
    detections,
    assignments: list[ClusterAssignment],
    cfg: MergeConfig,
    bearings: np.ndarray | None = None,
) -> tuple[ClusterAssignment, list[ClusterSummary], np.ndarray]:
    """Merge first-stage clusters and relabel their member detections.

    Returns (whole-log assignment, summaries, per-summary group ids).
    """
    summaries = build_summaries(detections, assignments, bearings=bearings, solver=cfg.solver)
    groups = merge_summaries(summaries, cfg)
    labels = relabel_from_groups(len(detections), summaries, groups)
    if len(detections):
        cols_t = detection_columns(detections)["time"]
        window = (float(cols_t.min()), float(cols_t.max()))
    else:
        window = (0.0, 0.0)
    merged = ClusterAssignment(labels=labels, window=window)
    return merged, summaries, groups
