"""End-to-end pipeline: transform -> filter -> window clustering -> merge
-> scores, with per-stage timings and counts.

The default configuration is the best-performing combination found in the
reference evaluation: compensated frame, filtering at 0.10 m/s / 1.4 m,
combined xy-Doppler neighborhood with the range-adaptive core rule, and
center-continuation merging.
"""

from __future__ import annotations

import configparser
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import coords, score, stage1, stage2
from .filtering import FilterConfig, FilterTunerCriterion, removal_mask
from .stage1 import CorePointRule, NeighborhoodCriterion
from .stage2 import MergeConfig, VelocitySolverConfig
from .types import NOISE, ClusterAssignment, Detection, detection_columns


def default_criterion() -> NeighborhoodCriterion:
    return NeighborhoodCriterion.euclid_xyvr(1.04, 1.03, 0.25)


def default_core_rule() -> CorePointRule:
    return CorePointRule.adaptive_range(3.87, 0.99, vr_min=1.00)


def default_merge() -> MergeConfig:
    return MergeConfig(method=stage2.CONTINUATION, eps_dist=0.94, eps_speed=2.72)


@dataclass
class PipelineConfig:
    frame: str = coords.FCS
    compensate_doppler: bool = False
    filter_enabled: bool = True
    filter_cfg: FilterConfig = field(default_factory=FilterConfig)
    criterion: NeighborhoodCriterion = field(default_factory=default_criterion)
    core_rule: CorePointRule = field(default_factory=default_core_rule)
    merge: MergeConfig | None = field(default_factory=default_merge)
    hop: float = 0.05
    seed: int = 0
    threads: int = 1


@dataclass
class PipelineResult:
    transformed: list[Detection]
    target: np.ndarray | None
    kept_indices: np.ndarray
    assignments: list[ClusterAssignment]  # indices refer to the kept list
    stage1_labels: np.ndarray  # global, over all input rows
    merged_labels: np.ndarray | None  # global, None when merging disabled
    summaries: list | None
    scores: dict[str, float]
    window_scores: list[score.WindowScore]
    timings: dict[str, float]
    counts: dict[str, int]


def run_pipeline(
    cfg: PipelineConfig,
    detections: list[Detection],
    poses=None,
    mounts=None,
) -> PipelineResult:
    """Run the enabled stages in order on a time-sorted detection log."""
    timings: dict[str, float] = {}
    counts: dict[str, int] = {"detections_in": len(detections)}

    t0 = time.perf_counter()
    spec = coords.FrameSpec(mode=cfg.frame)
    work = coords.transform_log(detections, mounts, poses, spec)
    if cfg.compensate_doppler:
        if poses is None:
            raise ValueError("compensate_doppler requires an ego pose log")
        work = coords.compensate_doppler(work, mounts, poses)
    timings["transform"] = time.perf_counter() - t0

    cols = detection_columns(detections)
    has_gt = bool(np.any(cols["gt_label"] != NOISE))
    target = score.preclusters_from_ground_truth(detections) if has_gt else None

    t0 = time.perf_counter()
    if cfg.filter_enabled:
        rm = removal_mask(work, cfg.filter_cfg)
        kept_idx = np.nonzero(~rm)[0]
        timings["filter"] = time.perf_counter() - t0
    else:
        kept_idx = np.arange(len(work))
    kept = [work[i] for i in kept_idx]
    counts["detections_kept"] = len(kept)

    t0 = time.perf_counter()
    assignments = stage1.cluster_stream(kept, cfg.criterion, cfg.core_rule, hop=cfg.hop, threads=cfg.threads)
    # re-index window assignments onto the original log positions
    assignments = [
        ClusterAssignment(labels=a.labels, window=a.window, indices=kept_idx[a.indices]) for a in assignments
    ]
    timings["cluster"] = time.perf_counter() - t0
    counts["windows"] = len(assignments)
    counts["stage1_clusters"] = int(sum(a.n_clusters for a in assignments))

    stage1_labels = stage1.flatten_assignments(len(detections), assignments)

    merged_labels = None
    summaries = None
    if cfg.merge is not None:
        t0 = time.perf_counter()
        bearings = coords.detection_bearings(work, mounts, poses, spec)
        summaries = stage2.build_summaries(work, assignments, bearings=bearings, solver=cfg.merge.solver)
        groups = stage2.merge_summaries(summaries, cfg.merge)
        merged_labels = stage2.relabel_from_groups(len(detections), summaries, groups)
        timings["merge"] = time.perf_counter() - t0
        counts["stage2_clusters"] = (
            int(merged_labels.max()) + 1 if len(merged_labels) and merged_labels.max() >= 0 else 0
        )

    scores: dict[str, float] = {}
    window_scores: list[score.WindowScore] = []
    if target is not None:
        t0 = time.perf_counter()
        window_scores = score.score_windows(assignments, target)
        scores["stage1_v1_windowed"] = score.aggregate_v_measure(window_scores)
        scores["stage1_v1_global"] = score.v_measure(
            score.LabeledPartition(ground_truth=target, predicted=stage1_labels)
        )
        if merged_labels is not None:
            scores["stage2_v1_global"] = score.v_measure(
                score.LabeledPartition(ground_truth=target, predicted=merged_labels)
            )
        timings["score"] = time.perf_counter() - t0

    return PipelineResult(
        transformed=work,
        target=target,
        kept_indices=kept_idx,
        assignments=assignments,
        stage1_labels=stage1_labels,
        merged_labels=merged_labels,
        summaries=summaries,
        scores=scores,
        window_scores=window_scores,
        timings=timings,
        counts=counts,
    )


def retention_violations(
    detections: list[Detection],
    cfg: FilterConfig,
    crit: FilterTunerCriterion = FilterTunerCriterion(),
) -> int:
    """(object, frame) retention violations of one filter setting on a
    labeled log (same rule the tuner counts per grid cell)."""
    from .filtering import _count_violations

    cols = detection_columns(detections)
    rm = removal_mask(detections, cfg)
    return _count_violations(rm, cols["gt_label"], cols["time"], crit)


def emit_plotdata(result: PipelineResult, detections: list[Detection], out_dir) -> list[str]:
    """Per-stage (x, y, t, label) CSVs for external plotting: raw ground
    truth, pre-clustered target, first-stage labels, merged labels."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = detection_columns(result.transformed)
    stages: dict[str, np.ndarray] = {"raw": detection_columns(detections)["gt_label"]}
    if result.target is not None:
        stages["target"] = result.target
    stages["stage1"] = result.stage1_labels
    if result.merged_labels is not None:
        stages["stage2"] = result.merged_labels

    written = []
    for name, labels in stages.items():
        path = out / f"{name}.csv"
        with open(path, "w") as fh:
            fh.write("x,y,t,label\n")
            for x, y, t, lab in zip(cols["x"], cols["y"], cols["time"], labels):
                fh.write(f"{x!r},{y!r},{t!r},{int(lab)}\n")
        written.append(str(path))
    return written


# -- configuration file ------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path=None) -> PipelineConfig:
    """Read a key = value config file (sections: pipeline, filter, stage1,
    stage2); every missing key keeps its documented default."""
    cfg = PipelineConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)

    p = parser["pipeline"] if parser.has_section("pipeline") else {}
    frame = p.get("frame", cfg.frame).lower()
    if frame not in (coords.CCS, coords.FCS):
        raise ValueError(f"bad frame {frame!r}")
    merge_kind = p.get("merge", stage2.CONTINUATION if cfg.merge else "none").lower()

    f = parser["filter"] if parser.has_section("filter") else {}
    filter_cfg = FilterConfig(
        vr_thresh=float(f.get("vr_thresh", cfg.filter_cfg.vr_thresh)),
        d_xy=float(f.get("d_xy", cfg.filter_cfg.d_xy)),
        dt=float(f.get("dt", cfg.filter_cfg.dt)),
        literal_all_stages=_as_bool(f.get("literal_all_stages", "off")),
    )

    s1 = parser["stage1"] if parser.has_section("stage1") else {}
    variant = s1.get("criterion", cfg.criterion.variant).lower()
    eps_t = float(s1.get("eps_t", 0.25))
    if variant == stage1.EUCLID_XYVR:
        criterion = NeighborhoodCriterion.euclid_xyvr(
            float(s1.get("eps_xyvr", 1.04)), float(s1.get("eps_vr_scale", 1.03)), eps_t
        )
    elif variant == stage1.EUCLID_XY:
        criterion = NeighborhoodCriterion.euclid_xy(
            float(s1.get("eps_xy", 0.76)), float(s1.get("eps_vr", 14.1)), eps_t
        )
    elif variant == stage1.BOX:
        criterion = NeighborhoodCriterion.box(
            float(s1.get("eps_xy", 0.60)), float(s1.get("eps_vr", 12.3)), eps_t
        )
    else:
        raise ValueError(f"bad criterion {variant!r}")
    core = s1.get("core", "adaptive").lower()
    vr_min = float(s1.get("vr_min", 1.00))
    if core == "adaptive":
        core_rule = CorePointRule.adaptive_range(
            float(s1.get("min_pts_50m", 3.87)),
            float(s1.get("range_slope", 0.99)),
            vr_min=vr_min,
            reciprocal=_as_bool(s1.get("reciprocal", "off")),
        )
    elif core == "fixed":
        core_rule = CorePointRule.fixed(float(s1.get("min_pts", 3)), vr_min=vr_min)
    else:
        raise ValueError(f"bad core rule {core!r}")

    merge = None
    if merge_kind != "none":
        if merge_kind not in (stage2.VELOCITY, stage2.CONTINUATION):
            raise ValueError(f"bad merge method {merge_kind!r}")
        s2 = parser["stage2"] if parser.has_section("stage2") else {}
        merge = MergeConfig(
            method=merge_kind,
            eps_dist=float(s2.get("eps_dist", 0.94 if merge_kind == stage2.CONTINUATION else 1.00)),
            eps_orient=math.radians(float(s2.get("eps_orient_deg", 23.11))),
            eps_speed=float(s2.get("eps_speed", 2.72 if merge_kind == stage2.CONTINUATION else 1.04)),
            eps_t_merge=float(s2.get("eps_t_merge", 0.35)),
            min_pts=int(s2.get("min_pts", 1)),
            solver=VelocitySolverConfig(
                min_inliers=int(s2.get("min_inliers", 3)),
                inlier_threshold=float(s2.get("inlier_threshold", 0.5)),
                max_rounds=int(s2.get("max_rounds", 5)),
            ),
        )

    return PipelineConfig(
        frame=frame,
        compensate_doppler=_as_bool(p.get("compensate_doppler", "off")),
        filter_enabled=_as_bool(p.get("filter", "on")),
        filter_cfg=filter_cfg,
        criterion=criterion,
        core_rule=core_rule,
        merge=merge,
        hop=float(p.get("hop", cfg.hop)),
        seed=int(p.get("seed", cfg.seed)),
        threads=int(p.get("threads", cfg.threads)),
    )
