"""Named pipeline experiments and their parameter presets.

Thirteen configurations cover the method matrix: box / Euclidean-xy /
combined xy-Doppler neighborhoods, fixed vs range-adaptive minimum
points, vehicle vs compensated frame, filtering on/off, and the two
merge methods. Presets #1..#11 are first-stage settings; #12/#13 run a
merge method on top of the #8 first stage. Each experiment can run with
its preset parameters or re-optimize them on the given data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import coords, score, stage1, stage2
from .filtering import FilterConfig, removal_mask
from .optimize import OptimizeBudget, OptimizeResult, optimize
from .stage1 import CorePointRule, NeighborhoodCriterion
from .stage2 import MergeConfig
from .types import NOISE, ParamSpace, detection_columns


@dataclass(frozen=True)
class ExperimentSpec:
    exp_id: int
    name: str
    frame: str  # coords.CCS or coords.FCS
    filtered: bool
    criterion: str  # stage1 variant, None for merge-only rows
    core: str  # "fixed" | "adaptive"
    params: dict[str, float]
    merge_method: str | None = None
    base_stage1: int | None = None  # merge rows build on this experiment


def _spec(exp_id, name, frame, filtered, criterion, core, params, merge_method=None, base_stage1=None):
    return ExperimentSpec(exp_id, name, frame, filtered, criterion, core, dict(params), merge_method, base_stage1)


EXPERIMENTS: dict[int, ExperimentSpec] = {
    e.exp_id: e
    for e in [
        _spec(1, "expert_setting", coords.CCS, True, stage1.BOX, "fixed",
              {"eps_xy": 1.00, "eps_vr": 5.00, "min_pts": 3, "vr_min": 0.40}),
        _spec(2, "optimized_box_ccs", coords.CCS, True, stage1.BOX, "fixed",
              {"eps_xy": 0.62, "eps_vr": 11.2, "min_pts": 3, "vr_min": 0.23}),
        _spec(3, "optimized_box_fcs", coords.FCS, True, stage1.BOX, "fixed",
              {"eps_xy": 0.60, "eps_vr": 12.3, "min_pts": 3, "vr_min": 0.25}),
        _spec(4, "optimized_box_fcs_unfiltered", coords.FCS, False, stage1.BOX, "fixed",
              {"eps_xy": 0.60, "eps_vr": 12.3, "min_pts": 3, "vr_min": 0.25}),
        _spec(5, "euclid_xy", coords.FCS, True, stage1.EUCLID_XY, "fixed",
              {"eps_xy": 0.76, "eps_vr": 14.1, "min_pts": 3, "vr_min": 0.31}),
        _spec(6, "euclid_xyvr", coords.FCS, True, stage1.EUCLID_XYVR, "fixed",
              {"eps_xyvr": 0.72, "eps_vr_scale": 13.5, "min_pts": 3, "vr_min": 0.48}),
        _spec(7, "adaptive_min_pts", coords.FCS, True, stage1.BOX, "adaptive",
              {"eps_xy": 0.76, "eps_vr": 8.63, "min_pts_50m": 3.02, "vr_min": 0.46, "range_slope": 0.99}),
        _spec(8, "combined_adaptive_xyvr", coords.FCS, True, stage1.EUCLID_XYVR, "adaptive",
              {"eps_xyvr": 1.04, "eps_vr_scale": 1.03, "min_pts_50m": 3.87, "vr_min": 1.00, "range_slope": 0.99}),
        _spec(9, "combined_unfiltered", coords.FCS, False, stage1.EUCLID_XYVR, "adaptive",
              {"eps_xyvr": 1.18, "eps_vr_scale": 1.01, "min_pts_50m": 3.81, "vr_min": 0.98, "range_slope": 0.99}),
        _spec(10, "best_setting_unfiltered", coords.FCS, False, stage1.EUCLID_XYVR, "adaptive",
              {"eps_xyvr": 1.04, "eps_vr_scale": 1.03, "min_pts_50m": 3.87, "vr_min": 1.00, "range_slope": 0.99}),
        _spec(11, "best_setting_on_box", coords.FCS, True, stage1.BOX, "fixed",
              {"eps_xy": 1.04, "eps_vr": 1.03, "min_pts": 4, "vr_min": 1.00}),
        _spec(12, "merge_velocity_estimate", coords.FCS, True, stage1.EUCLID_XYVR, "adaptive",
              {"eps_dist": 1.00, "eps_orient_deg": 23.11, "eps_speed": 1.04, "merge_min_pts": 1, "eps_t_merge": 0.35},
              merge_method=stage2.VELOCITY, base_stage1=8),
        _spec(13, "merge_center_continuation", coords.FCS, True, stage1.EUCLID_XYVR, "adaptive",
              {"eps_dist": 0.94, "eps_speed": 2.72, "merge_min_pts": 1, "eps_t_merge": 0.35},
              merge_method=stage2.CONTINUATION, base_stage1=8),
    ]
}

DEFAULT_FILTER = FilterConfig(vr_thresh=0.10, d_xy=1.4)
DEFAULT_HOP = 0.05


def criterion_from_params(variant: str, params: dict[str, float], eps_t: float = 0.25) -> NeighborhoodCriterion:
    if variant == stage1.EUCLID_XYVR:
        return NeighborhoodCriterion.euclid_xyvr(params["eps_xyvr"], params["eps_vr_scale"], eps_t)
    if variant == stage1.EUCLID_XY:
        return NeighborhoodCriterion.euclid_xy(params["eps_xy"], params["eps_vr"], eps_t)
    return NeighborhoodCriterion.box(params["eps_xy"], params["eps_vr"], eps_t)


def core_rule_from_params(core: str, params: dict[str, float]) -> CorePointRule:
    if core == "adaptive":
        return CorePointRule.adaptive_range(
            params["min_pts_50m"], params["range_slope"], vr_min=params["vr_min"]
        )
    return CorePointRule.fixed(params["min_pts"], vr_min=params["vr_min"])


def merge_config_from_params(method: str, params: dict[str, float]) -> MergeConfig:
    eps_orient = math.radians(params.get("eps_orient_deg", 23.11))
    return MergeConfig(
        method=method,
        eps_dist=params["eps_dist"],
        eps_orient=eps_orient,
        eps_speed=params["eps_speed"],
        eps_t_merge=params.get("eps_t_merge", 0.35),
        min_pts=int(params.get("merge_min_pts", 1)),
    )


def default_space(exp: ExperimentSpec) -> ParamSpace:
    """Search box per experiment: preset value +/- 50 %, except the
    adaptive range slope which spans [0, 1.5] so the family includes the
    fixed rule as its slope-0 member."""
    bounds = {}
    integral = set()
    for name, value in exp.params.items():
        if name == "range_slope":
            bounds[name] = (0.0, 1.5)
        elif name in ("merge_min_pts",):
            bounds[name] = (1, 3)
            integral.add(name)
        elif name == "min_pts":
            bounds[name] = (max(1.0, round(value * 0.5)), round(value * 1.5))
            integral.add(name)
        elif name == "eps_t_merge":
            continue  # held fixed, like the stage-1 time window
        else:
            bounds[name] = (value * 0.5, value * 1.5)
    return ParamSpace(bounds=bounds, integral=frozenset(integral))


@dataclass
class Stage1Context:
    """Shared per-dataset state so an optimizer evaluation only reruns the
    clustering and the scoring."""

    kept_detections: list
    kept_columns: dict
    kept_target: np.ndarray
    target: np.ndarray
    kept_indices: np.ndarray
    n_total: int
    hop: float = DEFAULT_HOP

    def assignments(self, crit: NeighborhoodCriterion, rule: CorePointRule, threads: int = 1):
        return stage1.cluster_stream_columns(self.kept_columns, crit, rule, hop=self.hop, threads=threads)

    def windowed_v1(self, assignments) -> float:
        return score.aggregate_v_measure(score.score_windows(assignments, self.kept_target))

    def global_labels(self, assignments) -> np.ndarray:
        flat = stage1.flatten_assignments(len(self.kept_detections), assignments)
        out = np.full(self.n_total, NOISE, dtype=np.int64)
        out[self.kept_indices] = flat
        return out

    def global_v1(self, labels: np.ndarray) -> float:
        return score.v_measure(score.LabeledPartition(ground_truth=self.target, predicted=labels))


def prepare_stage1(
    detections,
    poses=None,
    mounts=None,
    frame: str = coords.FCS,
    filtered: bool = True,
    filter_cfg: FilterConfig = DEFAULT_FILTER,
    hop: float = DEFAULT_HOP,
) -> Stage1Context:
    """Transform, filter, and pre-cluster the annotations once."""
    spec = coords.FrameSpec(mode=frame)
    work = coords.transform_log(detections, mounts, poses, spec)
    target = score.preclusters_from_ground_truth(detections)
    if filtered:
        rm = removal_mask(work, filter_cfg)
        kept_idx = np.nonzero(~rm)[0]
    else:
        kept_idx = np.arange(len(work))
    kept = [work[i] for i in kept_idx]
    return Stage1Context(
        kept_detections=kept,
        kept_columns=detection_columns(kept),
        kept_target=target[kept_idx],
        target=target,
        kept_indices=kept_idx,
        n_total=len(detections),
        hop=hop,
    )


def stage1_objective(ctx: Stage1Context, exp: ExperimentSpec):
    def evaluate(params: dict[str, float]) -> float:
        crit = criterion_from_params(exp.criterion, params)
        rule = core_rule_from_params(exp.core, params)
        return ctx.windowed_v1(ctx.assignments(crit, rule))

    return evaluate


def stage2_objective(ctx: Stage1Context, exp: ExperimentSpec, summaries):
    n_kept = len(ctx.kept_detections)

    def evaluate(params: dict[str, float]) -> float:
        cfg = merge_config_from_params(exp.merge_method, params)
        groups = stage2.merge_summaries(summaries, cfg)
        labels = np.full(ctx.n_total, NOISE, dtype=np.int64)
        labels[ctx.kept_indices] = stage2.relabel_from_groups(n_kept, summaries, groups)
        return ctx.global_v1(labels)

    return evaluate


@dataclass
class ExperimentReport:
    exp_id: int
    name: str
    frame: str
    filtered: bool
    components: str
    v1_windowed: float
    v1_global: float
    params: dict[str, float]
    n_clusters: int
    optimized: bool = False
    trace: OptimizeResult | None = None


def _components(exp: ExperimentSpec) -> str:
    parts = []
    if exp.filtered:
        parts.append("filter")
    parts.append(exp.criterion)
    if exp.core == "adaptive":
        parts.append("adaptive_min_pts")
    if exp.merge_method:
        parts.append(f"merge_{exp.merge_method}")
    return "+".join(parts)


def run_experiment(
    exp_id: int,
    detections,
    poses=None,
    mounts=None,
    optimize_params: bool = False,
    budget: OptimizeBudget = OptimizeBudget(),
    hop: float = DEFAULT_HOP,
    threads: int = 1,
) -> ExperimentReport:
    """Run one numbered experiment on a labeled log.

    With optimize_params=True the experiment's parameter box is searched
    first (first-stage score for #1..#11, whole-log score for #12/#13);
    otherwise the preset parameters are used as-is.
    """
    if exp_id not in EXPERIMENTS:
        raise ValueError(f"unknown experiment id {exp_id}; valid: 1..13")
    exp = EXPERIMENTS[exp_id]
    stage1_exp = EXPERIMENTS[exp.base_stage1] if exp.base_stage1 else exp
    ctx = prepare_stage1(
        detections, poses, mounts, frame=exp.frame, filtered=exp.filtered, hop=hop
    )

    trace = None
    params = dict(exp.params)
    s1_params = dict(stage1_exp.params)

    if exp.merge_method is None and optimize_params:
        result = optimize(default_space(exp), stage1_objective(ctx, exp), budget)
        params = result.best_params
        s1_params = params
        trace = result

    crit = criterion_from_params(stage1_exp.criterion, s1_params)
    rule = core_rule_from_params(stage1_exp.core, s1_params)
    assignments = ctx.assignments(crit, rule, threads=threads)
    v1_windowed = ctx.windowed_v1(assignments)
    labels = ctx.global_labels(assignments)
    n_clusters = int(sum(a.n_clusters for a in assignments))

    if exp.merge_method is not None:
        spec = coords.FrameSpec(mode=exp.frame)
        bearings = coords.detection_bearings(ctx.kept_detections, mounts, poses, spec)
        summaries = stage2.build_summaries(ctx.kept_detections, assignments, bearings=bearings)
        if optimize_params:
            result = optimize(default_space(exp), stage2_objective(ctx, exp, summaries), budget)
            params = result.best_params
            trace = result
        cfg = merge_config_from_params(exp.merge_method, params)
        groups = stage2.merge_summaries(summaries, cfg)
        merged = stage2.relabel_from_groups(len(ctx.kept_detections), summaries, groups)
        labels = np.full(ctx.n_total, NOISE, dtype=np.int64)
        labels[ctx.kept_indices] = merged
        n_clusters = int(merged.max()) + 1 if len(merged) and merged.max() >= 0 else 0

    v1_global = ctx.global_v1(labels)
    return ExperimentReport(
        exp_id=exp.exp_id,
        name=exp.name,
        frame=exp.frame,
        filtered=exp.filtered,
        components=_components(exp),
        v1_windowed=v1_windowed,
        v1_global=v1_global,
        params=params,
        n_clusters=n_clusters,
        optimized=optimize_params,
        trace=trace,
    )
