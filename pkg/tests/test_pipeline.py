import numpy as np
import pytest

from radarseg import coords
from radarseg.experiments import EXPERIMENTS, default_space, run_experiment
from radarseg.filtering import FilterConfig
from radarseg.optimize import OptimizeBudget
from radarseg.pipeline import PipelineConfig, emit_plotdata, load_config, run_pipeline
from radarseg.stage1 import CorePointRule, NeighborhoodCriterion


@pytest.fixture(scope="module")
def small_scene(scene_logs):
    return scene_logs["crossing_pedestrian"]


def walker_config(**kw):
    base = dict(
        frame=coords.FCS,
        criterion=NeighborhoodCriterion.euclid_xy(1.0, 5.0),
        core_rule=CorePointRule.fixed(3, vr_min=0.1),
        filter_cfg=FilterConfig(vr_thresh=0.10, d_xy=1.4),
        merge=None,
    )
    base.update(kw)
    return PipelineConfig(**base)


class TestRunPipeline:
    def test_stage_timings_match_enabled_stages(self, small_scene):
        dets, poses, mounts = small_scene
        res = run_pipeline(walker_config(), dets, poses, mounts)
        assert set(res.timings) == {"transform", "filter", "cluster", "score"}
        res2 = run_pipeline(walker_config(filter_enabled=False), dets, poses, mounts)
        assert "filter" not in res2.timings
        res3 = run_pipeline(PipelineConfig(), dets, poses, mounts)
        assert set(res3.timings) == {"transform", "filter", "cluster", "merge", "score"}

    def test_merge_none_equals_stage1(self, small_scene):
        dets, poses, mounts = small_scene
        res = run_pipeline(walker_config(), dets, poses, mounts)
        assert res.merged_labels is None
        assert res.summaries is None
        assert "stage2_v1_global" not in res.scores

    def test_window_indices_reference_original_log(self, small_scene):
        dets, poses, mounts = small_scene
        res = run_pipeline(walker_config(), dets, poses, mounts)
        top = max(int(a.indices.max()) for a in res.assignments if len(a.indices))
        assert top < len(dets)
        kept = set(res.kept_indices.tolist())
        for a in res.assignments:
            assert set(a.indices.tolist()) <= kept

    def test_scores_present_with_labels(self, small_scene):
        dets, poses, mounts = small_scene
        res = run_pipeline(walker_config(), dets, poses, mounts)
        assert 0.0 <= res.scores["stage1_v1_windowed"] <= 1.0
        assert 0.0 <= res.scores["stage1_v1_global"] <= 1.0

    def test_deterministic_across_runs_and_threads(self, small_scene):
        dets, poses, mounts = small_scene
        a = run_pipeline(walker_config(), dets, poses, mounts)
        b = run_pipeline(walker_config(threads=4), dets, poses, mounts)
        assert np.array_equal(a.stage1_labels, b.stage1_labels)
        assert a.scores == b.scores


class TestEmitPlotdata:
    def test_stage_files(self, small_scene, tmp_path):
        dets, poses, mounts = small_scene
        res = run_pipeline(PipelineConfig(), dets, poses, mounts)
        files = emit_plotdata(res, dets, tmp_path)
        names = {f.rsplit("/", 1)[-1] for f in files}
        assert names == {"raw.csv", "target.csv", "stage1.csv", "stage2.csv"}
        for f in files:
            lines = open(f).read().splitlines()
            assert lines[0] == "x,y,t,label"
            assert len(lines) == len(dets) + 1

    def test_empty_log(self, tmp_path):
        res = run_pipeline(walker_config(), [], None, None)
        files = emit_plotdata(res, [], tmp_path)
        for f in files:
            assert open(f).read() == "x,y,t,label\n"


class TestConfigFile:
    def test_defaults_match_documented_values(self):
        cfg = PipelineConfig()
        assert cfg.frame == coords.FCS
        assert cfg.filter_cfg.vr_thresh == 0.10 and cfg.filter_cfg.d_xy == 1.4
        assert cfg.criterion.variant == "euclid_xyvr"
        assert (cfg.criterion.eps_xyvr, cfg.criterion.eps_vr_scale) == (1.04, 1.03)
        assert cfg.core_rule.min_pts_50m == 3.87 and cfg.core_rule.range_slope == 0.99
        assert cfg.core_rule.vr_min == 1.00
        assert cfg.merge.method == "continuation"
        assert (cfg.merge.eps_dist, cfg.merge.eps_speed, cfg.merge.eps_t_merge) == (0.94, 2.72, 0.35)

    def test_load_round_trip(self, tmp_path):
        text = """
[pipeline]
frame = ccs
filter = off
merge = velocity
hop = 0.1
threads = 2
seed = 9

[stage1]
criterion = box
eps_xy = 0.6
eps_vr = 12.3
core = fixed
min_pts = 3
vr_min = 0.25

[stage2]
eps_dist = 1.0
eps_orient_deg = 23.11
eps_speed = 1.04
"""
        p = tmp_path / "cfg.ini"
        p.write_text(text)
        cfg = load_config(p)
        assert cfg.frame == coords.CCS
        assert not cfg.filter_enabled
        assert cfg.criterion.variant == "box" and cfg.criterion.eps_xy == 0.6
        assert cfg.core_rule.min_pts == 3
        assert cfg.merge.method == "velocity" and cfg.merge.eps_speed == 1.04
        assert (cfg.hop, cfg.threads, cfg.seed) == (0.1, 2, 9)

    def test_bad_values_rejected(self, tmp_path):
        p = tmp_path / "cfg.ini"
        p.write_text("[pipeline]\nframe = marsframe\n")
        with pytest.raises(ValueError):
            load_config(p)


class TestExperiments:
    def test_roster_structure(self):
        assert sorted(EXPERIMENTS) == list(range(1, 14))
        e1 = EXPERIMENTS[1]
        assert e1.params == {"eps_xy": 1.00, "eps_vr": 5.00, "min_pts": 3, "vr_min": 0.40}
        assert (e1.frame, e1.filtered, e1.criterion, e1.core) == (coords.CCS, True, "box", "fixed")
        e8 = EXPERIMENTS[8]
        assert e8.criterion == "euclid_xyvr" and e8.core == "adaptive" and e8.filtered
        assert e8.params["min_pts_50m"] == 3.87
        e13 = EXPERIMENTS[13]
        assert e13.merge_method == "continuation" and e13.base_stage1 == 8
        assert EXPERIMENTS[12].merge_method == "velocity"
        assert not EXPERIMENTS[4].filtered and not EXPERIMENTS[9].filtered and not EXPERIMENTS[10].filtered

    def test_unknown_id(self, small_scene):
        dets, poses, mounts = small_scene
        with pytest.raises(ValueError):
            run_experiment(99, dets, poses, mounts)

    def test_fixed_param_run_produces_report(self, small_scene):
        dets, poses, mounts = small_scene
        rep = run_experiment(5, dets, poses, mounts)
        assert rep.name == "euclid_xy"
        assert 0.0 <= rep.v1_windowed <= 1.0
        assert 0.0 <= rep.v1_global <= 1.0
        assert rep.params == EXPERIMENTS[5].params
        assert not rep.optimized

    def test_merge_experiment_runs(self, small_scene):
        dets, poses, mounts = small_scene
        rep = run_experiment(13, dets, poses, mounts)
        assert rep.components.endswith("merge_continuation")
        assert rep.n_clusters >= 0

    def test_default_space_boxes(self):
        sp = default_space(EXPERIMENTS[7])
        assert sp.bounds["range_slope"] == (0.0, 1.5)
        lo, hi = sp.bounds["eps_xy"]
        assert (lo, hi) == pytest.approx((0.38, 1.14))
        assert "min_pts" not in sp.integral  # adaptive row has no integer axis
        sp2 = default_space(EXPERIMENTS[2])
        assert "min_pts" in sp2.integral

    def test_merge_experiment_optimization_path(self, scene_logs):
        dets, poses, mounts = scene_logs["occluded_track"]
        budget = OptimizeBudget(total=6, explore=3, exploit=3, seed=1)
        rep = run_experiment(13, dets, poses, mounts, optimize_params=True, budget=budget)
        assert rep.optimized and len(rep.trace.trace) == 6
        assert {"eps_dist", "eps_speed", "merge_min_pts"} <= set(rep.params)
        assert 0.0 <= rep.v1_global <= 1.0

    def test_optimized_run_is_deterministic_on_twin_dataset(self, suite, scene_logs):
        from radarseg import simgen

        dets, poses, mounts = scene_logs["crossing_pedestrian"]
        twin_dets, twin_poses = simgen.generate(suite["crossing_pedestrian"])  # independent copy
        budget = OptimizeBudget(total=10, explore=5, exploit=5, seed=3)
        r1 = run_experiment(2, dets, poses, mounts, optimize_params=True, budget=budget)
        r2 = run_experiment(2, twin_dets, twin_poses, mounts, optimize_params=True, budget=budget)
        assert r1.params == r2.params
        assert r1.v1_windowed == r2.v1_windowed
        assert [t.score for t in r1.trace.trace] == [t.score for t in r2.trace.trace]
