"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with -s to see them live).

The directional checks (criterion 5) run on the standard synthetic suite
with pinned scene and optimizer seeds.
"""

import math
import time
from hashlib import sha256
from pathlib import Path

import numpy as np
import pytest

from oracles import brute_dbscan, brute_filter_removed, direct_entropy_scores, same_partition
from radarseg import coords, simgen
from radarseg.cli import main as cli_main
from radarseg.experiments import run_experiment
from radarseg.filtering import FilterConfig, removal_mask, tune_filter
from radarseg.optimize import OptimizeBudget, optimize, phase_best
from radarseg.pipeline import PipelineConfig, retention_violations, run_pipeline
from radarseg.score import LabeledPartition, score_triplet
from radarseg.stage1 import CorePointRule, NeighborhoodCriterion, cluster_window, n_min_at
from radarseg.stage2 import VelocitySolverConfig, estimate_velocity
from radarseg.types import Detection, ParamSpace, detection_columns


def report(number: int, name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number} ({name}): {status} {detail}".rstrip())
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def random_window(rng, n):
    spread = float(rng.uniform(3, 25))
    return dict(
        x=rng.uniform(-spread, spread, n),
        y=rng.uniform(-spread, spread, n),
        vr=rng.normal(0, 2, n),
        t=np.sort(rng.uniform(0, 0.25, n)),
        r=rng.uniform(5, 130, n),
    )


def test_criterion_1_dbscan_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(1001)
    mismatches = 0
    for trial in range(200):
        n = int(rng.integers(10, 401))
        p = random_window(rng, n)
        dets = [
            Detection(time=float(t), sensor_id=0, r=float(r), azimuth=0.0,
                      radial_velocity=float(v), x=float(x), y=float(y))
            for x, y, v, t, r in zip(p["x"], p["y"], p["vr"], p["t"], p["r"])
        ]
        for variant in ("box", "euclid_xy", "euclid_xyvr"):
            eps_a = float(rng.uniform(0.6, 3.0))
            eps_b = float(rng.uniform(0.5, 5.0))
            if variant == "box":
                crit = NeighborhoodCriterion.box(eps_a, eps_b)
            elif variant == "euclid_xy":
                crit = NeighborhoodCriterion.euclid_xy(eps_a, eps_b)
            else:
                crit = NeighborhoodCriterion.euclid_xyvr(eps_a, eps_b)
            for core in ("fixed", "adaptive"):
                if core == "fixed":
                    rule = CorePointRule.fixed(int(rng.integers(1, 6)), vr_min=float(rng.uniform(0, 1.5)))
                else:
                    rule = CorePointRule.adaptive_range(
                        float(rng.uniform(1, 5)), float(rng.uniform(0, 1.5)),
                        vr_min=float(rng.uniform(0, 1.5)),
                    )
                got = cluster_window(dets, crit, rule).labels
                nmin = np.asarray(n_min_at(p["r"], rule), dtype=float)
                if nmin.ndim == 0:
                    nmin = np.full(n, float(nmin))
                code, ea, eb, et = crit.kernel_args()
                want = brute_dbscan(p["x"], p["y"], p["vr"], p["t"], nmin, rule.vr_min, code, ea, eb, et)
                if not same_partition(got, want):
                    mismatches += 1
    elapsed = time.perf_counter() - started
    report(1, "dbscan oracle equivalence", mismatches == 0 and elapsed < 60.0,
           f"[200 inputs x 3 criteria x 2 rules, {mismatches} mismatches, {elapsed:.1f}s]")


def test_criterion_2_filter_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(1002)
    mismatches = 0
    for trial in range(100):
        n = int(rng.integers(10, 501))
        spread = float(rng.uniform(3, 30))
        x = rng.uniform(-spread, spread, n)
        y = rng.uniform(-spread, spread, n)
        t = np.sort(rng.uniform(0, 2.0, n))
        vr = rng.normal(0, 0.3, n)
        cfg = FilterConfig(
            vr_thresh=float(rng.uniform(0.05, 0.35)), d_xy=float(rng.uniform(0.8, 2.0))
        )
        dets = [
            Detection(time=float(tt), sensor_id=0, r=float(np.hypot(a, b)), azimuth=0.0,
                      radial_velocity=float(v), x=float(a), y=float(b))
            for a, b, tt, v in zip(x, y, t, vr)
        ]
        got = removal_mask(dets, cfg)
        want = brute_filter_removed(x, y, t, vr, cfg.d_xy, cfg.dt, cfg.vr_thresh)
        if not np.array_equal(got, want):
            mismatches += 1
    elapsed = time.perf_counter() - started
    report(2, "filter oracle equivalence", mismatches == 0 and elapsed < 30.0,
           f"[100 inputs, {mismatches} mismatches, {elapsed:.1f}s]")


def test_criterion_3_v_measure_correctness():
    rng = np.random.default_rng(1003)
    worst = 0.0
    perm_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        truth = rng.integers(-1, 6, n)
        pred = rng.integers(-1, 7, n)
        mine = score_triplet(LabeledPartition(ground_truth=truth, predicted=pred))
        brute = direct_entropy_scores(truth, pred)
        worst = max(worst, max(abs(a - b) for a, b in zip(mine, brute)))
        # permutation invariance
        tmap = {v: 50 + k for k, v in enumerate(sorted({int(v) for v in truth if v != -1}))}
        pmap = {v: 90 + k for k, v in enumerate(sorted({int(v) for v in pred if v != -1}))}
        truth2 = np.array([tmap.get(int(v), -1) for v in truth])
        pred2 = np.array([pmap.get(int(v), -1) for v in pred])
        perm = score_triplet(LabeledPartition(ground_truth=truth2, predicted=pred2))
        if max(abs(a - b) for a, b in zip(mine, perm)) > 1e-12:
            perm_ok = False
    report(3, "v-measure correctness", worst <= 1e-12 and perm_ok,
           f"[1000 label pairs, max deviation {worst:.2e}]")


def test_criterion_4_velocity_solver_exactness():
    rng = np.random.default_rng(1004)
    worst_clean = 0.0
    worst_robust = 0.0
    for _ in range(100):
        m = int(rng.integers(3, 30))
        bearings = rng.uniform(-1.4, 1.4, m)
        while np.ptp(np.mod(bearings, math.pi)) < 1e-3:
            bearings = rng.uniform(-1.4, 1.4, m)
        v = rng.uniform(-10, 10, 2)
        vr = v[0] * np.cos(bearings) + v[1] * np.sin(bearings)
        est = estimate_velocity(bearings, vr)
        assert est is not None
        worst_clean = max(worst_clean, math.hypot(est[0] - v[0], est[1] - v[1]))

        big = int(rng.integers(10, 30))
        bearings = rng.uniform(-1.4, 1.4, big)
        vr = v[0] * np.cos(bearings) + v[1] * np.sin(bearings)
        n_out = max(1, big // 5)  # 20 % outliers
        vr[rng.choice(big, n_out, replace=False)] += 3.0
        est = estimate_velocity(bearings, vr, VelocitySolverConfig(inlier_threshold=0.5))
        assert est is not None
        worst_robust = max(worst_robust, math.hypot(est[0] - v[0], est[1] - v[1]))
    report(4, "velocity solver exactness", worst_clean <= 1e-9 and worst_robust <= 1e-6,
           f"[clean {worst_clean:.2e}, with outliers {worst_robust:.2e}]")


def test_criterion_5a_optimizer_beats_expert_preset(scene_logs):
    started = time.perf_counter()
    dets, poses, mounts = scene_logs["car_and_pedestrian"]
    expert = run_experiment(1, dets, poses, mounts)
    optimized = run_experiment(2, dets, poses, mounts, optimize_params=True, budget=OptimizeBudget(seed=42))
    margin = optimized.v1_windowed - expert.v1_windowed
    elapsed = time.perf_counter() - started
    report(5, "5a optimized beats expert preset", margin >= 0.02 and elapsed < 300,
           f"[expert {expert.v1_windowed:.4f} -> optimized {optimized.v1_windowed:.4f}, "
           f"margin {margin:.4f}, {elapsed:.0f}s]")


def test_criterion_5b_adaptive_at_least_fixed(scene_logs):
    started = time.perf_counter()
    dets, poses, mounts = scene_logs["remote_car"]
    fixed = run_experiment(3, dets, poses, mounts, optimize_params=True, budget=OptimizeBudget(seed=7))
    adaptive = run_experiment(7, dets, poses, mounts, optimize_params=True, budget=OptimizeBudget(seed=7))
    elapsed = time.perf_counter() - started
    report(5, "5b adaptive min-pts >= fixed", adaptive.v1_windowed >= fixed.v1_windowed and elapsed < 300,
           f"[fixed {fixed.v1_windowed:.4f}, adaptive {adaptive.v1_windowed:.4f}, {elapsed:.0f}s]")


def test_criterion_5c_filtering_reduces_clusters(scene_logs):
    started = time.perf_counter()
    dets, poses, mounts = scene_logs["cluttered_walker"]
    tuned = tune_filter(dets)
    violations = retention_violations(dets, tuned.config)
    base = dict(
        frame=coords.FCS,
        criterion=NeighborhoodCriterion.box(0.60, 12.3, 0.25),
        core_rule=CorePointRule.fixed(2, vr_min=0.25),
        merge=None,
    )
    on = run_pipeline(PipelineConfig(filter_enabled=True, filter_cfg=tuned.config, **base), dets, poses, mounts)
    off = run_pipeline(PipelineConfig(filter_enabled=False, **base), dets, poses, mounts)
    reduction = 1.0 - on.counts["stage1_clusters"] / off.counts["stage1_clusters"]
    elapsed = time.perf_counter() - started
    report(5, "5c filtering cuts cluster count", reduction >= 0.15 and violations == 0 and elapsed < 300,
           f"[{off.counts['stage1_clusters']} -> {on.counts['stage1_clusters']} clusters "
           f"({reduction:.1%}), {violations} retention violations, {elapsed:.0f}s]")


def test_criterion_5d_continuation_merge(scene_logs):
    started = time.perf_counter()
    dets, poses, mounts = scene_logs["occluded_track"]
    res = run_pipeline(PipelineConfig(), dets, poses, mounts)  # defaults: continuation merge
    v1_s1 = res.scores["stage1_v1_global"]
    v1_s2 = res.scores["stage2_v1_global"]

    cols = detection_columns(dets)
    obj = cols["gt_label"] == 0
    s1_ids = {int(v) for v in res.stage1_labels[obj] if v >= 0}
    s2_ids = {int(v) for v in res.merged_labels[obj] if v >= 0}

    gap = simgen.standard_suite()["occluded_track"].objects[0].absent[0]
    spans_gap = False
    for g in s2_ids:
        tsel = cols["time"][(res.merged_labels == g) & obj]
        if tsel.min() < gap[0] and tsel.max() > gap[1]:
            spans_gap = True
    elapsed = time.perf_counter() - started
    ok = (v1_s2 >= v1_s1) and (len(s2_ids) < len(s1_ids)) and (len(s2_ids) >= 2) and not spans_gap
    report(5, "5d continuation merge", ok and elapsed < 300,
           f"[global V1 {v1_s1:.4f} -> {v1_s2:.4f}, object clusters {len(s1_ids)} -> {len(s2_ids)}, "
           f"gap spanned: {spans_gap}, {elapsed:.0f}s]")


def test_criterion_6_optimizer_sanity():
    space = ParamSpace(bounds={"a": (0.0, 4.0), "b": (-2.0, 2.0)})
    hits = 0
    structure_ok = True
    for seed in range(50):
        res = optimize(space, lambda p: -np.hypot(p["a"] - 2.6, p["b"] + 0.8), OptimizeBudget(seed=seed))
        na = (res.best_params["a"] - 2.6) / 4.0
        nb = (res.best_params["b"] + 0.8) / 4.0
        hits += np.hypot(na, nb) <= 0.05
        phases = [t.phase for t in res.trace]
        if len(res.trace) != 100 or phases.count("explore") != 30 or phases.count("exploit") != 70:
            structure_ok = False
    improved = 0
    for seed in range(50):
        res = optimize(space, lambda p: -((p["a"] - 1.3) ** 2) - 2 * (p["b"] - 0.4) ** 2, OptimizeBudget(seed=seed))
        explore_best, overall_best = phase_best(res)
        improved += overall_best > explore_best
    report(6, "optimizer sanity", hits >= 45 and structure_ok and improved >= 45,
           f"[{hits}/50 within 0.05, {improved}/50 strictly improved in exploitation]")


def _hash_tree(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = sha256(p.read_bytes()).hexdigest()
    return out


def test_criterion_7_pipeline_determinism(tmp_path):
    hashes = []
    for k, threads in enumerate((1, 1, 1, 4)):
        out = tmp_path / f"run{k}"
        rc = cli_main([
            "pipeline", "--scene", "car_and_pedestrian", "--threads", str(threads), "--out", str(out),
        ])
        assert rc == 0
        hashes.append(_hash_tree(out))
    same = all(h == hashes[0] for h in hashes[1:])
    report(7, "pipeline determinism", same and len(hashes[0]) > 0,
           f"[{len(hashes[0])} files byte-identical across 3 runs + threads 1/4]")


def test_criterion_8_filter_tuner_behavior():
    log = simgen.tuner_probe_log()
    res = tune_filter(log)
    flagged = np.argwhere(res.violations > 0)
    one_cell = len(flagged) == 1 and (
        res.vr_values[flagged[0][0]] == pytest.approx(0.35)
        and res.d_xy_values[flagged[0][1]] == pytest.approx(0.8)
    )
    i = np.nonzero(res.vr_values == res.config.vr_thresh)[0][0]
    j = np.nonzero(res.d_xy_values == res.config.d_xy)[0][0]
    zero_cells = res.removal_rates[res.violations == 0]
    picked_best = res.violations[i, j] == 0 and res.removal_rates[i, j] == zero_cells.max()
    report(8, "filter tuner behavior", bool(one_cell and picked_best),
           f"[flagged cells: {len(flagged)} at (0.35, 0.8), "
           f"selected ({res.config.vr_thresh}, {res.config.d_xy}) removal {res.removal_rates[i, j]:.3f}]")
