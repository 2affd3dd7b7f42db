import math

import numpy as np
import pytest

from oracles import brute_dbscan, same_partition
from radarseg.stage1 import (
    BOX,
    EUCLID_XY,
    EUCLID_XYVR,
    CorePointRule,
    NeighborhoodCriterion,
    cluster_stream,
    cluster_window,
    flatten_assignments,
    n_min_at,
    neighbors,
    window_spans,
)
from radarseg.types import Detection


def det(x, y, vr=1.0, t=0.0, r=None):
    r = float(np.hypot(x, y)) if r is None else r
    return Detection(time=t, sensor_id=0, r=r, azimuth=0.0, radial_velocity=vr, x=x, y=y)


def random_dets(rng, n, spread=15.0):
    return [
        det(float(x), float(y), vr=float(v), t=float(t), r=float(rr))
        for x, y, v, t, rr in zip(
            rng.uniform(-spread, spread, n),
            rng.uniform(-spread, spread, n),
            rng.normal(0, 2, n),
            np.sort(rng.uniform(0, 0.25, n)),
            rng.uniform(5, 130, n),
        )
    ]


def run_both(dets, crit, rule):
    got = cluster_window(dets, crit, rule).labels
    x = np.array([d.x for d in dets])
    y = np.array([d.y for d in dets])
    vr = np.array([d.radial_velocity for d in dets])
    t = np.array([d.time for d in dets])
    r = np.array([d.r for d in dets])
    nmin = np.asarray(n_min_at(r, rule), dtype=float)
    if nmin.ndim == 0:
        nmin = np.full(len(dets), float(nmin))
    code, eps_a, eps_b, eps_t = crit.kernel_args()
    want = brute_dbscan(x, y, vr, t, nmin, rule.vr_min, code, eps_a, eps_b, eps_t)
    return got, want


class TestNMinAt:
    def test_baseline_fixed_point(self):
        rule = CorePointRule.adaptive_range(3.87, 0.7)
        assert n_min_at(50.0, rule) == pytest.approx(3.87)

    def test_near_clip(self):
        rule = CorePointRule.adaptive_range(3.0, 1.0)
        assert n_min_at(25.0, rule) == pytest.approx(1.5)

    def test_far_clip(self):
        rule = CorePointRule.adaptive_range(3.0, 1.0)
        assert n_min_at(200.0, rule) == pytest.approx(7.5)

    def test_reciprocal_variant_lowers_remote_demand(self):
        rule = CorePointRule.adaptive_range(3.0, 1.0, reciprocal=True)
        assert n_min_at(200.0, rule) == pytest.approx(3.0 * (1 + (50.0 / 125.0 - 1)))
        assert n_min_at(200.0, rule) < 3.0

    def test_fixed_rule(self):
        assert n_min_at(77.0, CorePointRule.fixed(3)) == 3

    def test_validation(self):
        with pytest.raises(ValueError):
            CorePointRule(vr_min=0.1)  # neither fixed nor adaptive
        with pytest.raises(ValueError):
            CorePointRule(vr_min=0.1, min_pts=2, min_pts_50m=3.0)


class TestNeighbors:
    def test_coincident_pair_all_variants(self):
        pair = [det(0.0, 0.0), det(0.0, 0.0)]
        for crit in (
            NeighborhoodCriterion.box(1.0, 1.0),
            NeighborhoodCriterion.euclid_xy(1.0, 1.0),
            NeighborhoodCriterion.euclid_xyvr(1.0, 1.0),
        ):
            assert neighbors(0, pair, crit) == {1}
            assert neighbors(1, pair, crit) == {0}

    def test_box_vs_euclid_corner(self):
        pair = [det(0.0, 0.0), det(0.9, 0.9)]
        assert neighbors(0, pair, NeighborhoodCriterion.box(1.0, 5.0)) == {1}
        assert neighbors(0, pair, NeighborhoodCriterion.euclid_xy(1.0, 5.0)) == set()

    def test_scaled_velocity_axis(self):
        crit = NeighborhoodCriterion.euclid_xyvr(1.0, 2.0)
        near = [det(0.0, 0.0, vr=0.0), det(0.0, 0.0, vr=1.9)]
        far = [det(0.0, 0.0, vr=0.0), det(0.0, 0.0, vr=2.1)]
        assert neighbors(0, near, crit) == {1}
        assert neighbors(0, far, crit) == set()

    def test_strict_time_window(self):
        pair = [det(0.0, 0.0, t=0.0), det(0.0, 0.0, t=0.25)]
        assert neighbors(0, pair, NeighborhoodCriterion.box(1.0, 1.0, eps_t=0.25)) == set()


class TestClusterWindow:
    def test_all_isolated_is_noise(self):
        dets = [det(10.0 * k, 0.0) for k in range(5)]
        a = cluster_window(dets, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(2))
        assert a.labels.tolist() == [-1] * 5

    def test_coincident_quad_is_one_cluster(self):
        dets = [det(0.0, 0.0, vr=2.0)] * 4
        a = cluster_window(dets, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(3, vr_min=0.5))
        assert a.labels.tolist() == [0, 0, 0, 0]

    def test_core_border_noise_partition(self):
        # chain A-B-C where only B is core, a far pair D, an isolated E
        dets = [
            det(0.0, 0.0),   # A: border (1 neighbor)
            det(1.0, 0.0),   # B: core (2 neighbors)
            det(2.0, 0.0),   # C: border (1 neighbor)
            det(6.0, 0.0),   # D: noise (1 neighbor, not core, no core near)
            det(7.0, 0.0),   # E: noise
            det(20.0, 20.0),  # F: isolated noise
        ]
        crit = NeighborhoodCriterion.euclid_xy(1.2, 5.0)
        rule = CorePointRule.fixed(2, vr_min=0.0)
        a = cluster_window(dets, crit, rule)
        assert a.labels.tolist() == [0, 0, 0, -1, -1, -1]
        # the class structure: B is the only core point
        counts = [len(neighbors(i, dets, crit)) for i in range(len(dets))]
        assert [c >= 2 for c in counts] == [False, True, False, False, False, False]

    def test_velocity_gate_blocks_core(self):
        dets = [det(0.0, 0.0, vr=0.1)] * 5
        rule = CorePointRule.fixed(3, vr_min=0.4)
        a = cluster_window(dets, NeighborhoodCriterion.box(1.0, 5.0), rule)
        assert a.labels.tolist() == [-1] * 5
        # border points need no gate: one fast core pulls in slow members
        dets2 = [det(0.0, 0.0, vr=2.0)] + [det(0.05, 0.0, vr=0.1)] * 4
        a2 = cluster_window(dets2, NeighborhoodCriterion.box(1.0, 5.0), rule)
        assert a2.labels.tolist() == [0, 0, 0, 0, 0]

    def test_label_ids_follow_discovery_order(self):
        dets = [det(0.0, 0.0, vr=2.0)] * 3 + [det(10.0, 0.0, vr=2.0)] * 3
        a = cluster_window(dets, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(2, vr_min=0.5))
        assert a.labels.tolist() == [0, 0, 0, 1, 1, 1]

    @pytest.mark.parametrize("variant", [BOX, EUCLID_XY, EUCLID_XYVR])
    @pytest.mark.parametrize("core", ["fixed", "adaptive"])
    def test_matches_brute_force(self, variant, core):
        rng = np.random.default_rng(hash((variant, core)) % 2**31)
        for trial in range(12):
            dets = random_dets(rng, int(rng.integers(5, 220)))
            if variant == EUCLID_XYVR:
                crit = NeighborhoodCriterion.euclid_xyvr(float(rng.uniform(0.8, 3)), float(rng.uniform(0.5, 4)))
            elif variant == EUCLID_XY:
                crit = NeighborhoodCriterion.euclid_xy(float(rng.uniform(0.8, 3)), float(rng.uniform(0.5, 6)))
            else:
                crit = NeighborhoodCriterion.box(float(rng.uniform(0.8, 3)), float(rng.uniform(0.5, 6)))
            if core == "fixed":
                rule = CorePointRule.fixed(int(rng.integers(1, 5)), vr_min=float(rng.uniform(0, 1.5)))
            else:
                rule = CorePointRule.adaptive_range(
                    float(rng.uniform(1, 5)), float(rng.uniform(0, 1.5)), vr_min=float(rng.uniform(0, 1.5))
                )
            got, want = run_both(dets, crit, rule)
            assert same_partition(got, want), (variant, core, trial)

    def test_rotational_invariance_of_euclid_variants(self):
        rng = np.random.default_rng(42)
        dets = random_dets(rng, 150)
        for crit in (NeighborhoodCriterion.euclid_xy(1.5, 3.0), NeighborhoodCriterion.euclid_xyvr(1.5, 2.0)):
            rule = CorePointRule.fixed(2, vr_min=0.3)
            base = cluster_window(dets, crit, rule).labels
            for ang in (0.3, 1.1, 2.7):
                c, s = math.cos(ang), math.sin(ang)
                rot = [
                    Detection(time=d.time, sensor_id=0, r=d.r, azimuth=d.azimuth,
                              radial_velocity=d.radial_velocity,
                              x=c * d.x - s * d.y, y=s * d.x + c * d.y)
                    for d in dets
                ]
                assert same_partition(base, cluster_window(rot, crit, rule).labels)

    def test_gate_property_every_cluster_has_a_core(self):
        rng = np.random.default_rng(9)
        dets = random_dets(rng, 250, spread=8.0)
        crit = NeighborhoodCriterion.euclid_xy(1.5, 3.0)
        rule = CorePointRule.fixed(3, vr_min=0.5)
        a = cluster_window(dets, crit, rule)
        for cid in range(a.n_clusters):
            members = np.nonzero(a.labels == cid)[0]
            has_core = any(
                len(neighbors(int(i), dets, crit)) >= 3 and abs(dets[int(i)].radial_velocity) > 0.5
                for i in members
            )
            assert has_core

    def test_adding_detection_preserves_core_status(self):
        rng = np.random.default_rng(10)
        dets = random_dets(rng, 120, spread=6.0)
        crit = NeighborhoodCriterion.euclid_xy(1.5, 3.0)
        rule = CorePointRule.fixed(3, vr_min=0.2)

        def cores(ds):
            return {
                i
                for i in range(len(ds))
                if len(neighbors(i, ds, crit)) >= 3 and abs(ds[i].radial_velocity) > 0.2
            }

        before = cores(dets)
        extra = dets + [det(0.5, 0.5, vr=1.0, t=0.1)]
        assert before <= cores(extra)


class TestClusterStream:
    def test_short_log_single_window(self):
        dets = [det(0.0, 0.0, t=0.0), det(0.0, 0.0, t=0.1)]
        out = cluster_stream(dets, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(1))
        assert len(out) == 1

    def test_window_count_formula(self):
        spans = window_spans(0.0, 1.0, 0.25, 0.05)
        assert len(spans) == 16
        assert spans[0] == (0.0, 0.25)
        assert spans[-1] == pytest.approx((0.75, 1.0))

    def test_bursts_beyond_window_never_share_cluster(self):
        burst1 = [det(0.0, 0.0, vr=2.0, t=0.0)] * 4
        burst2 = [det(0.0, 0.0, vr=2.0, t=0.4)] * 4
        out = cluster_stream(burst1 + burst2, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(2, vr_min=0.5))
        # no cluster may contain points of both bursts (gap 0.4 > eps_t 0.25)
        for a in out:
            for lab in range(a.n_clusters):
                members = a.indices[a.labels == lab]
                assert {int(i) < 4 for i in members} != {True, False}

    def test_unsorted_input_rejected(self):
        dets = [det(0.0, 0.0, t=0.5), det(0.0, 0.0, t=0.1)]
        with pytest.raises(ValueError):
            cluster_stream(dets, NeighborhoodCriterion.box(1.0, 1.0), CorePointRule.fixed(1))

    def test_thread_count_does_not_change_output(self):
        rng = np.random.default_rng(12)
        n = 400
        dets = [
            det(float(x), float(y), vr=float(v), t=float(t))
            for x, y, v, t in zip(
                rng.uniform(-10, 10, n), rng.uniform(-10, 10, n), rng.normal(0, 2, n),
                np.sort(rng.uniform(0, 2.0, n)),
            )
        ]
        crit = NeighborhoodCriterion.euclid_xy(1.2, 3.0)
        rule = CorePointRule.fixed(2, vr_min=0.3)
        a1 = cluster_stream(dets, crit, rule, threads=1)
        a4 = cluster_stream(dets, crit, rule, threads=4)
        assert len(a1) == len(a4)
        for x, y in zip(a1, a4):
            assert x.window == y.window
            assert np.array_equal(x.labels, y.labels)
            assert np.array_equal(x.indices, y.indices)


def flatten(a):
    return a.labels.tolist()


class TestFlatten:
    def test_first_window_wins(self):
        from radarseg.types import ClusterAssignment

        a0 = ClusterAssignment(labels=[0, 0, -1], window=(0.0, 0.25), indices=[0, 1, 2])
        a1 = ClusterAssignment(labels=[0, 0], window=(0.05, 0.30), indices=[1, 2])
        flat = flatten_assignments(3, [a0, a1])
        assert flat.tolist() == [0, 0, 1]  # row 2 claimed by window 1's cluster, renumbered densely
