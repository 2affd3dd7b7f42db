"""Command-line interface.

One executable with subcommands covering the whole pipeline:

    simulate     generate a synthetic scene (CSV detection log + poses)
    filter       split a log into kept/removed detections
    filter-tune  grid-enumerate filter settings on a labeled log
    cluster      window clustering of a log
    merge        second-stage merging of a window assignment
    score        quality scores of an assignment against labels
    optimize     parameter search for stage 1 or stage 2
    bench        run the numbered experiment matrix
    pipeline     run everything end to end
    plot-data    per-stage point/label CSVs for plotting

Errors print a machine-readable JSON object to stderr and exit nonzero.
Stage timings go to stderr as well: output files are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import coords, experiments, io, score, simgen, stage1, stage2
from .experiments import EXPERIMENTS, default_space, run_experiment
from .filtering import FilterTunerCriterion, filter_detections, tune_filter
from .optimize import OptimizeBudget, optimize, space_from_json
from .pipeline import PipelineConfig, emit_plotdata, load_config, run_pipeline
from .types import detection_columns


def _out_dir(args) -> Path:
    return io.ensure_dir(args.out)


def _load_inputs(args):
    dets = io.read_detections(args.log)
    poses = io.read_poses_csv(args.poses) if getattr(args, "poses", None) else None
    mounts = io.read_mounts_csv(args.mounts) if getattr(args, "mounts", None) else None
    return dets, poses, mounts


def _config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "frame", None):
        cfg.frame = args.frame
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threads", None):
        cfg.threads = args.threads
    return cfg


def cmd_simulate(args) -> int:
    if args.scene:
        suite = simgen.standard_suite()
        if args.scene not in suite:
            raise ValueError(f"unknown scene {args.scene!r}; choose from {sorted(suite)}")
        spec = suite[args.scene]
    else:
        spec = simgen.spec_from_json(Path(args.spec).read_text())
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    dets, poses = simgen.generate(spec)
    out = _out_dir(args)
    io.write_detections_csv(out / "detections.csv", dets)
    io.write_poses_csv(out / "poses.csv", poses)
    io.write_mounts_csv(out / "mounts.csv", list(spec.mounts))
    (out / "scene.json").write_text(simgen.spec_to_json(spec))
    print(f"wrote {len(dets)} detections to {out}")
    return 0


def cmd_filter(args) -> int:
    cfg = _config(args)
    dets, poses, mounts = _load_inputs(args)
    work = coords.transform_log(dets, mounts, poses, coords.FrameSpec(mode=cfg.frame))
    kept, removed = filter_detections(work, cfg.filter_cfg)
    out = _out_dir(args)
    io.write_detections_csv(out / "kept.csv", kept)
    io.write_detections_csv(out / "removed.csv", removed)
    print(f"kept {len(kept)}, removed {len(removed)} ({out})")
    return 0


def cmd_filter_tune(args) -> int:
    cfg = _config(args)
    dets, poses, mounts = _load_inputs(args)
    work = coords.transform_log(dets, mounts, poses, coords.FrameSpec(mode=cfg.frame))
    crit = FilterTunerCriterion(
        retention_fraction=args.retention,
        frame_length=args.frame_length,
        max_violations=args.max_violations,
    )
    result = tune_filter(work, crit, threads=cfg.threads)
    out = _out_dir(args)

    def write_matrix(path, matrix):
        with open(path, "w") as fh:
            fh.write("vr_thresh\\d_xy," + ",".join(repr(float(v)) for v in result.d_xy_values) + "\n")
            for i, vr in enumerate(result.vr_values):
                fh.write(repr(float(vr)) + "," + ",".join(repr(float(x)) for x in matrix[i]) + "\n")

    write_matrix(out / "violations.csv", result.violations)
    write_matrix(out / "removal_rates.csv", result.removal_rates)
    chosen = {"vr_thresh": result.config.vr_thresh, "d_xy": result.config.d_xy, "dt": result.config.dt}
    (out / "chosen.json").write_text(json.dumps(chosen, indent=2) + "\n")
    print(json.dumps(chosen))
    return 0


def cmd_cluster(args) -> int:
    cfg = _config(args)
    dets, poses, mounts = _load_inputs(args)
    work = coords.transform_log(dets, mounts, poses, coords.FrameSpec(mode=cfg.frame))
    assignments = stage1.cluster_stream(work, cfg.criterion, cfg.core_rule, hop=cfg.hop, threads=cfg.threads)
    out = _out_dir(args)
    io.write_assignments_csv(out / "assignments.csv", assignments)
    total = sum(a.n_clusters for a in assignments)
    print(f"{len(assignments)} windows, {total} clusters ({out})")
    return 0


def cmd_merge(args) -> int:
    cfg = _config(args)
    if cfg.merge is None:
        raise ValueError("merge method is 'none' in the configuration")
    dets, poses, mounts = _load_inputs(args)
    work = coords.transform_log(dets, mounts, poses, coords.FrameSpec(mode=cfg.frame))
    assignments = io.read_assignments_csv(args.assignments)
    spec = coords.FrameSpec(mode=cfg.frame)
    bearings = coords.detection_bearings(work, mounts, poses, spec)
    merged, summaries, groups = stage2.merge_clusters(work, assignments, cfg.merge, bearings=bearings)
    out = _out_dir(args)
    io.write_assignments_csv(out / "merged.csv", [merged])

    merged_summaries = stage2.build_summaries(
        work, [merged], bearings=bearings, solver=cfg.merge.solver
    )
    payload = []
    for s in merged_summaries:
        payload.append(
            {
                "cluster": int(s.source[1]),
                "size": int(len(s.member_indices)),
                "span": [s.t_first, s.t_last],
                "centers": [[float(t), float(c[0]), float(c[1])] for t, c in zip(s.step_times, s.centers)],
                "velocity": None if s.velocity is None else [s.velocity[0], s.velocity[1]],
                "inliers": int(s.inlier_count),
                "predicted_speed": s.speed,
            }
        )
    (out / "summaries.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"{merged.n_clusters} merged clusters ({out})")
    return 0


def cmd_score(args) -> int:
    dets, _, _ = _load_inputs(args)
    assignments = io.read_assignments_csv(args.assignments)
    top = max((int(a.indices.max()) for a in assignments if len(a.indices)), default=-1)
    if top >= len(dets):
        raise ValueError(
            f"assignment references detection {top} but the log has {len(dets)} rows; wrong --log?"
        )
    target = score.preclusters_from_ground_truth(dets)
    ws = score.score_windows(assignments, target)
    agg = score.aggregate_v_measure(ws)
    out_rows = [
        {
            "window_start": w.window[0],
            "window_end": w.window[1],
            "n": w.n,
            "homogeneity": w.homogeneity,
            "completeness": w.completeness,
            "v_measure": w.v_measure,
        }
        for w in ws
    ]
    report = {"windows": out_rows, "aggregate_v_measure": agg}
    if args.out:
        out = _out_dir(args)
        (out / "scores.json").write_text(json.dumps(report, indent=2) + "\n")
        with open(out / "scores.csv", "w") as fh:
            fh.write("window_start,window_end,n,homogeneity,completeness,v_measure\n")
            for w in ws:
                fh.write(
                    f"{w.window[0]!r},{w.window[1]!r},{w.n},{w.homogeneity!r},{w.completeness!r},{w.v_measure!r}\n"
                )
    print(json.dumps({"aggregate_v_measure": agg, "windows": len(ws)}))
    return 0


def cmd_optimize(args) -> int:
    dets, poses, mounts = _load_inputs(args)
    ex = experiments
    exp = EXPERIMENTS[args.experiment]
    if args.space:
        space = space_from_json(json.loads(Path(args.space).read_text()))
    else:
        space = default_space(exp)
    budget = OptimizeBudget(seed=args.seed if args.seed is not None else 0)
    ctx = ex.prepare_stage1(dets, poses, mounts, frame=exp.frame, filtered=exp.filtered)
    if args.stage == 1:
        objective = ex.stage1_objective(ctx, exp)
    else:
        if exp.merge_method is None:
            raise ValueError(f"experiment {exp.exp_id} has no merge stage")
        base = EXPERIMENTS[exp.base_stage1]
        crit = ex.criterion_from_params(base.criterion, base.params)
        rule = ex.core_rule_from_params(base.core, base.params)
        assignments = ctx.assignments(crit, rule)
        spec = coords.FrameSpec(mode=exp.frame)
        bearings = coords.detection_bearings(ctx.kept_detections, mounts, poses, spec)
        summaries = stage2.build_summaries(ctx.kept_detections, assignments, bearings=bearings)
        objective = ex.stage2_objective(ctx, exp, summaries)
    result = optimize(space, objective, budget)
    out = _out_dir(args)
    with open(out / "trace.csv", "w") as fh:
        names = space.names
        fh.write("step,phase,score," + ",".join(names) + "\n")
        for k, t in enumerate(result.trace):
            fh.write(f"{k},{t.phase},{t.score!r}," + ",".join(repr(t.params[n]) for n in names) + "\n")
    (out / "best.json").write_text(
        json.dumps({"score": result.best_score, "params": result.best_params}, indent=2) + "\n"
    )
    print(json.dumps({"best_score": result.best_score}))
    return 0


def cmd_bench(args) -> int:
    dets, poses, mounts = _load_inputs(args)
    ids = [int(x) for x in args.experiments.split(",")] if args.experiments else sorted(EXPERIMENTS)
    out = _out_dir(args)
    rows = []
    for exp_id in ids:
        rep = run_experiment(
            exp_id,
            dets,
            poses,
            mounts,
            optimize_params=args.optimize,
            budget=OptimizeBudget(seed=args.seed if args.seed is not None else 0),
            threads=args.threads or 1,
        )
        rows.append(rep)
        print(
            f"#{rep.exp_id:>2} {rep.name:<28} windowed={rep.v1_windowed:.4f} "
            f"global={rep.v1_global:.4f} clusters={rep.n_clusters}"
        )
    with open(out / "report.csv", "w") as fh:
        fh.write("experiment,name,frame,filtered,components,v1_windowed,v1_global,n_clusters,params\n")
        for rep in rows:
            params = ";".join(f"{k}={v!r}" for k, v in sorted(rep.params.items()))
            fh.write(
                f"{rep.exp_id},{rep.name},{rep.frame},{int(rep.filtered)},{rep.components},"
                f"{rep.v1_windowed!r},{rep.v1_global!r},{rep.n_clusters},{params}\n"
            )
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    if args.scene:
        suite = simgen.standard_suite()
        spec = suite[args.scene]
        dets, poses = simgen.generate(spec)
        mounts = list(spec.mounts)
    else:
        dets, poses, mounts = _load_inputs(args)
    result = run_pipeline(cfg, dets, poses, mounts)
    out = _out_dir(args)
    io.write_assignments_csv(out / "stage1_assignments.csv", result.assignments)
    cols = detection_columns(dets)
    n = len(dets)
    window = (float(cols["time"].min()), float(cols["time"].max())) if n else (0.0, 0.0)
    from .types import ClusterAssignment

    io.write_assignments_csv(
        out / "stage1_global.csv", [ClusterAssignment(labels=result.stage1_labels, window=window)]
    )
    if result.merged_labels is not None:
        io.write_assignments_csv(
            out / "merged.csv", [ClusterAssignment(labels=result.merged_labels, window=window)]
        )
    if result.scores:
        (out / "scores.json").write_text(json.dumps(result.scores, indent=2, sort_keys=True) + "\n")
    (out / "counts.json").write_text(json.dumps(result.counts, indent=2, sort_keys=True) + "\n")
    emit_plotdata(result, dets, out / "plotdata")
    # timings are wall-clock and not reproducible; keep them out of the
    # deterministic output directory
    print(json.dumps(result.timings), file=sys.stderr)
    print(json.dumps({"counts": result.counts, "scores": result.scores}))
    return 0


def cmd_plot_data(args) -> int:
    cfg = _config(args)
    dets, poses, mounts = _load_inputs(args)
    result = run_pipeline(cfg, dets, poses, mounts)
    files = emit_plotdata(result, dets, _out_dir(args))
    print("\n".join(files))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radarseg", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, log=True):
        p.add_argument("--config", help="pipeline configuration file (key = value sections)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--frame", choices=[coords.CCS, coords.FCS], default=None)
        p.add_argument("--out", required=True, help="output directory")
        if log:
            p.add_argument("--log", required=True, help="detection log (CSV or JSON lines)")
            p.add_argument("--poses", help="ego pose CSV")
            p.add_argument("--mounts", help="sensor mount CSV")

    p = sub.add_parser("simulate", help="generate a synthetic scene")
    p.add_argument("--scene", help="standard suite scene name")
    p.add_argument("--spec", help="scene spec JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("filter", help="remove background detections")
    common(p)
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("filter-tune", help="enumerate filter settings on labeled data")
    common(p)
    p.add_argument("--retention", type=float, default=0.75)
    p.add_argument("--frame-length", type=float, default=0.150)
    p.add_argument("--max-violations", type=int, default=0)
    p.set_defaults(fn=cmd_filter_tune)

    p = sub.add_parser("cluster", help="window clustering")
    common(p)
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("merge", help="merge window clusters")
    common(p)
    p.add_argument("--assignments", required=True, help="stage-1 assignment CSV")
    p.set_defaults(fn=cmd_merge)

    p = sub.add_parser("score", help="score an assignment against labels")
    common(p)
    p.add_argument("--assignments", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("optimize", help="parameter search")
    common(p)
    p.add_argument("--stage", type=int, choices=[1, 2], default=1)
    p.add_argument("--experiment", type=int, default=8, help="experiment whose space/structure to optimize")
    p.add_argument("--space", help="bounds JSON file: {name: [lo, hi] | [lo, hi, 'int']}")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("bench", help="run the experiment matrix")
    common(p)
    p.add_argument("--experiments", help="comma-separated ids (default: all)")
    p.add_argument("--optimize", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("pipeline", help="run the full pipeline")
    common(p, log=False)
    p.add_argument("--log", help="detection log (CSV or JSON lines)")
    p.add_argument("--poses", help="ego pose CSV")
    p.add_argument("--mounts", help="sensor mount CSV")
    p.add_argument("--scene", help="standard suite scene to generate instead of --log")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("plot-data", help="emit per-stage plot CSVs")
    common(p)
    p.set_defaults(fn=cmd_plot_data)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
