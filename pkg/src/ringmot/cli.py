"""Command-line entry point.

Subcommands: simulate, run, eval, filter, sweep, bench. Every subcommand
accepts --config (INI file) and repeated --set section.key=value overrides.
Exit codes: 0 success, 2 usage (argparse), 3 configuration error, 4 file
format error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys

import numpy as np

from . import kernels, metrics
from .config import ConfigError, dump_config, load_config, read_space, sample_config
from .dynamic_filter import CloudLog, LogConsistencyError
from .pipeline import run_pipeline, write_timings
from .scan_model import (
    FormatError,
    read_labels,
    read_pose_track,
    read_scans,
    write_labels,
    write_pose_track,
    write_scans,
)
from .simulator import SceneError, read_scene, simulate_sequence
from .tracking import read_track_file, write_track_file

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_FORMAT = 4
EXIT_IO = 5


def _add_config_args(parser):
    parser.add_argument("--config", help="pipeline config file (INI)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config key")


def _load_scans(args, require_nonempty=True):
    poses = read_pose_track(args.poses) if getattr(args, "poses", None) else None
    scans, sentinel = read_scans(args.scans, poses)
    if require_nonempty and not scans:
        raise FormatError(f"{args.scans}: sequence contains no scans")
    return scans, sentinel


def cmd_simulate(args) -> int:
    scene = read_scene(args.scene)
    scans, pose_entries, labels = simulate_sequence(
        scene, args.duration, args.rate, rows=args.rows, cols=args.cols,
    )
    os.makedirs(args.out, exist_ok=True)
    write_scans(os.path.join(args.out, "scans.oscn"), scans)
    write_pose_track(os.path.join(args.out, "poses.txt"), pose_entries)
    write_labels(os.path.join(args.out, "labels.txt"), labels)
    print(f"simulated {len(scans)} scans ({args.rows}x{args.cols}), "
          f"{len(labels)} labeled points -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.overrides)
    scans, _ = _load_scans(args)
    os.makedirs(args.out, exist_ok=True)
    clouds_dir = os.path.join(args.out, "static_clouds")
    result = run_pipeline(scans, cfg, out_dir=clouds_dir)
    write_track_file(os.path.join(args.out, "tracks.txt"), result.records)
    write_timings(os.path.join(args.out, "timings.csv"), result.timings)
    result.log.write_manifest(os.path.join(args.out, "retro_manifest.txt"))
    n_tracks = len({r.id for r in result.records})
    n_dynamic = len({r.id for r in result.records if r.dynamic})
    print(f"processed {len(scans)} scans: {n_tracks} hypotheses "
          f"({n_dynamic} ever dynamic) -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.overrides)
    scans, _ = _load_scans(args)
    labels = read_labels(args.labels)
    records = read_track_file(args.tracks)
    gt = metrics.gt_tracks_from_labels(labels, scans)
    hyp = metrics.hypotheses_by_scan(records, dynamic_only=cfg.metrics.dynamic_only)
    report = metrics.clear_mot(gt, hyp, cfg.metrics.match_threshold)
    text = metrics.format_report(report)
    print(text, end="")
    print("MOTA MOTP MT PT ML")
    print(metrics.report_table_row(report))
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_filter(args) -> int:
    """Standalone dynamic-object removal from an existing track file."""
    cfg = load_config(args.config, args.overrides)
    scans, _ = _load_scans(args)
    records = read_track_file(args.tracks)
    from .scan_model import sanitize_invalid, scan_points_world

    log = CloudLog()
    for index, scan in enumerate(scans):
        scan = sanitize_invalid(scan, cfg.general.sentinel)
        pts = scan_points_world(scan)
        rows, cols = np.nonzero(scan.valid)
        log.append(index, pts[rows, cols], np.column_stack([rows, cols]))
    ever_dynamic = {r.id for r in records if r.dynamic}
    for r in records:
        if r.id in ever_dynamic and r.scan_index in log.entries:
            log.apply_box(r.id, r.scan_index, r.bbox, cfg.filter.margin)
    os.makedirs(args.out, exist_ok=True)
    log.flush(args.out)
    log.write_manifest(os.path.join(args.out, "retro_manifest.txt"))
    print(f"filtered {len(scans)} scans against {len(ever_dynamic)} dynamic tracks "
          f"-> {args.out}")
    return EXIT_OK


def _evaluate_config(cfg, scans, labels):
    result = run_pipeline(scans, cfg)
    gt = metrics.gt_tracks_from_labels(labels, scans)
    hyp = metrics.hypotheses_by_scan(result.records,
                                     dynamic_only=cfg.metrics.dynamic_only)
    return metrics.clear_mot(gt, hyp, cfg.metrics.match_threshold).mota


def cmd_sweep(args) -> int:
    base = load_config(args.config, args.overrides)
    space = read_space(args.space)
    train_poses = read_pose_track(args.train_poses) if args.train_poses else None
    train_scans, _ = read_scans(args.train_scans, train_poses)
    if not train_scans:
        raise FormatError(f"{args.train_scans}: sequence contains no scans")
    train_labels = read_labels(args.train_labels)
    test_scans = test_labels = None
    if args.test_scans:
        test_poses = read_pose_track(args.test_poses) if args.test_poses else None
        test_scans, _ = read_scans(args.test_scans, test_poses)
        test_labels = read_labels(args.test_labels)

    rng = np.random.default_rng(args.seed)
    rows = []
    best = None
    for trial in range(args.trials):
        # trial 0 evaluates the base config so the sweep never loses to it
        cfg = base.copy().validate() if trial == 0 else sample_config(base, space, rng)
        train_mota = _evaluate_config(cfg, train_scans, train_labels)
        trial_cost = metrics.cost(train_mota)
        test_mota = (_evaluate_config(cfg, test_scans, test_labels)
                     if test_scans is not None else float("nan"))
        params = {f"{e.section}.{e.key}": getattr(getattr(cfg, e.section), e.key)
                  for e in space}
        rows.append((trial, trial_cost, train_mota, test_mota, params))
        if best is None or trial_cost < best[1]:
            best = (trial, trial_cost, cfg)
        print(f"trial {trial}: cost={trial_cost:.4f} train_mota={train_mota:.4f}"
              + (f" test_mota={test_mota:.4f}" if test_scans is not None else ""))

    os.makedirs(args.out, exist_ok=True)
    keys = [f"{e.section}.{e.key}" for e in space]
    with open(os.path.join(args.out, "trials.csv"), "w") as fh:
        fh.write("trial,cost,train_mota,test_mota," + ",".join(keys) + "\n")
        for trial, trial_cost, train_mota, test_mota, params in rows:
            fh.write(f"{trial},{trial_cost:.6f},{train_mota:.6f},{test_mota:.6f},"
                     + ",".join(str(params[k]) for k in keys) + "\n")
    with open(os.path.join(args.out, "best_config.ini"), "w") as fh:
        fh.write(dump_config(best[2]))
    print(f"best: trial {best[0]} cost={best[1]:.4f} -> {args.out}")
    return EXIT_OK


def _summarize(name, values):
    med = statistics.median(values)
    p95 = float(np.percentile(values, 95))
    print(f"  {name:<6} median {med:8.3f} ms   p95 {p95:8.3f} ms")
    return med


def _bench_once(scans, cfg, warmup):
    result = run_pipeline(scans, cfg)
    timings = result.timings[warmup:] if len(result.timings) > warmup else result.timings
    return timings


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.overrides)
    scans, _ = _load_scans(args)
    kernels.warmup()
    backends = ([kernels.get_backend()] if not args.compare_backends
                else kernels.available_backends())
    previous = kernels.get_backend()
    medians = {}
    try:
        for backend in backends:
            kernels.set_backend(backend)
            kernels.warmup()
            timings = _bench_once(scans, cfg, args.warmup)
            print(f"backend {backend} ({len(timings)} timed scans, "
                  f"{args.warmup} warm-up excluded):")
            for stage in ("seg_ms", "det_ms", "trk_ms", "flt_ms", "total_ms"):
                med = _summarize(stage[:-3], [getattr(t, stage) for t in timings])
                medians[(backend, stage)] = med
            if args.out:
                path = (args.out if len(backends) == 1
                        else f"{args.out}.{backend}")
                write_timings(path, timings)
    finally:
        kernels.set_backend(previous)
    if len(backends) == 2:
        a, b = backends
        ratio = medians[(a, "total_ms")] / max(medians[(b, "total_ms")], 1e-9)
        print(f"median total: {a} / {b} = {ratio:.2f}x")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringmot",
        description="Multi-object tracking for sparse organized scans",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic sequence")
    p.add_argument("scene", help="scene description file")
    p.add_argument("out", help="output directory")
    p.add_argument("--duration", type=float, default=30.0, help="seconds")
    p.add_argument("--rate", type=float, default=10.0, help="scans per second")
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=900)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run the tracking pipeline over a sequence")
    p.add_argument("scans", help="scan container file")
    p.add_argument("out", help="output directory")
    p.add_argument("--poses", help="pose file (identity poses if omitted)")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a track file against labels")
    p.add_argument("scans")
    p.add_argument("labels")
    p.add_argument("tracks")
    p.add_argument("--poses")
    p.add_argument("--report", help="write key=value report here")
    _add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("filter", help="remove dynamic-track points from scans")
    p.add_argument("scans")
    p.add_argument("tracks")
    p.add_argument("out")
    p.add_argument("--poses")
    _add_config_args(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sweep", help="random-search parameter sweep")
    p.add_argument("--train-scans", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--train-poses")
    p.add_argument("--test-scans")
    p.add_argument("--test-labels")
    p.add_argument("--test-poses")
    p.add_argument("--space", required=True, help="parameter range file")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time the pipeline per stage")
    p.add_argument("scans")
    p.add_argument("--poses")
    p.add_argument("--warmup", type=int, default=10,
                   help="leading scans excluded from the summary")
    p.add_argument("--compare-backends", action="store_true",
                   help="time both the numba and numpy kernel backends")
    p.add_argument("--out", help="write the per-scan timing table here")
    _add_config_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SceneError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, LogConsistencyError, metrics.UndefinedMetricError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
