"""Command-line front end for the identification pipeline.

Every run echoes its resolved configuration, prints a one-line human summary
to stdout, and writes machine-readable results only through ``--out``. Exit
codes: 0 success, 1 validation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import (
    duration_summary,
    rank_features,
    write_duration_csv,
    write_ranking_csv,
)
from .evaluation import (
    ExperimentConfig,
    config_to_dict,
    derivative_sweep,
    derivative_sweep_to_dict,
    effective_jobs,
    fragment_sweep,
    fragment_sweep_to_dict,
    prepare_features,
    result_to_dict,
    run_experiment,
    write_derivative_csv,
    write_fragment_csv,
    write_json,
)
from .features import DerivativeLevel, extract_features, write_features_csv
from .gaze_data import Dataset, ValidationError, load_dataset, resample_dataset
from .preprocess import SgConfig, smooth
from .rbfn import RbfnConfig
from .segmentation import (
    IvtConfig,
    ivt_segment,
    vt_sweep,
    write_segments_csv,
    write_vt_sweep_csv,
)
from .synthgen import SynthConfig, generate_with_truth, write_dataset


def _parse_seeds(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        first, last = text.split("..", 1)
        return tuple(range(int(first), int(last) + 1))
    return tuple(int(part) for part in text.split(","))


def _parse_level(text: str) -> DerivativeLevel:
    return DerivativeLevel(int(text))


def _echo_config(payload: dict) -> None:
    print("config " + json.dumps(payload, sort_keys=True))


def _load(args) -> Dataset:
    dataset = load_dataset(args.root)
    dataset_id = getattr(args, "dataset_id", None)
    if dataset_id:
        dataset = dataset.filter(dataset_id)
    return dataset


def _experiment_config(args, seeds=None) -> ExperimentConfig:
    fragment = None
    if getattr(args, "fragment", None) is not None:
        fragment = (args.fragment, args.anchor)
    return ExperimentConfig(
        level=args.level,
        fragment=fragment,
        seeds=seeds if seeds is not None else args.seeds,
        ivt=IvtConfig(vt_deg_per_s=args.vt, mfd_s=args.mfd),
        sg=SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame),
        rbfn=RbfnConfig(k=args.k),
    )


def _add_pipeline_flags(parser, with_level=True, with_rbfn=True, with_fragment=True):
    parser.add_argument("--vt", type=float, default=90.0, help="velocity threshold in deg/s (default: 90)")
    parser.add_argument("--mfd", type=float, default=0.096, help="minimum fixation duration in seconds (default: 0.096)")
    parser.add_argument("--sg-order", type=int, default=6, help="smoother polynomial order (default: 6)")
    parser.add_argument("--sg-frame", type=int, default=15, help="smoother frame size, odd (default: 15)")
    if with_level:
        parser.add_argument("--level", type=_parse_level, default=DerivativeLevel.CRACKLE,
                            help="highest derivative order 0..5 (default: 5)")
    if with_rbfn:
        parser.add_argument("--k", type=int, default=32, help="number of RBF centers (default: 32)")
        parser.add_argument("--seeds", type=_parse_seeds, default=tuple(range(50)),
                            help="seed list: 'a..b', 'a,b,c', or a single seed (default: 0..49)")
        parser.add_argument("--jobs", type=int, default=None,
                            help="parallel seed workers (default: GAZE_IDENT_JOBS or all cores)")
    if with_fragment:
        parser.add_argument("--fragment", type=float, default=None,
                            help="optional fragment duration in seconds (default: full trajectory)")
        parser.add_argument("--anchor", choices=("start", "end"), default="end",
                            help="which end the fragment is cut from (default: end)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeid",
        description="User identification from eye-tracking gaze trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"gazeid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground-truth events")
    p.add_argument("--users", type=int, required=True, help="number of users (>= 2)")
    p.add_argument("--duration", type=float, required=True, help="session duration in seconds (>= 10)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    p.add_argument("--rate", type=float, default=200.0, help="sampling rate in Hz (default: 200)")
    p.add_argument("--noise-scale", type=float, default=1.0,
                   help="event-to-event variability multiplier (default: 1.0)")
    p.add_argument("--dataset-id", default="SYN", help="dataset directory name (default: SYN)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("validate", help="load a dataset directory and report a summary")
    p.add_argument("root", help="dataset root directory")

    p = sub.add_parser("segment", help="smooth and segment every recording, dump segment CSVs")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None, help="restrict to one dataset id")
    _add_pipeline_flags(p, with_level=False, with_rbfn=False, with_fragment=False)
    p.add_argument("--out", required=True, help="output directory for per-recording CSVs")

    p = sub.add_parser("features", help="extract per-segment features to one CSV")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p, with_rbfn=False, with_fragment=False)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("identify", help="run the seeded identification protocol")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p)
    p.add_argument("--out", default=None, help="optional JSON results path")

    p = sub.add_parser("sweep-derivatives", help="identification accuracy per derivative level")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p, with_level=False)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--json", default=None, help="optional JSON bundle with per-seed lists")

    p = sub.add_parser("sweep-fragments", help="fragment duration x anchor x level grid")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p, with_level=False, with_fragment=False)
    p.add_argument("--durations", default=None,
                   help="comma-separated fragment durations in seconds "
                        "(default: 60,80,100,120,130,140,150)")
    p.add_argument("--out", required=True, help="output CSV path (best level per cell)")
    p.add_argument("--json", default=None, help="optional JSON bundle with the full grid")

    p = sub.add_parser("sweep-vt", help="mean fixation count per velocity threshold")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    p.add_argument("--mfd", type=float, default=0.096, help="minimum fixation duration (default: 0.096)")
    p.add_argument("--sg-order", type=int, default=6, help="smoother polynomial order (default: 6)")
    p.add_argument("--sg-frame", type=int, default=15, help="smoother frame size (default: 15)")
    p.add_argument("--vt-min", type=int, default=1, help="lowest threshold (default: 1)")
    p.add_argument("--vt-max", type=int, default=150, help="highest threshold (default: 150)")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("rank-features", help="ANOVA F-score ranking over merged sessions")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p, with_rbfn=False, with_fragment=False)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("resample", help="downsample every recording to a new rate")
    p.add_argument("root")
    p.add_argument("--rate", type=float, required=True, help="target rate in Hz")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("duration-summary", help="per-user mean fixation/saccade durations")
    p.add_argument("root")
    p.add_argument("--dataset-id", default=None)
    _add_pipeline_flags(p, with_level=False, with_rbfn=False, with_fragment=False)
    p.add_argument("--out", required=True, help="output CSV path")

    return parser


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_users=args.users,
        duration_s=args.duration,
        rate_hz=args.rate,
        seed=args.seed,
        session_noise_scale=args.noise_scale,
        dataset_id=args.dataset_id,
    )
    _echo_config({"command": "synth", **cfg.__dict__, "out": str(args.out)})
    dataset, truth = generate_with_truth(cfg)
    write_dataset(dataset, args.out, truth=truth, force=args.force)
    n_samples = sum(rec.trajectory.n_samples for rec in dataset.recordings)
    print(
        f"wrote {len(dataset.recordings)} recordings ({cfg.n_users} users x 2 sessions, "
        f"{n_samples} samples) to {args.out}"
    )
    return 0


def _cmd_validate(args) -> int:
    dataset = load_dataset(args.root)
    _echo_config({"command": "validate", "root": str(args.root)})
    for dataset_id in dataset.dataset_ids():
        users = dataset.users(dataset_id)
        durations = [
            rec.trajectory.duration_s
            for rec in dataset.recordings
            if rec.dataset_id == dataset_id
        ]
        print(
            f"{dataset_id}: {len(users)} users, {len(durations)} recordings, "
            f"rate {dataset.manifest['rate_hz']}Hz, "
            f"duration {min(durations):.1f}-{max(durations):.1f}s"
        )
    return 0


def _cmd_segment(args) -> int:
    dataset = _load(args)
    ivt = IvtConfig(vt_deg_per_s=args.vt, mfd_s=args.mfd)
    sg = SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame)
    _echo_config({"command": "segment", "root": str(args.root), "vt": args.vt,
                  "mfd": args.mfd, "sg_order": args.sg_order, "sg_frame": args.sg_frame,
                  "out": str(args.out)})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_fix = n_sac = 0
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        seg = ivt_segment(smooth(rec.trajectory, sg), ivt)
        n_fix += len(seg.fixations())
        n_sac += len(seg.saccades())
        name = f"{rec.dataset_id}__{rec.user_id}__{rec.session_id}.csv"
        write_segments_csv(seg, out_dir / name)
    print(f"segmented {len(dataset.recordings)} recordings: {n_fix} fixations, {n_sac} saccades")
    return 0


def _cmd_features(args) -> int:
    dataset = _load(args)
    ivt = IvtConfig(vt_deg_per_s=args.vt, mfd_s=args.mfd)
    sg = SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame)
    _echo_config({"command": "features", "root": str(args.root), "level": int(args.level),
                  "vt": args.vt, "mfd": args.mfd, "out": str(args.out)})
    rows = []
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        seg = ivt_segment(smooth(rec.trajectory, sg), ivt)
        fix, sac = extract_features(seg, args.level, user_id=rec.user_id)
        for matrix in (fix, sac):
            for row in matrix.values:
                rows.append((rec.user_id, rec.session_id, matrix.kind, row))
    write_features_csv(rows, args.level, args.out)
    print(f"wrote {len(rows)} feature rows ({args.level.n_features} columns) to {args.out}")
    return 0


def _cmd_identify(args) -> int:
    dataset = _load(args)
    cfg = _experiment_config(args)
    _echo_config({"command": "identify", "root": str(args.root), **config_to_dict(cfg)})
    result = run_experiment(dataset, cfg, jobs=args.jobs)
    print(f"accuracy {result.mean:.1f} +- {result.sd:.1f} over {len(cfg.seeds)} seeds")
    if args.out:
        write_json(result_to_dict(result), args.out)
    return 0


def _cmd_sweep_derivatives(args) -> int:
    dataset = _load(args)
    base = _experiment_config(args)
    _echo_config({"command": "sweep-derivatives", "root": str(args.root),
                  **config_to_dict(base)})
    rows = derivative_sweep(dataset, base, jobs=args.jobs)
    for row in rows:
        print(
            f"{row.level.label:<18} {row.n_features:>3} features  "
            f"{row.result.mean:5.1f} +- {row.result.sd:.1f}"
        )
    write_derivative_csv(rows, args.out)
    if args.json:
        write_json(derivative_sweep_to_dict(rows), args.json)
    return 0


def _cmd_sweep_fragments(args) -> int:
    dataset = _load(args)
    durations = (
        tuple(float(d) for d in args.durations.split(","))
        if args.durations
        else None
    )
    base = _experiment_config(args)
    _echo_config({"command": "sweep-fragments", "root": str(args.root),
                  "durations": list(durations) if durations else list(map(float, (60, 80, 100, 120, 130, 140, 150))),
                  **config_to_dict(base)})
    sweep = (
        fragment_sweep(dataset, base, durations=durations, jobs=args.jobs)
        if durations
        else fragment_sweep(dataset, base, jobs=args.jobs)
    )
    for entry in sweep.best:
        print(
            f"{entry.duration_s:5.0f}s {entry.anchor:<5} best level {int(entry.best_level)}  "
            f"{entry.result.mean:5.1f} +- {entry.result.sd:.1f}"
        )
    write_fragment_csv(sweep, args.out)
    if args.json:
        write_json(fragment_sweep_to_dict(sweep), args.json)
    return 0


def _cmd_sweep_vt(args) -> int:
    from .evaluation import smooth_dataset

    dataset = _load(args)
    sg = SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame)
    _echo_config({"command": "sweep-vt", "root": str(args.root), "mfd": args.mfd,
                  "vt_min": args.vt_min, "vt_max": args.vt_max, "out": str(args.out)})
    grid = tuple(float(v) for v in range(args.vt_min, args.vt_max + 1))
    sweep = vt_sweep(smooth_dataset(dataset, sg), grid, mfd_s=args.mfd)
    peak_vt = max(sweep, key=sweep.get)
    print(f"peak mean fixation count {sweep[peak_vt]:.1f} at vt={peak_vt:.0f} deg/s")
    write_vt_sweep_csv(sweep, args.out)
    return 0


def _cmd_rank_features(args) -> int:
    dataset = _load(args)
    cfg = _experiment_config(args, seeds=(0,))
    _echo_config({"command": "rank-features", "root": str(args.root),
                  "level": int(args.level), "vt": args.vt, "mfd": args.mfd,
                  "out": str(args.out)})
    ivt = IvtConfig(vt_deg_per_s=args.vt, mfd_s=args.mfd)
    sg = SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame)
    from .features import concat_matrices

    fix_parts, sac_parts = [], []
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        seg = ivt_segment(smooth(rec.trajectory, sg), ivt)
        fix, sac = extract_features(seg, args.level, user_id=rec.user_id)
        fix_parts.append(fix)
        sac_parts.append(sac)
    ranking = rank_features(concat_matrices(fix_parts), concat_matrices(sac_parts))
    for kind, entries in (("fixation", ranking.fixation), ("saccade", ranking.saccade)):
        top = ", ".join(f"{name}={score:.2f}" for name, score in entries[:5])
        print(f"top {kind} features: {top}")
    write_ranking_csv(ranking, args.out)
    return 0


def _cmd_resample(args) -> int:
    dataset = load_dataset(args.root)
    _echo_config({"command": "resample", "root": str(args.root), "rate": args.rate,
                  "out": str(args.out)})
    resampled = resample_dataset(dataset, args.rate)
    write_dataset(resampled, args.out, force=args.force)
    print(f"resampled {len(resampled.recordings)} recordings to {args.rate}Hz at {args.out}")
    return 0


def _cmd_duration_summary(args) -> int:
    dataset = _load(args)
    ivt = IvtConfig(vt_deg_per_s=args.vt, mfd_s=args.mfd)
    sg = SgConfig(poly_order=args.sg_order, frame_size=args.sg_frame)
    _echo_config({"command": "duration-summary", "root": str(args.root),
                  "vt": args.vt, "mfd": args.mfd, "out": str(args.out)})
    rows = duration_summary(dataset, ivt, sg)
    write_duration_csv(rows, args.out)
    print(f"wrote duration summaries for {len(rows)} users to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "validate": _cmd_validate,
    "segment": _cmd_segment,
    "features": _cmd_features,
    "identify": _cmd_identify,
    "sweep-derivatives": _cmd_sweep_derivatives,
    "sweep-fragments": _cmd_sweep_fragments,
    "sweep-vt": _cmd_sweep_vt,
    "rank-features": _cmd_rank_features,
    "resample": _cmd_resample,
    "duration-summary": _cmd_duration_summary,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, FileExistsError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
