"""Command-line interface.

Four subcommands cover the pipeline end to end:

  gen      render a synthetic scene script into annotation files
  detect   find conversational groups per frame from pose annotations
  dyad     report distance, reciprocal angle, and engagement for a pair
  predict  train the speaking-state model for a dyad and score it

Every report lands in the output directory as delimited text (CSV/JSON),
with matplotlib figures rendered next to it under figures/ unless
--no-plots is given.  Exit codes: 0 on success, 1 for problems with the
input (bad flags, malformed files, inconsistent scripts), 2 for unexpected
internal failures.
"""

import argparse
import json
import math
import os
import sys

from . import annotation_io, engagement, grouping, plots, synthetic
from .attention import AttentionParams
from .turntaking import (
    CLASS_NAMES,
    REFERENCE_CLASS_SHARES,
    REFERENCE_CORRELATIONS,
    REFERENCE_DIAGONAL,
    TrainConfig,
    save_model,
    train_and_evaluate,
)


class _CliParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; user errors should be 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(
        prog="fformation",
        description="Conversational group detection and dyad analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser(
        "gen", parents=[], help="generate a synthetic scene from a JSON script"
    )
    gen.add_argument("config", help="scene script (JSON, must set a seed)")
    gen.add_argument("-o", "--out", default=".", help="output directory")

    detect = sub.add_parser("detect", help="detect groups from pose annotations")
    detect.add_argument("frames", help="pose annotations (frames.csv)")
    detect.add_argument("-o", "--out", default=".", help="output directory")
    detect.add_argument(
        "--truth", help="ground-truth groups file; enables the match report"
    )
    _add_attention_flags(detect)
    detect.add_argument("--k-min", type=int, default=2, help="smallest cluster count")
    detect.add_argument("--k-max", type=int, default=15, help="largest cluster count")
    detect.add_argument(
        "--restarts", type=int, default=8, help="k-means restarts per candidate"
    )
    detect.add_argument("--seed", type=int, default=0, help="k-means seeding")
    detect.add_argument(
        "--no-memory",
        action="store_true",
        help="search the full cluster-count range at every frame",
    )
    detect.add_argument(
        "--match-tolerance",
        type=float,
        default=2.0 / 3.0,
        help="member overlap required to match a truth group",
    )
    detect.add_argument("--no-plots", action="store_true", help="skip figure output")

    dyad = sub.add_parser("dyad", help="engagement report for one pair")
    dyad.add_argument("frames", help="pose annotations (frames.csv)")
    dyad.add_argument("groups", help="group timeline (detected or ground truth)")
    dyad.add_argument(
        "--dyad", nargs=2, type=int, required=True, metavar=("I", "J"),
        help="the two person ids",
    )
    dyad.add_argument("-o", "--out", default=".", help="output directory")
    _add_attention_flags(dyad)
    dyad.add_argument(
        "--reciprocal-use-torso",
        action="store_true",
        help="use raw torso angles for the reciprocal angle",
    )
    dyad.add_argument("--no-plots", action="store_true", help="skip figure output")

    predict = sub.add_parser(
        "predict", help="train and score the next-speaking-state model"
    )
    predict.add_argument("activities", help="activity annotations (activities.csv)")
    predict.add_argument(
        "--dyad", nargs=2, type=int, required=True, metavar=("I", "J"),
        help="the two person ids",
    )
    predict.add_argument("-o", "--out", default=".", help="output directory")
    predict.add_argument(
        "--window-t", type=int, default=10, help="frames per input window"
    )
    predict.add_argument(
        "--horizon", type=int, default=1, help="frames ahead to predict"
    )
    predict.add_argument(
        "--features",
        default=",".join(("speaking", "hand_gesturing", "head_gesturing")),
        help="comma-separated activity names to feed the model, or 'all'",
    )
    predict.add_argument("--hidden", type=int, default=32, help="LSTM hidden size")
    predict.add_argument("--batch", type=int, default=32, help="mini-batch size")
    predict.add_argument("--epochs", type=int, default=15, help="training epochs")
    predict.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    predict.add_argument(
        "--patience", type=int, default=50, help="early-stopping patience (epochs)"
    )
    predict.add_argument(
        "--min-delta",
        type=float,
        default=1e-10,
        help="validation-loss improvement that resets patience",
    )
    predict.add_argument("--seed", type=int, default=0, help="init and shuffle seed")
    predict.add_argument("--no-plots", action="store_true", help="skip figure output")

    return parser


def _add_attention_flags(parser):
    parser.add_argument(
        "--d", type=float, default=100.0, dest="distance",
        help="attention distance in pixels",
    )
    parser.add_argument(
        "--window", type=int, default=5, help="angle smoothing window (frames)"
    )
    parser.add_argument(
        "--torsion-threshold",
        type=float,
        default=math.pi / 4,
        help="head/torso divergence counting as a torsion (radians)",
    )


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _figures_dir(out: str) -> str:
    path = os.path.join(out, "figures")
    os.makedirs(path, exist_ok=True)
    return path


def _attention_params(args) -> AttentionParams:
    return AttentionParams(
        distance=args.distance,
        window=args.window,
        torsion_threshold=args.torsion_threshold,
    )


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as sink:
        sink.write(",".join(header) + "\n")
        for row in rows:
            sink.write(",".join(_cell(value) for value in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_json(path, payload):
    with open(path, "w") as sink:
        json.dump(payload, sink, indent=2, sort_keys=True)
        sink.write("\n")


def _cmd_gen(args) -> int:
    config = synthetic.load_scene_config(args.config)
    sequence, timeline, activities = synthetic.generate_scene(config)
    out = _ensure_out(args)
    with open(os.path.join(out, "frames.csv"), "w", newline="") as sink:
        annotation_io.write_frames(sequence, sink)
    with open(os.path.join(out, "activities.csv"), "w", newline="") as sink:
        annotation_io.write_activities(activities, sink)
    with open(os.path.join(out, "groups.csv"), "w", newline="") as sink:
        annotation_io.write_groups(timeline, sink)
    print(
        f"generated {config.duration} frames for {config.participants} persons "
        f"into {out}"
    )
    return 0


def _cmd_detect(args) -> int:
    sequence = annotation_io.read_frames(args.frames)
    attention_params = _attention_params(args)
    cluster_params = grouping.ClusterParams(
        k_min=args.k_min,
        k_max=args.k_max,
        restarts=args.restarts,
        seed=args.seed,
    )
    result = grouping.detect_groups(
        sequence,
        attention_params,
        cluster_params,
        use_memory=not args.no_memory,
    )
    out = _ensure_out(args)
    with open(os.path.join(out, "groups.csv"), "w", newline="") as sink:
        annotation_io.write_groups(result.timeline, sink)
    series = grouping.group_count_series(result.timeline)
    _write_csv(os.path.join(out, "group_counts.csv"), ("frame", "count"), series)
    _write_csv(
        os.path.join(out, "cluster_stats.csv"),
        ("frame", "k_selected", "k_candidates_evaluated", "silhouette"),
        [
            (s.frame, s.k_selected, s.k_candidates_evaluated, s.silhouette_score)
            for s in result.stats
        ],
    )

    truth_series = None
    if args.truth:
        truth = annotation_io.read_groundtruth(args.truth)
        report = grouping.match_groups(
            result.timeline, truth, tolerance=args.match_tolerance
        )
        truth_series = grouping.group_count_series(truth)
        _write_json(
            os.path.join(out, "match_report.json"),
            {
                "tp_rate": report.tp_rate,
                "matched": report.matched,
                "truth_total": report.truth_total,
                "tolerance": args.match_tolerance,
                "reference_tp_rate": grouping.REFERENCE_TP_RATE,
                "frames": [
                    {
                        "frame": fm.frame,
                        "matched": fm.matched,
                        "truth_groups": fm.truth_groups,
                        "predicted_groups": fm.predicted_groups,
                    }
                    for fm in report.frames
                ],
            },
        )
        print(
            f"matched {report.matched}/{report.truth_total} truth groups "
            f"(tp_rate {report.tp_rate:.3f}, reference {grouping.REFERENCE_TP_RATE})"
        )

    if not args.no_plots:
        plots.save_group_count_figure(
            series, os.path.join(_figures_dir(out), "group_counts.png"), truth_series
        )
    evaluated = [s.k_candidates_evaluated for s in result.stats]
    mean_eval = sum(evaluated) / len(evaluated) if evaluated else 0.0
    print(
        f"detected groups over {len(result.frames)} frames "
        f"(mean candidate counts evaluated per frame: {mean_eval:.2f}); wrote {out}"
    )
    return 0


def _cmd_dyad(args) -> int:
    person_i, person_j = args.dyad
    sequence = annotation_io.read_frames(args.frames)
    timeline = annotation_io.read_groundtruth(args.groups)
    known = sequence.person_ids()
    missing = [p for p in (person_i, person_j) if p not in known]
    if missing:
        raise annotation_io.AnnotationFormatError(
            f"unknown person id(s) {missing} in {args.frames}"
        )
    rows = engagement.dyad_report(
        sequence,
        timeline,
        (person_i, person_j),
        _attention_params(args),
        use_torso=args.reciprocal_use_torso,
    )
    out = _ensure_out(args)
    _write_csv(
        os.path.join(out, "dyad_report.csv"),
        ("frame", "distance", "reciprocal_angle", "engagement"),
        [(row.frame, row.distance, row.reciprocal, row.engagement) for row in rows],
    )
    if not rows:
        print(
            f"warning: persons {person_i} and {person_j} are never co-present; "
            "report is empty",
            file=sys.stderr,
        )
        print(f"dyad ({person_i}, {person_j}): 0 shared frames; wrote {out}")
        return 0
    if not args.no_plots:
        plots.save_dyad_figure(rows, os.path.join(_figures_dir(out), "dyad.png"))
    mean_engagement = sum(row.engagement for row in rows) / len(rows)
    print(
        f"dyad ({person_i}, {person_j}): {len(rows)} shared frames, "
        f"mean engagement {mean_engagement:.3f}; wrote {out}"
    )
    return 0


def _cmd_predict(args) -> int:
    person_i, person_j = args.dyad
    records = annotation_io.read_activities(args.activities)
    if args.features.strip() == "all":
        features = annotation_io.ACTIVITY_NAMES
    else:
        features = tuple(
            name.strip() for name in args.features.split(",") if name.strip()
        )
    config = TrainConfig(
        window=args.window_t,
        horizon=args.horizon,
        features=features,
        hidden=args.hidden,
        batch_size=args.batch,
        learning_rate=args.lr,
        epochs=args.epochs,
        patience=args.patience,
        min_delta=args.min_delta,
        seed=args.seed,
    )
    result = train_and_evaluate(records, (person_i, person_j), config)
    out = _ensure_out(args)

    config_echo = {
        "dyad": [person_i, person_j],
        "window": config.window,
        "horizon": config.horizon,
        "features": list(config.features),
        "hidden": config.hidden,
        "dense_sizes": list(config.dense_sizes),
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
        "seed": config.seed,
    }
    save_model(result.model, os.path.join(out, "model.turnmodel"), config_echo)
    _write_csv(
        os.path.join(out, "history.csv"),
        ("epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"),
        [
            (s.epoch, s.train_loss, s.train_accuracy, s.val_loss, s.val_accuracy)
            for s in result.history
        ],
    )
    ranking = [
        {
            "name": fr.name,
            "correlation": None if math.isnan(fr.correlation) else fr.correlation,
        }
        for fr in result.ranking
    ]
    report = result.report
    _write_json(
        os.path.join(out, "metrics.json"),
        {
            "accuracy": report.accuracy,
            "confusion": report.confusion.tolist(),
            "confusion_counts": report.counts.tolist(),
            "class_names": list(CLASS_NAMES),
            "class_counts": result.dataset.class_counts.tolist(),
            "split_sizes": list(result.dataset.sizes()),
            "selected_features": list(config.features),
            "feature_ranking": ranking,
            "epochs_run": len(result.history),
            "reference": {
                "correlations": REFERENCE_CORRELATIONS,
                "confusion_diagonal": REFERENCE_DIAGONAL,
                "class_shares": REFERENCE_CLASS_SHARES,
            },
        },
    )
    if not args.no_plots:
        figures = _figures_dir(out)
        plots.save_history_figure(
            result.history, os.path.join(figures, "history.png")
        )
        plots.save_confusion_figure(
            report.confusion, CLASS_NAMES, os.path.join(figures, "confusion.png")
        )
    print(
        f"dyad ({person_i}, {person_j}): test accuracy {report.accuracy:.3f} "
        f"on {report.n_samples} samples over {len(result.history)} epochs; wrote {out}"
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "detect": _cmd_detect,
    "dyad": _cmd_dyad,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (
        annotation_io.AnnotationFormatError,
        synthetic.SceneConfigError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
