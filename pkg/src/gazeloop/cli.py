"""Command-line interface: dataset generation, detection dumps, training
runs, evaluation, trace replay, and the HTTP session service.

Every subcommand writes deterministic artifacts; rerunning with the same
flags reproduces the same bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .benchmark import (benchmark_detector_config, benchmark_hil_config,
                        benchmark_scene_config)
from .hil import (HilConfig, OracleUser, ScriptedUser, count_user_actions,
                  hil_config_from_record, run_cml_baseline, run_hil_session)
from .metrics import (LabeledBox, ScoredBox, build_metrics_report,
                      fixation_to_aoi)
from .network import TrainConfig, save_model
from .proposals import (DetectorConfig, detect_dataset, detector_from_record,
                        save_detections)
from .scene import (BoundingBox, config_from_record, generate_scene,
                    load_dataset, save_dataset)
from .storage import (SCHEMA_VERSION, DatasetFormatError, canonical_dumps,
                      read_records, write_records)


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    base = benchmark_detector_config()
    p.add_argument("--sigma-loc", type=float, default=base.sigma_loc)
    p.add_argument("--p-miss", type=float, default=base.p_miss)
    p.add_argument("--lambda-fp", type=float, default=base.lambda_fp)
    p.add_argument("--sigma-descriptor", type=float, default=base.sigma_descriptor)
    p.add_argument("--detector-seed", type=int, default=base.seed)


def _detector_from_args(args) -> DetectorConfig:
    return DetectorConfig(sigma_loc=args.sigma_loc, p_miss=args.p_miss,
                          lambda_fp=args.lambda_fp,
                          sigma_descriptor=args.sigma_descriptor,
                          seed=args.detector_seed)


def _add_hil_flags(p: argparse.ArgumentParser) -> None:
    base = benchmark_hil_config()
    p.add_argument("--t-initial", type=float, default=base.t_initial_s,
                   help="seconds of initial annotation")
    p.add_argument("--t-update", type=float, default=base.t_update_s,
                   help="seconds per feedback window")
    p.add_argument("--max-update", type=int, default=base.max_update)
    p.add_argument("--epochs", type=int, default=base.retrain.epochs)
    p.add_argument("--lr", type=float, default=base.retrain.lr)
    p.add_argument("--detector-decay", type=float,
                   default=base.detector_schedule.decay)
    p.add_argument("--aggregator", choices=["maxpool", "lstm"],
                   default=base.aggregator)
    p.add_argument("--model-seed", type=int, default=0)


def _hil_from_args(args) -> HilConfig:
    base = benchmark_hil_config()
    return replace(base, t_initial_s=args.t_initial, t_update_s=args.t_update,
                   max_update=args.max_update,
                   retrain=TrainConfig(epochs=args.epochs, lr=args.lr),
                   aggregator=args.aggregator,
                   detector_schedule=replace(base.detector_schedule,
                                             decay=args.detector_decay))


def load_experiment_spec(path) -> dict:
    """Experiment spec file: dataset reference, detector and session configs,
    explicit seeds, output directory. Referenced files must exist."""
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    for field in ("dataset", "model_seed", "out_dir"):
        if field not in spec:
            raise DatasetFormatError(f"{path}: experiment spec missing {field!r}")
    base = Path(path).parent
    dataset_path = Path(spec["dataset"])
    if not dataset_path.is_absolute():
        dataset_path = base / dataset_path
    if not dataset_path.exists():
        raise DatasetFormatError(f"{path}: dataset {dataset_path} does not exist")
    spec["dataset"] = str(dataset_path)
    return spec


def _configs_from_spec(spec: dict):
    detector = (detector_from_record(spec["detector"]) if "detector" in spec
                else benchmark_detector_config())
    hil = (hil_config_from_record(spec["hil"]) if "hil" in spec
           else benchmark_hil_config())
    return detector, hil


def cmd_gen_scene(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = config_from_record(json.load(fh))
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    else:
        config = benchmark_scene_config(
            seed=args.seed if args.seed is not None else 0,
            n_frames=args.frames, sigma_app=args.sigma_app)
    dataset = generate_scene(config)
    save_dataset(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset.frames)} frames, "
          f"{len(dataset.class_labels)} classes")
    return 0


def cmd_detect(args) -> int:
    dataset = load_dataset(args.dataset)
    detections = detect_dataset(dataset, _detector_from_args(args))
    save_detections(detections, args.out)
    total = sum(len(v) for v in detections.values())
    print(f"wrote {args.out}: {total} detections over {len(detections)} frames")
    return 0


def _write_report(report, out_dir: Path, name: str = "report.jsonl") -> Path:
    path = out_dir / name
    path.write_bytes(report.to_bytes())
    return path


def cmd_train_cml(args) -> int:
    dataset = load_dataset(args.dataset)
    report = run_cml_baseline(dataset, _detector_from_args(args),
                              _hil_from_args(args), model_seed=args.model_seed,
                              split=args.split)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = _write_report(report, out_dir)
    row = report.rounds[0]
    print(f"CML trained on {row.frames_annotated} frames "
          f"({row.pct_data:.0%}); mAP@50 whole={row.metrics_whole.map_50:.3f} "
          f"test={row.metrics_test.map_50:.3f}")
    print(f"report: {path}")
    return 0


def cmd_run_hil(args) -> int:
    if args.spec:
        spec = load_experiment_spec(args.spec)
        dataset = load_dataset(spec["dataset"])
        detector, hil = _configs_from_spec(spec)
        model_seed = spec["model_seed"]
        out_dir_arg = args.out_dir or spec["out_dir"]
    else:
        if not args.dataset or not args.out_dir:
            raise ValueError("either --spec or both --dataset and --out-dir required")
        dataset = load_dataset(args.dataset)
        detector = _detector_from_args(args)
        hil = _hil_from_args(args)
        model_seed = args.model_seed
        out_dir_arg = args.out_dir
    user = OracleUser(dataset, sigma_u=args.sigma_u)
    report, engine = run_hil_session(dataset, detector, hil, user,
                                     model_seed=model_seed)
    out_dir = Path(out_dir_arg)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = _write_report(report, out_dir)
    write_records(out_dir / "trace.jsonl", engine.trace_header(), engine.trace)
    save_model(engine.model, out_dir / "model.json")
    for row in report.rounds:
        print(f"round {row.round_k}: frames={row.frames_annotated} "
              f"({row.pct_data:.0%}) mAP@50 whole={row.metrics_whole.map_50:.3f} "
              f"test={row.metrics_test.map_50:.3f} "
              f"fixation={row.metrics_whole.fixation_accuracy:.3f}")
    actions = count_user_actions(engine.trace, dataset.frames)
    print(f"user actions: {actions['user_actions']} "
          f"(baseline {actions['baseline_actions']}, "
          f"ratio {actions['action_ratio']:.3f})")
    print(f"report: {report_path}")
    return 0


def cmd_replay_trace(args) -> int:
    dataset = load_dataset(args.dataset)
    header, events = read_records(args.trace, "session_trace")
    if not header:
        raise DatasetFormatError(f"{args.trace}: empty trace")
    user_events = [e for e in events
                   if e.get("type") in ("seed", "correct", "accept", "reject")]
    user = ScriptedUser(events=user_events)
    report, engine = run_hil_session(dataset, detector_from_record(header["detector"]),
                                     hil_config_from_record(header["hil"]), user,
                                     model_seed=header["model_seed"])
    if report.dataset_digest != header["dataset_digest"]:
        print("warning: dataset digest differs from the traced session",
              file=sys.stderr)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = _write_report(report, out_dir)
    print(f"replayed {len(user_events)} user events into {len(report.rounds)} rounds")
    print(f"report: {path}")
    return 0


def _load_predictions(path):
    header, records = read_records(path, "predictions")
    by_frame: dict[int, list] = {}
    for i, rec in enumerate(records):
        if rec.get("kind") != "prediction":
            raise DatasetFormatError(f"{path}: record {i + 2}: expected prediction")
        by_frame.setdefault(rec["frame"], []).append(
            (BoundingBox(*rec["box"]), rec["label"], rec.get("score", 1.0)))
    return by_frame


class _Shown:
    def __init__(self, box, label):
        self.box = box
        self.label = label


def cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset)
    by_frame = _load_predictions(args.predictions)
    preds, gts, pred_labels, true_labels, outcomes = [], [], [], [], []
    from .hil import best_label_for_box
    for frame in dataset.frames:
        frame_preds = by_frame.get(frame.index, [])
        gt_pairs = [(o.box, o.class_label) for o in frame.objects]
        shown = [_Shown(b, lab) for b, lab, _ in frame_preds]
        for box, label, score in frame_preds:
            preds.append(ScoredBox(box, label, score))
            pred_labels.append(label)
            true_labels.append(best_label_for_box(box, gt_pairs, 0.5))
        gts.extend(LabeledBox(o.box, o.class_label) for o in frame.objects)
        for fx in dataset.fixations:
            if fx.frame_index == frame.index:
                outcomes.append((fixation_to_aoi(fx.x, fx.y, shown), fx.aoi_label))
    report = build_metrics_report(preds, gts, pred_labels or ["none"],
                                  true_labels or ["none"], outcomes)
    header = {"kind": "metrics_report", "schema_version": SCHEMA_VERSION}
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(header) + "\n")
        fh.write(canonical_dumps(report.to_record()) + "\n")
    print(f"mAP@50={report.map_50:.3f} mAP@75={report.map_75:.3f} "
          f"mAP={report.map_coco:.3f} balanced_acc={report.balanced_accuracy:.3f}")
    print(f"report: {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    data_dir = args.data_dir or os.environ.get("GAZELOOP_DATA_DIR", ".")
    host = args.host or os.environ.get("GAZELOOP_BIND", "127.0.0.1")
    ui_dir = args.ui_dir or os.environ.get("GAZELOOP_UI_DIR")
    app = create_app(Path(data_dir), Path(ui_dir) if ui_dir else None)
    uvicorn.run(app, host=host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeloop",
        description="Human-in-the-loop object recognition over synthetic "
                    "eye-tracking scenes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--sigma-app", type=float, default=0.0)
    p.add_argument("--config", help="scene config JSON file")
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("detect", help="dump detector proposals for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_detector_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("train-cml", help="fixed 70/30 split baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", type=float, default=0.7)
    _add_detector_flags(p)
    _add_hil_flags(p)
    p.set_defaults(func=cmd_train_cml)

    p = sub.add_parser("run-hil", help="oracle-driven feedback session")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--spec", default=None,
                   help="experiment spec JSON (dataset, configs, seeds, out_dir)")
    p.add_argument("--sigma-u", type=float, default=0.0,
                   help="box noise on oracle corrections")
    _add_detector_flags(p)
    _add_hil_flags(p)
    p.set_defaults(func=cmd_run_hil)

    p = sub.add_parser("replay-trace", help="re-run a recorded session trace")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_replay_trace)

    p = sub.add_parser("eval", help="score a predictions file against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=8754)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--ui-dir", default=None,
                   help="serve the browser console from this directory at /ui")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
