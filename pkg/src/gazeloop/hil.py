"""Human-in-the-loop sessions: interactive annotation windows, streaming
inference with user interruption, retraining rounds, and session reports.

One engine drives both the CLI (oracle or scripted users pulled in-process)
and the HTTP service (a live user pushing the same accept/feedback commands
over the wire), so identical feedback sequences produce byte-identical
session reports. All reported times are virtual: training effort is
converted to seconds at a fixed nominal rate, which keeps reports
deterministic and replayable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .graphs import FrameGraph, build_frame_graph
from .metrics import (LabeledBox, MetricsReport, ScoredBox,
                      build_metrics_report, fixation_to_aoi, iou)
from .network import (InductiveGraphModel, PredictionSet, TrainConfig, fit,
                      forward)
from .propagation import (AnnotatedRegion, PropagationParams, TrackMemory,
                          assign_labels, memory_read, memory_write,
                          seed_memory)
from .proposals import (DetectionRecord, DetectorConfig, DetectorSchedule,
                        detect_regions)
from .scene import BACKGROUND, Frame, SceneDataset, dataset_to_bytes
from .storage import SCHEMA_VERSION, canonical_dumps

# Nominal training throughput used to convert deterministic training effort
# (graph-epochs) into the report's time column. Virtual, not wall-clock.
TRAIN_RATE_GRAPH_EPOCHS_PER_S = 2000.0

PHASE_SEED = "seed"                  # window start: user annotation required
PHASE_ANNOTATING = "annotating"      # inside a window: accept or correct
PHASE_TRAINING = "training"          # retrain pending/running
PHASE_STREAMING = "streaming"        # model inference, user may interrupt
PHASE_DONE = "done"


@dataclass(frozen=True)
class HilConfig:
    t_initial_s: float = 10.0
    t_update_s: float = 10.0
    max_update: int = 3
    retrain: TrainConfig = TrainConfig()
    hidden_dims: tuple[int, ...] = (32, 32)
    aggregator: str = "maxpool"
    detector_schedule: DetectorSchedule = DetectorSchedule()
    propagation: PropagationParams = PropagationParams()
    iou_thresh: float = 0.5
    test_split: float = 0.7
    warm_start: bool = False

    def validate(self) -> None:
        if self.t_initial_s <= 0 or self.t_update_s <= 0:
            raise ValueError("annotation window lengths must be positive")
        if self.max_update < 0:
            raise ValueError("max_update must be >= 0")
        if not 0.0 < self.test_split < 1.0:
            raise ValueError("test_split must be in (0, 1)")
        self.retrain.validate()

    def to_record(self) -> dict:
        p = self.propagation
        return {"t_initial_s": self.t_initial_s, "t_update_s": self.t_update_s,
                "max_update": self.max_update,
                "retrain": {"epochs": self.retrain.epochs, "lr": self.retrain.lr,
                            "early_stop_tol": self.retrain.early_stop_tol},
                "hidden_dims": list(self.hidden_dims), "aggregator": self.aggregator,
                "detector_decay": self.detector_schedule.decay,
                "propagation": {"tau_match": p.tau_match, "alpha_mem": p.alpha_mem,
                                "capacity": p.capacity,
                                "sigma_gate_frac": p.sigma_gate_frac},
                "iou_thresh": self.iou_thresh, "test_split": self.test_split,
                "warm_start": self.warm_start}


def hil_config_from_record(rec: dict) -> "HilConfig":
    """Inverse of HilConfig.to_record; missing fields take the defaults."""
    base = HilConfig()
    p = rec.get("propagation", {})
    r = rec.get("retrain", {})
    bp = base.propagation
    br = base.retrain
    return HilConfig(
        t_initial_s=rec.get("t_initial_s", base.t_initial_s),
        t_update_s=rec.get("t_update_s", base.t_update_s),
        max_update=rec.get("max_update", base.max_update),
        retrain=TrainConfig(epochs=r.get("epochs", br.epochs),
                            lr=r.get("lr", br.lr),
                            early_stop_tol=r.get("early_stop_tol",
                                                 br.early_stop_tol)),
        hidden_dims=tuple(rec.get("hidden_dims", base.hidden_dims)),
        aggregator=rec.get("aggregator", base.aggregator),
        detector_schedule=DetectorSchedule(
            decay=rec.get("detector_decay", base.detector_schedule.decay)),
        propagation=PropagationParams(
            tau_match=p.get("tau_match", bp.tau_match),
            alpha_mem=p.get("alpha_mem", bp.alpha_mem),
            capacity=p.get("capacity", bp.capacity),
            sigma_gate_frac=p.get("sigma_gate_frac", bp.sigma_gate_frac)),
        iou_thresh=rec.get("iou_thresh", base.iou_thresh),
        test_split=rec.get("test_split", base.test_split),
        warm_start=rec.get("warm_start", base.warm_start))


# --- labeling helpers -------------------------------------------------------

def best_label_for_box(box, labeled, iou_thresh: float) -> str:
    """Label of the best-overlapping (box, label) pair at IoU >= thresh."""
    best = BACKGROUND
    best_iou = iou_thresh
    for other_box, label in labeled:
        v = iou(box, other_box)
        if v >= best_iou:
            best_iou = v
            best = label
    return best


def effective_labels(records: list[DetectionRecord], gt_objects,
                     iou_thresh: float = 0.5) -> list[str]:
    pairs = [(o.box, o.class_label) for o in gt_objects]
    return [best_label_for_box(r.box, pairs, iou_thresh) for r in records]


def label_detections(records: list[DetectionRecord],
                     regions: list[AnnotatedRegion],
                     iou_thresh: float = 0.5) -> list[str]:
    pairs = [(r.box, r.label) for r in regions if r.label != BACKGROUND]
    return [best_label_for_box(r.box, pairs, iou_thresh) for r in records]


def region_diff_actions(displayed, submitted, iou_thresh: float = 0.5) -> int:
    """User effort to turn the displayed regions into the submitted ones,
    counted as one action per region drawn, relabeled, or removed.

    Both arguments are sequences of objects with .box and .label; background
    entries are not annotation claims and are ignored.
    """
    old = [(r.box, r.label) for r in displayed if r.label != BACKGROUND]
    new = [(r.box, r.label) for r in submitted if r.label != BACKGROUND]
    used = [False] * len(old)
    unmatched_new = 0
    for box, label in new:
        hit = None
        for j, (obox, olabel) in enumerate(old):
            if used[j] or olabel != label:
                continue
            if iou(box, obox) >= iou_thresh:
                hit = j
                break
        if hit is None:
            unmatched_new += 1
        else:
            used[hit] = True
    unmatched_old = used.count(False)
    return unmatched_new + unmatched_old


def gt_regions_for_frame(frame: Frame, sigma_u: float = 0.0,
                         rng: np.random.Generator | None = None,
                         width: int = 0, height: int = 0) -> list[AnnotatedRegion]:
    regions = []
    for obj in frame.objects:
        box = obj.box
        if sigma_u > 0 and rng is not None:
            from .scene import clamp_box
            d = rng.normal(0.0, sigma_u, 4)
            box = clamp_box(box.x_min + d[0], box.y_min + d[1],
                            box.x_max + d[2], box.y_max + d[3], width, height)
        regions.append(AnnotatedRegion(frame.index, box, obj.class_label,
                                       obj.instance_id, source="user"))
    return regions


# --- user agents -------------------------------------------------------------

class UserAgent:
    """Decides, per displayed frame, whether to accept or to correct."""

    kind = "abstract"

    def provide_seed(self, frame: Frame, proposals) -> list[AnnotatedRegion]:
        raise NotImplementedError

    def review_annotation(self, frame: Frame, proposals) -> list[AnnotatedRegion] | None:
        """None = satisfied; otherwise the corrected regions."""
        raise NotImplementedError

    def review_prediction(self, frame: Frame, predictions: PredictionSet
                          ) -> list[AnnotatedRegion] | None:
        raise NotImplementedError

    def wants_abort(self) -> bool:
        return False


@dataclass(eq=False)
class OracleUser(UserAgent):
    """Simulated user that knows the ground truth.

    A frame is unsatisfactory when any displayed region/prediction carries a
    label other than its best-overlap ground-truth label, or when a
    ground-truth object is not covered by any displayed box at the IoU
    threshold. Corrections are the ground-truth regions, optionally with
    box noise sigma_u.
    """

    dataset: SceneDataset
    iou_thresh: float = 0.5
    sigma_u: float = 0.0
    seed: int = 0
    kind: str = "oracle"

    def __post_init__(self):
        self._rng = np.random.default_rng([self.seed, 4])

    def _gt(self, frame: Frame) -> list[AnnotatedRegion]:
        cfg = self.dataset.config
        return gt_regions_for_frame(frame, self.sigma_u, self._rng,
                                    cfg.width, cfg.height)

    def _satisfied(self, frame: Frame, displayed) -> bool:
        pairs = [(o.box, o.class_label) for o in frame.objects]
        for r in displayed:
            if r.label != best_label_for_box(r.box, pairs, self.iou_thresh):
                return False
        for obj in frame.objects:
            if not any(iou(obj.box, r.box) >= self.iou_thresh for r in displayed):
                return False
        return True

    def provide_seed(self, frame, proposals):
        return self._gt(frame)

    def review_annotation(self, frame, proposals):
        return None if self._satisfied(frame, proposals) else self._gt(frame)

    def review_prediction(self, frame, predictions):
        return None if self._satisfied(frame, predictions.items) else self._gt(frame)


@dataclass(eq=False)
class ScriptedUser(UserAgent):
    """Replays the user events of a recorded session trace."""

    events: list
    kind: str = "scripted"
    cursor: int = 0
    _abort: bool = False

    def _next(self, frame_index: int, expected_kinds) -> dict | None:
        if self.cursor >= len(self.events):
            self._abort = True
            return None
        event = self.events[self.cursor]
        self.cursor += 1
        if event["type"] not in expected_kinds or event["frame"] != frame_index:
            raise ValueError(
                f"trace mismatch at frame {frame_index}: got {event['type']!r} "
                f"for frame {event['frame']}")
        return event

    @staticmethod
    def _regions(event: dict) -> list[AnnotatedRegion]:
        return [AnnotatedRegion.from_record(rec) for rec in event["regions"]]

    def provide_seed(self, frame, proposals):
        event = self._next(frame.index, ("seed",))
        return self._regions(event) if event else []

    def review_annotation(self, frame, proposals):
        event = self._next(frame.index, ("accept", "correct"))
        if event is None or event["type"] == "accept":
            return None
        return self._regions(event)

    def review_prediction(self, frame, predictions):
        event = self._next(frame.index, ("accept", "reject"))
        if event is None or event["type"] == "accept":
            return None
        return self._regions(event)

    def wants_abort(self) -> bool:
        return self._abort


# --- interactive annotation (one window) -------------------------------------

@dataclass(eq=False)
class AnnotationResult:
    regions_by_frame: dict[int, list[AnnotatedRegion]]
    user_actions: int
    corrections: int
    aborted: bool = False


def interactive_annotation(frames: list[Frame],
                           detections_by_frame: dict[int, list[DetectionRecord]],
                           user: UserAgent, width: int, height: int,
                           params: PropagationParams = PropagationParams()
                           ) -> AnnotationResult:
    """Seed-then-propagate annotation of a contiguous frame range.

    The user annotates the first frame; the memory propagates to each later
    frame; the user corrects whenever the propagated regions are wrong. All
    frames of the range end up in the result.
    """
    if not frames:
        raise ValueError("empty frame range")
    indices = [f.index for f in frames]
    if indices != list(range(indices[0], indices[0] + len(indices))):
        raise ValueError("frame range must be contiguous")

    memory = TrackMemory(width=width, height=height, params=params)
    result = AnnotationResult(regions_by_frame={}, user_actions=0, corrections=0)

    first = frames[0]
    seed = user.provide_seed(first, [])
    if user.wants_abort():
        result.aborted = True
        return result
    result.user_actions += region_diff_actions([], seed)
    result.regions_by_frame[first.index] = seed
    seed_memory(memory, seed, detections_by_frame.get(first.index, []))

    for frame in frames[1:]:
        dets = detections_by_frame.get(frame.index, [])
        correlation = memory_read(dets, memory)
        proposals = assign_labels(dets, memory, correlation)
        corrected = user.review_annotation(frame, proposals)
        if user.wants_abort():
            result.aborted = True
            return result
        if corrected is None:
            by_instance = {e.instance_id: k for k, e in enumerate(memory.entries)}
            matches = {i: by_instance[r.instance_id]
                       for i, r in enumerate(proposals) if r.label != BACKGROUND}
            memory_write(dets, memory, matches)
            result.regions_by_frame[frame.index] = proposals
        else:
            result.user_actions += region_diff_actions(proposals, corrected)
            result.corrections += 1
            result.regions_by_frame[frame.index] = corrected
            seed_memory(memory, corrected, dets)
    return result


# --- evaluation ---------------------------------------------------------------

def evaluate_model(model: InductiveGraphModel, dataset: SceneDataset,
                   det_config: DetectorConfig, frame_indices,
                   iou_thresh: float = 0.5) -> MetricsReport:
    """Pool detections over the given frames and score the model against
    ground truth: mAP, balanced accuracy over node labels, fixation mapping."""
    cfg = dataset.config
    wanted = set(frame_indices)
    preds: list[ScoredBox] = []
    gts: list[LabeledBox] = []
    pred_labels: list[str] = []
    true_labels: list[str] = []
    fixation_outcomes: list[tuple[str, str]] = []
    fix_by_frame: dict[int, list] = {}
    for fx in dataset.fixations:
        fix_by_frame.setdefault(fx.frame_index, []).append(fx)
    for frame in dataset.frames:
        if frame.index not in wanted:
            continue
        dets = detect_regions(frame, det_config, cfg.width, cfg.height)
        graph = build_frame_graph(dets, cfg.width, cfg.height)
        prediction = forward(graph, model)
        truth = effective_labels(graph.records, frame.objects, iou_thresh)
        pred_labels.extend(prediction.labels)
        true_labels.extend(truth)
        for item in prediction:
            if item.label != BACKGROUND:
                preds.append(ScoredBox(item.box, item.label, item.score))
        gts.extend(LabeledBox(o.box, o.class_label) for o in frame.objects)
        for fx in fix_by_frame.get(frame.index, []):
            mapped = fixation_to_aoi(fx.x, fx.y, prediction)
            fixation_outcomes.append((mapped, fx.aoi_label))
    return build_metrics_report(preds, gts, pred_labels, true_labels,
                                fixation_outcomes)


# --- session reports -----------------------------------------------------------

@dataclass(eq=False)
class RoundReport:
    round_k: int
    frames_annotated: int
    pct_data: float
    train_time_s: float
    train_epochs: int
    user_actions: int
    metrics_whole: MetricsReport
    metrics_test: MetricsReport

    def to_record(self) -> dict:
        return {"kind": "round", "round": self.round_k,
                "frames_annotated": self.frames_annotated,
                "pct_data": self.pct_data,
                "train_time_s": self.train_time_s,
                "train_epochs": self.train_epochs,
                "user_actions": self.user_actions,
                "metrics_whole": self.metrics_whole.to_record(),
                "metrics_test": self.metrics_test.to_record()}


@dataclass(eq=False)
class SessionReport:
    protocol: str                   # "hil" | "cml"
    dataset_digest: str
    scene_seed: int
    detector_seed: int
    model_seed: int
    total_frames: int
    hil: dict
    rounds: list[RoundReport] = field(default_factory=list)
    user_actions: int = 0
    baseline_actions: int = 0
    aborted: bool = False
    finished: bool = False

    @property
    def action_ratio(self) -> float | None:
        if self.baseline_actions == 0:
            return None
        return self.user_actions / self.baseline_actions

    def header_record(self) -> dict:
        # how the user was driven (oracle/scripted/live) is trace provenance,
        # not session output; identical feedback must give identical reports
        return {"kind": "session_report", "schema_version": SCHEMA_VERSION,
                "protocol": self.protocol, "dataset_digest": self.dataset_digest,
                "scene_seed": self.scene_seed, "detector_seed": self.detector_seed,
                "model_seed": self.model_seed, "total_frames": self.total_frames,
                "hil": self.hil}

    def summary_record(self) -> dict:
        return {"kind": "summary", "rounds": len(self.rounds),
                "user_actions": self.user_actions,
                "baseline_actions": self.baseline_actions,
                "action_ratio": self.action_ratio, "aborted": self.aborted}

    def to_bytes(self) -> bytes:
        lines = [canonical_dumps(self.header_record())]
        lines.extend(canonical_dumps(r.to_record()) for r in self.rounds)
        if self.finished:
            lines.append(canonical_dumps(self.summary_record()))
        return ("\n".join(lines) + "\n").encode("utf-8")


def baseline_actions_for(frames) -> int:
    """Frame-by-frame annotation effort: one action per object per frame."""
    return sum(len(f.objects) for f in frames)


def count_user_actions(trace_events: list[dict], frames) -> dict:
    """Engagement proxy from a session trace: user actions vs the per-frame
    baseline over the same frames."""
    actions = sum(e.get("actions", 0) for e in trace_events
                  if e.get("type") in ("seed", "correct", "reject"))
    baseline = baseline_actions_for(frames)
    return {"user_actions": actions, "baseline_actions": baseline,
            "action_ratio": actions / baseline if baseline else None}


# --- the session engine ----------------------------------------------------------

@dataclass(eq=False)
class TrainJob:
    round_k: int
    samples: list
    class_labels: tuple[str, ...]
    config: TrainConfig
    det_config: DetectorConfig
    init_model: InductiveGraphModel | None
    hil: HilConfig
    dataset: SceneDataset
    frames_annotated: int
    user_actions: int


@dataclass(eq=False)
class TrainResult:
    round_k: int
    model: InductiveGraphModel
    report: RoundReport


class HilEngine:
    """Explicit state machine for one session; see module docstring."""

    def __init__(self, dataset: SceneDataset, detector: DetectorConfig,
                 config: HilConfig, model_seed: int, mode: str = "oracle"):
        config.validate()
        detector.validate()
        if model_seed < 0:
            raise ValueError("model seed must be non-negative")
        cfg = dataset.config
        self.dataset = dataset
        self.detector = detector
        self.config = config
        self.model_seed = model_seed
        self.mode = mode
        self.n_frames = cfg.n_frames
        self.n_init = max(1, round(config.t_initial_s * cfg.fps))
        self.n_update = max(1, round(config.t_update_s * cfg.fps))
        if self.n_init >= self.n_frames:
            raise ValueError("initial annotation window must be shorter than the video")
        self.class_labels = tuple(dataset.class_labels + [BACKGROUND])

        self.phase = PHASE_SEED
        self.frame_index = 0
        self.window: tuple[int, int] = (0, self.n_init)
        self.window_is_initial = True
        self.round_k = 0               # index of the next training round
        self.update_time = 0           # completed feedback windows
        self.memory: TrackMemory | None = TrackMemory(
            width=cfg.width, height=cfg.height, params=config.propagation)
        self.pending_proposals: list[AnnotatedRegion] = []
        self.samples: list[tuple[int, FrameGraph, list[str]]] = []
        self.annotated_frames: set[int] = set()
        self.user_actions = 0
        self.model = InductiveGraphModel.init(
            model_seed, 4 + cfg.d_app, config.hidden_dims, self.class_labels,
            config.aggregator)
        self._det_cache: dict[tuple[int, int], list[DetectionRecord]] = {}
        self._training_started = False

        digest = hashlib.sha256(dataset_to_bytes(dataset)).hexdigest()
        self.report = SessionReport(
            protocol="hil", dataset_digest=digest, scene_seed=cfg.seed,
            detector_seed=detector.seed, model_seed=model_seed,
            total_frames=self.n_frames, hil=config.to_record())
        self.trace: list[dict] = [{"kind": "event", "type": "session_start",
                                   "time_s": 0.0}]

    # -- detector / model access

    def detector_config_now(self) -> DetectorConfig:
        return self.config.detector_schedule.config_for_round(self.detector,
                                                              self.update_time)

    def detections_for(self, frame_index: int) -> list[DetectionRecord]:
        key = (self.update_time, frame_index)
        if key not in self._det_cache:
            frame = self.dataset.frames[frame_index]
            cfg = self.dataset.config
            self._det_cache[key] = detect_regions(frame, self.detector_config_now(),
                                                  cfg.width, cfg.height)
        return self._det_cache[key]

    def current_frame(self) -> Frame:
        return self.dataset.frames[self.frame_index]

    def current_predictions(self) -> PredictionSet:
        cfg = self.dataset.config
        graph = build_frame_graph(self.detections_for(self.frame_index),
                                  cfg.width, cfg.height)
        return forward(graph, self.model)

    def budget_left(self) -> bool:
        return self.update_time < self.config.max_update

    def _now(self) -> float:
        return self.frame_index / self.dataset.config.fps

    def _emit(self, event_type: str, **payload) -> None:
        self.trace.append({"kind": "event", "type": event_type,
                           "time_s": self._now(), **payload})

    # -- window mechanics

    def _arrive_window_frame(self) -> None:
        dets = self.detections_for(self.frame_index)
        correlation = memory_read(dets, self.memory)
        self.pending_proposals = assign_labels(dets, self.memory, correlation)

    def _commit_window_frame(self, regions: list[AnnotatedRegion]) -> None:
        dets = self.detections_for(self.frame_index)
        cfg = self.dataset.config
        graph = build_frame_graph(dets, cfg.width, cfg.height)
        labels = label_detections(graph.records, regions, self.config.iou_thresh)
        self.samples.append((self.frame_index, graph, labels))
        self.annotated_frames.add(self.frame_index)

    def _advance_window(self) -> bool:
        """Move to the next window frame; returns True when the window closed
        and a retrain is now pending."""
        self.frame_index += 1
        if self.frame_index >= self.window[1]:
            if not self.window_is_initial:
                self.update_time += 1
            self._emit("window_end", start=self.window[0], end=self.window[1])
            self.phase = PHASE_TRAINING
            self._training_started = False
            self.pending_proposals = []
            return True
        self.phase = PHASE_ANNOTATING
        self._arrive_window_frame()
        return False

    # -- user commands

    def accept(self) -> dict:
        if self.phase == PHASE_SEED:
            raise ValueError("the first frame of a window needs a user annotation")
        if self.phase == PHASE_ANNOTATING:
            dets = self.detections_for(self.frame_index)
            by_instance = {e.instance_id: k for k, e in enumerate(self.memory.entries)}
            matches = {i: by_instance[r.instance_id]
                       for i, r in enumerate(self.pending_proposals)
                       if r.label != BACKGROUND}
            memory_write(dets, self.memory, matches)
            self._emit("accept", frame=self.frame_index, phase=PHASE_ANNOTATING)
            self._commit_window_frame(self.pending_proposals)
            retrain = self._advance_window()
            return {"accepted": True, "retrain_scheduled": retrain,
                    "frame_index": self.frame_index, "phase": self.phase}
        if self.phase == PHASE_STREAMING:
            self._emit("accept", frame=self.frame_index, phase=PHASE_STREAMING)
            self.frame_index += 1
            if self.frame_index >= self.n_frames:
                self._finish()
            return {"accepted": True, "retrain_scheduled": False,
                    "frame_index": self.frame_index, "phase": self.phase}
        raise ValueError(f"cannot accept during phase {self.phase!r}")

    def feedback(self, regions: list[AnnotatedRegion]) -> dict:
        for r in regions:
            if r.frame_index != self.frame_index:
                raise ValueError(f"feedback region for frame {r.frame_index} "
                                 f"but session is at frame {self.frame_index}")
            if r.label != BACKGROUND and r.label not in self.class_labels:
                raise ValueError(f"unknown label {r.label!r}")
        if self.phase == PHASE_SEED:
            actions = region_diff_actions([], regions)
            self.user_actions += actions
            self._emit("seed", frame=self.frame_index,
                       regions=[r.to_record() for r in regions], actions=actions)
            self._commit_window_frame(regions)
            seed_memory(self.memory, regions, self.detections_for(self.frame_index))
            retrain = self._advance_window()
            return {"accepted": True, "retrain_scheduled": retrain,
                    "frame_index": self.frame_index, "phase": self.phase}
        if self.phase == PHASE_ANNOTATING:
            actions = region_diff_actions(self.pending_proposals, regions)
            self.user_actions += actions
            self._emit("correct", frame=self.frame_index,
                       regions=[r.to_record() for r in regions], actions=actions)
            self._commit_window_frame(regions)
            seed_memory(self.memory, regions, self.detections_for(self.frame_index))
            retrain = self._advance_window()
            return {"accepted": True, "retrain_scheduled": retrain,
                    "frame_index": self.frame_index, "phase": self.phase}
        if self.phase == PHASE_STREAMING:
            if not self.budget_left():
                return {"accepted": False, "retrain_scheduled": False,
                        "reason": "feedback budget exhausted",
                        "frame_index": self.frame_index, "phase": self.phase}
            actions = region_diff_actions(self.current_predictions().items, regions)
            self.user_actions += actions
            self._emit("reject", frame=self.frame_index,
                       regions=[r.to_record() for r in regions], actions=actions)
            self.window = (self.frame_index,
                           min(self.frame_index + self.n_update, self.n_frames))
            self.window_is_initial = False
            cfg = self.dataset.config
            self.memory = TrackMemory(width=cfg.width, height=cfg.height,
                                      params=self.config.propagation)
            self._commit_window_frame(regions)
            seed_memory(self.memory, regions, self.detections_for(self.frame_index))
            retrain = self._advance_window()
            return {"accepted": True, "retrain_scheduled": retrain,
                    "frame_index": self.frame_index, "phase": self.phase}
        raise ValueError(f"cannot take feedback during phase {self.phase!r}")

    # -- training

    def begin_training(self) -> TrainJob:
        if self.phase != PHASE_TRAINING or self._training_started:
            raise ValueError("no training pending")
        self._training_started = True
        seed = self.model_seed * 1000 + self.round_k
        config = replace(self.config.retrain, seed=seed)
        return TrainJob(round_k=self.round_k,
                        samples=[(g, list(labels)) for _, g, labels in self.samples],
                        class_labels=self.class_labels, config=config,
                        det_config=self.detector_config_now(),
                        init_model=self.model if self.config.warm_start else None,
                        hil=self.config, dataset=self.dataset,
                        frames_annotated=len(self.annotated_frames),
                        user_actions=self.user_actions)

    @staticmethod
    def run_training_job(job: TrainJob) -> TrainResult:
        """Pure function of the job snapshot; safe to run off-thread."""
        model = fit(job.samples, job.class_labels, job.config,
                    hidden_dims=job.hil.hidden_dims, aggregator=job.hil.aggregator,
                    init_model=job.init_model)
        epochs = len(model.train_losses)
        train_time_s = epochs * len(job.samples) / TRAIN_RATE_GRAPH_EPOCHS_PER_S
        n = job.dataset.config.n_frames
        test_start = int(job.hil.test_split * n)
        metrics_whole = evaluate_model(model, job.dataset, job.det_config,
                                       range(n), job.hil.iou_thresh)
        metrics_test = evaluate_model(model, job.dataset, job.det_config,
                                      range(test_start, n), job.hil.iou_thresh)
        report = RoundReport(round_k=job.round_k,
                             frames_annotated=job.frames_annotated,
                             pct_data=job.frames_annotated / n,
                             train_time_s=train_time_s, train_epochs=epochs,
                             user_actions=job.user_actions,
                             metrics_whole=metrics_whole, metrics_test=metrics_test)
        return TrainResult(round_k=job.round_k, model=model, report=report)

    def complete_training(self, result: TrainResult) -> None:
        if self.phase != PHASE_TRAINING or not self._training_started:
            raise ValueError("no training in flight")
        if result.round_k != self.round_k:
            raise ValueError("stale training result")
        self.model = result.model          # atomic snapshot swap
        self.report.rounds.append(result.report)
        self._emit("train", round=self.round_k, frames=result.report.frames_annotated,
                   epochs=result.report.train_epochs,
                   train_time_s=result.report.train_time_s)
        self.round_k += 1
        self._training_started = False
        if self.frame_index >= self.n_frames:
            self._finish()
        else:
            self.phase = PHASE_STREAMING

    def train_now(self) -> None:
        self.complete_training(self.run_training_job(self.begin_training()))

    def _finish(self) -> None:
        self.phase = PHASE_DONE
        self.report.user_actions = self.user_actions
        self.report.baseline_actions = baseline_actions_for(self.dataset.frames)
        self.report.finished = True
        self._emit("session_end")

    def abort(self) -> None:
        self.report.aborted = True
        self._finish()

    # -- trace serialization

    def trace_header(self) -> dict:
        from .proposals import detector_to_record
        return {"kind": "session_trace", "schema_version": SCHEMA_VERSION,
                "dataset_digest": self.report.dataset_digest,
                "mode": self.mode, "model_seed": self.model_seed,
                "detector": detector_to_record(self.detector),
                "hil": self.config.to_record()}

    def user_events(self) -> list[dict]:
        return [e for e in self.trace
                if e.get("type") in ("seed", "correct", "accept", "reject")]


# --- drivers -----------------------------------------------------------------

def run_hil_session(dataset: SceneDataset, detector: DetectorConfig,
                    config: HilConfig, user: UserAgent,
                    model_seed: int = 0) -> tuple[SessionReport, HilEngine]:
    """Drive a full session with an in-process user (oracle or scripted)."""
    engine = HilEngine(dataset, detector, config, model_seed,
                       mode="oracle" if user.kind == "oracle" else user.kind)
    while engine.phase != PHASE_DONE:
        if user.wants_abort():
            engine.abort()
            break
        if engine.phase == PHASE_TRAINING:
            engine.train_now()
        elif engine.phase == PHASE_SEED:
            regions = user.provide_seed(engine.current_frame(), [])
            if user.wants_abort():
                engine.abort()
                break
            engine.feedback(regions)
        elif engine.phase == PHASE_ANNOTATING:
            corrected = user.review_annotation(engine.current_frame(),
                                               engine.pending_proposals)
            if user.wants_abort():
                engine.abort()
                break
            engine.accept() if corrected is None else engine.feedback(corrected)
        elif engine.phase == PHASE_STREAMING:
            decision = None
            if engine.budget_left():
                decision = user.review_prediction(engine.current_frame(),
                                                  engine.current_predictions())
                if user.wants_abort():
                    engine.abort()
                    break
            engine.accept() if decision is None else engine.feedback(decision)
    return engine.report, engine


def run_cml_baseline(dataset: SceneDataset, detector: DetectorConfig,
                     config: HilConfig, model_seed: int = 0,
                     split: float = 0.7) -> SessionReport:
    """Conventional fixed-split training on ground-truth labels: train on the
    first `split` of frames, evaluate on the rest and on the whole video."""
    if len(dataset.frames) < 10:
        raise ValueError("CML baseline needs at least 10 frames")
    if not 0.0 < split < 1.0:
        raise ValueError("split must leave a non-empty test set")
    config.validate()
    detector.validate()
    cfg = dataset.config
    n = cfg.n_frames
    n_train = int(split * n)
    if n_train < 1 or n_train >= n:
        raise ValueError("split produces an empty train or test set")
    class_labels = tuple(dataset.class_labels + [BACKGROUND])
    samples = []
    for frame in dataset.frames[:n_train]:
        dets = detect_regions(frame, detector, cfg.width, cfg.height)
        graph = build_frame_graph(dets, cfg.width, cfg.height)
        labels = effective_labels(graph.records, frame.objects, config.iou_thresh)
        samples.append((graph, labels))
    train_config = replace(config.retrain, seed=model_seed)
    model = fit(samples, class_labels, train_config,
                hidden_dims=config.hidden_dims, aggregator=config.aggregator)
    epochs = len(model.train_losses)
    metrics_whole = evaluate_model(model, dataset, detector, range(n),
                                   config.iou_thresh)
    metrics_test = evaluate_model(model, dataset, detector, range(n_train, n),
                                  config.iou_thresh)
    digest = hashlib.sha256(dataset_to_bytes(dataset)).hexdigest()
    actions = baseline_actions_for(dataset.frames[:n_train])
    report = SessionReport(
        protocol="cml", dataset_digest=digest, scene_seed=cfg.seed,
        detector_seed=detector.seed, model_seed=model_seed, total_frames=n,
        hil=config.to_record(),
        rounds=[RoundReport(
            round_k=0, frames_annotated=n_train, pct_data=n_train / n,
            train_time_s=epochs * len(samples) / TRAIN_RATE_GRAPH_EPOCHS_PER_S,
            train_epochs=epochs, user_actions=actions,
            metrics_whole=metrics_whole, metrics_test=metrics_test)],
        user_actions=actions,
        baseline_actions=baseline_actions_for(dataset.frames))
    report.finished = True
    return report
