"""HTTP session service: the live counterpart of the CLI session driver.

Each session wraps the same engine the CLI uses. Mutating commands
(feedback, advance) serialize through a per-session lock; training runs on
a background thread against an immutable job snapshot and the new model is
swapped in atomically, so reads never see a half-trained model. While a
retrain is in flight, mutating commands are refused with a 409-style error
record and the client polls /metrics until the next round appears.
"""

from __future__ import annotations

import base64
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel, Field

from dataclasses import dataclass

from .benchmark import benchmark_detector_config, benchmark_hil_config
from .hil import (PHASE_ANNOTATING, PHASE_DONE, PHASE_SEED, PHASE_STREAMING,
                  PHASE_TRAINING, HilEngine, OracleUser, hil_config_from_record)
from .metrics import fixation_to_aoi
from .propagation import AnnotatedRegion
from .proposals import detector_from_record
from .render import render_frame_png
from .scene import BoundingBox, load_dataset
from .storage import DatasetFormatError


@dataclass(eq=False)
class _ShownBox:
    box: BoundingBox
    label: str


class RegionPayload(BaseModel):
    box: list[float] = Field(min_length=4, max_length=4)
    label: str
    instance: int


class FeedbackPayload(BaseModel):
    frame: int
    regions: list[RegionPayload]


class SessionCreatePayload(BaseModel):
    dataset_path: str
    detector: dict | None = None
    hil: dict | None = None
    model_seed: int = 0
    mode: str = "external"          # "external" | "oracle"
    expose_gt: bool = True


class Session:
    def __init__(self, session_id: str, engine: HilEngine, expose_gt: bool,
                 report_path: Path | None = None):
        self.id = session_id
        self.engine = engine
        self.expose_gt = expose_gt
        self.report_path = report_path
        self.lock = threading.Lock()
        self.worker: threading.Thread | None = None

    def persist_report(self) -> None:
        """Mirror the current report to disk; caller holds the lock."""
        if self.report_path is None:
            return
        self.report_path.parent.mkdir(parents=True, exist_ok=True)
        self.report_path.write_bytes(self.engine.report.to_bytes())

    def launch_training(self) -> None:
        """Run the pending retrain off the request path; atomic model swap."""
        with self.lock:
            job = self.engine.begin_training()

        def work():
            result = HilEngine.run_training_job(job)
            with self.lock:
                self.engine.complete_training(result)
                self.persist_report()

        self.worker = threading.Thread(target=work, daemon=True)
        self.worker.start()


def create_app(data_dir: Path, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="gazeloop session service")
    sessions: dict[str, Session] = {}
    counter = {"next": 1}
    registry_lock = threading.Lock()

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail={"error": "unknown session",
                                        "session_id": session_id})
        return session

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.post("/sessions")
    def create_session(payload: SessionCreatePayload):
        path = (data_dir / payload.dataset_path).resolve()
        if not str(path).startswith(str(data_dir.resolve())):
            raise HTTPException(status_code=400,
                                detail={"error": "dataset path escapes data dir"})
        try:
            dataset = load_dataset(path)
        except (FileNotFoundError, DatasetFormatError) as exc:
            raise HTTPException(status_code=400,
                                detail={"error": f"cannot load dataset: {exc}"})
        detector = (detector_from_record(payload.detector) if payload.detector
                    else benchmark_detector_config())
        hil = (hil_config_from_record(payload.hil) if payload.hil
               else benchmark_hil_config())
        if payload.mode not in ("external", "oracle"):
            raise HTTPException(status_code=400,
                                detail={"error": f"unknown mode {payload.mode!r}"})
        try:
            engine = HilEngine(dataset, detector, hil, payload.model_seed,
                               mode=payload.mode)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)})
        with registry_lock:
            session_id = f"s{counter['next']}"
            counter["next"] += 1
            report_path = data_dir / "sessions" / f"{session_id}-report.jsonl"
            session = Session(session_id, engine, payload.expose_gt, report_path)
            sessions[session_id] = session
        if payload.mode == "oracle":
            def run_oracle():
                # the oracle driver owns the engine for the whole session
                with session.lock:
                    _drive_oracle(engine, OracleUser(dataset))
                    session.persist_report()
            threading.Thread(target=run_oracle, daemon=True).start()
        return {"session_id": session_id}

    def _region_list(regions):
        return [{"box": list(r.box.as_tuple()), "label": r.label,
                 "instance": r.instance_id, "source": r.source}
                for r in regions]

    @app.get("/sessions/{session_id}/frames/{frame_index}")
    def get_frame(session_id: str, frame_index: int):
        session = get_session(session_id)
        engine = session.engine
        dataset = engine.dataset
        if not 0 <= frame_index < len(dataset.frames):
            raise HTTPException(status_code=400,
                                detail={"error": "frame index out of range",
                                        "frame": frame_index})
        with session.lock:
            frame = dataset.frames[frame_index]
            cfg = dataset.config
            phase = engine.phase
            png = render_frame_png(frame, cfg.width, cfg.height,
                                   engine.class_labels)
            dets = engine.detections_for(frame_index)
            graph_preds = _frame_predictions(engine, frame_index)
            fixation = dataset.fixation_for(frame_index)
            proposals = (engine.pending_proposals
                         if phase == PHASE_ANNOTATING and
                         frame_index == engine.frame_index else [])
            body = {
                "frame_index": frame_index,
                "time_s": frame.time_s,
                "width": cfg.width,
                "height": cfg.height,
                "phase": phase,
                "current_frame_index": engine.frame_index,
                "round": engine.round_k,
                "feedback_budget_left": engine.config.max_update - engine.update_time,
                "class_labels": list(engine.class_labels),
                "image_png_base64": base64.b64encode(png).decode("ascii"),
                "detection_count": len(dets),
                "predictions": graph_preds,
                "proposals": _region_list(proposals),
                "fixation": ({"x": fixation.x, "y": fixation.y}
                             if fixation else None),
                "fixation_aoi": None,
                "ground_truth_available": session.expose_gt,
            }
            if fixation is not None:
                shown = [_ShownBox(BoundingBox(*p["box"]), p["label"])
                         for p in graph_preds]
                body["fixation_aoi"] = fixation_to_aoi(fixation.x, fixation.y,
                                                       shown)
            if session.expose_gt:
                body["ground_truth"] = [
                    {"box": list(o.box.as_tuple()), "label": o.class_label,
                     "instance": o.instance_id} for o in frame.objects]
            return body

    def _frame_predictions(engine: HilEngine, frame_index: int):
        from .graphs import build_frame_graph
        from .network import forward
        cfg = engine.dataset.config
        graph = build_frame_graph(engine.detections_for(frame_index),
                                  cfg.width, cfg.height)
        prediction = forward(graph, engine.model)
        return [{"box": list(item.box.as_tuple()), "label": item.label,
                 "score": item.score, "probs": [float(v) for v in item.probs]}
                for item in prediction]

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, payload: FeedbackPayload):
        session = get_session(session_id)
        engine = session.engine
        with session.lock:
            if engine.phase == PHASE_TRAINING:
                raise HTTPException(status_code=409,
                                    detail={"error": "training in progress"})
            if engine.phase == PHASE_DONE:
                raise HTTPException(status_code=409,
                                    detail={"error": "session finished"})
            if payload.frame != engine.frame_index:
                raise HTTPException(
                    status_code=400,
                    detail={"error": "feedback must target the current frame",
                            "frame": payload.frame,
                            "current_frame_index": engine.frame_index})
            try:
                regions = [AnnotatedRegion(payload.frame,
                                           BoundingBox(*r.box), r.label,
                                           r.instance, source="user")
                           for r in payload.regions]
            except ValueError as exc:
                raise HTTPException(status_code=400,
                                    detail={"error": f"bad region: {exc}"})
            try:
                out = engine.feedback(regions)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc)})
            if engine.phase == PHASE_DONE:
                session.persist_report()
        if out.get("retrain_scheduled"):
            session.launch_training()
        return out

    @app.post("/sessions/{session_id}/advance")
    def post_advance(session_id: str):
        session = get_session(session_id)
        engine = session.engine
        with session.lock:
            if engine.phase == PHASE_TRAINING:
                raise HTTPException(status_code=409,
                                    detail={"error": "training in progress"})
            if engine.phase == PHASE_DONE:
                return {"frame_index": engine.frame_index, "phase": PHASE_DONE}
            try:
                out = engine.accept()
            except ValueError as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc)})
            if engine.phase == PHASE_DONE:
                session.persist_report()
        if out.get("retrain_scheduled"):
            session.launch_training()
        return out

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        session = get_session(session_id)
        with session.lock:
            body = session.engine.report.to_bytes()
        return Response(content=body, media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = get_session(session_id)
        engine = session.engine
        with session.lock:
            # the model snapshot id is the number of completed retrains:
            # it only ever moves forward, one step per atomic swap
            pending = 1 if engine.phase == PHASE_TRAINING else 0
            return {"session_id": session.id, "phase": engine.phase,
                    "frame_index": engine.frame_index,
                    "total_frames": engine.n_frames,
                    "round": engine.round_k,
                    "model_snapshot_id": engine.round_k,
                    "pending_feedback_jobs": pending,
                    "update_time": engine.update_time,
                    "feedback_budget_left":
                        engine.config.max_update - engine.update_time,
                    "window": list(engine.window),
                    "user_actions": engine.user_actions,
                    "rounds_reported": len(engine.report.rounds)}

    return app


def _drive_oracle(engine: HilEngine, user: OracleUser) -> None:
    while engine.phase != PHASE_DONE:
        if engine.phase == PHASE_TRAINING:
            engine.train_now()
        elif engine.phase == PHASE_SEED:
            engine.feedback(user.provide_seed(engine.current_frame(), []))
        elif engine.phase == PHASE_ANNOTATING:
            corrected = user.review_annotation(engine.current_frame(),
                                               engine.pending_proposals)
            engine.accept() if corrected is None else engine.feedback(corrected)
        elif engine.phase == PHASE_STREAMING:
            decision = None
            if engine.budget_left():
                decision = user.review_prediction(engine.current_frame(),
                                                  engine.current_predictions())
            engine.accept() if decision is None else engine.feedback(decision)
