"""Engine protocol edges: immediate rejection, budget exhaustion, scripted
trace mismatches, noisy oracle corrections."""

import numpy as np
import pytest

from gazeloop.hil import (HilConfig, HilEngine, OracleUser, ScriptedUser,
                          run_hil_session)
from gazeloop.network import TrainConfig
from gazeloop.propagation import AnnotatedRegion
from gazeloop.proposals import DetectorConfig, DetectorSchedule
from gazeloop.scene import (BoundingBox, MotionSpec, ObjectSpec, SceneConfig,
                            generate_scene)


def scene(n_frames=40, seed=9):
    objects = (
        ObjectSpec(label="device", size=(36.0, 30.0), start=(90.0, 120.0),
                   motion=MotionSpec(kind="linear", velocity=(0.5, 0.0)),
                   mirrored_pair=True),
        ObjectSpec(label="book", size=(44.0, 34.0), start=(160.0, 50.0)),
    )
    return generate_scene(SceneConfig(n_frames=n_frames, fps=30.0, width=320,
                                      height=240, objects=objects, d_app=8,
                                      seed=seed))


def config(max_update=2):
    return HilConfig(t_initial_s=0.2, t_update_s=0.2, max_update=max_update,
                     retrain=TrainConfig(epochs=30, lr=0.03),
                     hidden_dims=(12, 12),
                     detector_schedule=DetectorSchedule(decay=0.6))


class RejectEverythingUser(OracleUser):
    """Oracle that is never satisfied while streaming: every feedback window
    opens back-to-back until the budget runs out."""

    def review_prediction(self, frame, predictions):
        return self._gt(frame)


class TestProtocolEdges:
    def test_back_to_back_windows_until_budget_exhausted(self):
        ds = scene()
        user = RejectEverythingUser(ds)
        report, engine = run_hil_session(ds, DetectorConfig(seed=1), config(2),
                                         user, model_seed=1)
        # initial round + exactly max_update feedback rounds
        assert len(report.rounds) == 3
        assert engine.update_time == 2
        assert engine.phase == "done"
        # streaming continued to the end after the budget ran out
        assert engine.frame_index == len(ds.frames)

    def test_noisy_oracle_corrections_still_deterministic(self):
        ds = scene()
        detector = DetectorConfig(sigma_loc=3.0, p_miss=0.15, seed=2)
        a, _ = run_hil_session(ds, detector, config(1),
                               OracleUser(ds, sigma_u=2.0, seed=4), model_seed=1)
        b, _ = run_hil_session(ds, detector, config(1),
                               OracleUser(ds, sigma_u=2.0, seed=4), model_seed=1)
        assert a.to_bytes() == b.to_bytes()

    def test_noisy_corrections_boxes_stay_in_frame(self):
        ds = scene()
        user = OracleUser(ds, sigma_u=25.0, seed=4)
        regions = user.provide_seed(ds.frames[0], [])
        for r in regions:
            assert 0.0 <= r.box.x_min < r.box.x_max <= ds.config.width
            assert 0.0 <= r.box.y_min < r.box.y_max <= ds.config.height

    def test_scripted_user_frame_mismatch_raises(self):
        ds = scene()
        events = [{"type": "seed", "frame": 3, "regions": []}]
        with pytest.raises(ValueError, match="trace mismatch"):
            run_hil_session(ds, DetectorConfig(seed=1), config(1),
                            ScriptedUser(events=events), model_seed=1)

    def test_scripted_user_exhausted_events_aborts(self):
        ds = scene()
        gt = [AnnotatedRegion(0, o.box, o.class_label, o.instance_id, "user")
              for o in ds.frames[0].objects]
        events = [{"type": "seed", "frame": 0,
                   "regions": [r.to_record() for r in gt]}]
        report, engine = run_hil_session(ds, DetectorConfig(seed=1), config(1),
                                         ScriptedUser(events=events), model_seed=1)
        assert report.aborted
        assert engine.phase == "done"

    def test_training_lifecycle_guards(self):
        ds = scene()
        engine = HilEngine(ds, DetectorConfig(seed=1), config(0), model_seed=1)
        with pytest.raises(ValueError):
            engine.begin_training()  # nothing pending yet
        user = OracleUser(ds)
        engine.feedback(user.provide_seed(engine.current_frame(), []))
        while engine.phase == "annotating":
            engine.accept()
        assert engine.phase == "training"
        job = engine.begin_training()
        with pytest.raises(ValueError):
            engine.begin_training()  # already in flight
        result = HilEngine.run_training_job(job)
        engine.complete_training(result)
        with pytest.raises(ValueError):
            engine.complete_training(result)  # already consumed

    def test_unknown_label_in_feedback_rejected(self):
        ds = scene()
        engine = HilEngine(ds, DetectorConfig(seed=1), config(1), model_seed=1)
        bad = [AnnotatedRegion(0, BoundingBox(0, 0, 10, 10), "no-such-class",
                               1, "user")]
        with pytest.raises(ValueError, match="unknown label"):
            engine.feedback(bad)
