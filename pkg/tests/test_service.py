"""HTTP session service: endpoint contracts, live feedback protocol, and
CLI/service replay equivalence."""

import base64
import json
import time

import pytest
from fastapi.testclient import TestClient

from gazeloop.benchmark import benchmark_hil_config
from gazeloop.hil import OracleUser, run_hil_session
from gazeloop.network import TrainConfig
from gazeloop.proposals import DetectorConfig, detector_to_record
from gazeloop.scene import (MotionSpec, ObjectSpec, SceneConfig, generate_scene,
                            save_dataset)
from gazeloop.service import create_app

DETECTOR = DetectorConfig(sigma_loc=3.0, p_miss=0.1, lambda_fp=0.4,
                          sigma_descriptor=0.4, seed=2)


def service_scene(n_frames=60, seed=31):
    objects = (
        ObjectSpec(label="device", size=(36.0, 30.0), start=(90.0, 120.0),
                   motion=MotionSpec(kind="linear", velocity=(0.8, 0.0)),
                   mirrored_pair=True),
        ObjectSpec(label="book", size=(44.0, 34.0), start=(160.0, 50.0)),
    )
    return generate_scene(SceneConfig(
        n_frames=n_frames, fps=30.0, width=320, height=240, objects=objects,
        d_app=8, sigma_app=0.0, sigma_cam=1.0, seed=seed))


def service_hil(max_update=2, epochs=40):
    from dataclasses import replace
    base = benchmark_hil_config()
    return replace(base, t_initial_s=0.2, t_update_s=0.2, max_update=max_update,
                   retrain=TrainConfig(epochs=epochs, lr=0.03),
                   hidden_dims=(16, 16))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("service-data")
    save_dataset(service_scene(), d / "scene.jsonl")
    return d


@pytest.fixture()
def client(data_dir):
    app = create_app(data_dir)
    with TestClient(app) as c:
        yield c


def create_session(client, **overrides):
    payload = {"dataset_path": "scene.jsonl",
               "detector": detector_to_record(DETECTOR),
               "hil": service_hil().to_record(),
               "model_seed": 3, "mode": "external", "expose_gt": True}
    payload.update(overrides)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


def wait_not_training(client, sid, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/sessions/{sid}/state").json()
        if state["phase"] != "training":
            return state
        time.sleep(0.02)
    raise TimeoutError("training did not finish")


class TestBasics:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.text == "ok"

    def test_frame_zero_prediction_count_matches_detections(self, client):
        sid = create_session(client)
        resp = client.get(f"/sessions/{sid}/frames/0")
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["predictions"]) == body["detection_count"]
        assert body["phase"] == "seed"
        assert body["ground_truth_available"] is True
        assert len(body["ground_truth"]) == 3
        png = base64.b64decode(body["image_png_base64"])
        assert png[:8] == b"\x89PNG\r\n\x1a\n"
        assert body["fixation"] is not None
        assert "fixation_aoi" in body

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/frames/0").status_code == 404
        assert client.post("/sessions/nope/advance").status_code == 404
        resp = client.post("/sessions/nope/feedback",
                           json={"frame": 0, "regions": []})
        assert resp.status_code == 404

    def test_malformed_payload_field_diagnostics(self, client):
        sid = create_session(client)
        resp = client.post(f"/sessions/{sid}/feedback",
                           json={"frame": 0, "regions": [{"box": [1, 2], "label": "x",
                                                          "instance": 0}]})
        assert resp.status_code == 422
        detail = resp.json()["detail"]
        assert any("box" in str(item.get("loc")) for item in detail)

    def test_bad_dataset_path_rejected(self, client):
        resp = client.post("/sessions", json={"dataset_path": "../escape.jsonl"})
        assert resp.status_code == 400

    def test_frame_out_of_range(self, client):
        sid = create_session(client)
        assert client.get(f"/sessions/{sid}/frames/9999").status_code == 400

    def test_advance_refused_at_seed_phase(self, client):
        sid = create_session(client)
        resp = client.post(f"/sessions/{sid}/advance")
        assert resp.status_code == 400


def gt_regions_payload(body):
    return [{"box": g["box"], "label": g["label"], "instance": g["instance"]}
            for g in body["ground_truth"]]


class TestLiveProtocol:
    def test_seed_window_train_and_round_appears(self, client):
        sid = create_session(client)
        body = client.get(f"/sessions/{sid}/frames/0").json()
        resp = client.post(f"/sessions/{sid}/feedback",
                           json={"frame": 0, "regions": gt_regions_payload(body)})
        assert resp.status_code == 200
        out = resp.json()
        assert out["accepted"] is True
        # accept the remaining window frames (window = 6 frames at 0.2 s)
        while not out.get("retrain_scheduled"):
            out = client.post(f"/sessions/{sid}/advance").json()
        state = wait_not_training(client, sid)
        assert state["rounds_reported"] == 1
        assert state["phase"] == "streaming"
        metrics = client.get(f"/sessions/{sid}/metrics")
        lines = metrics.text.strip().split("\n")
        assert json.loads(lines[0])["kind"] == "session_report"
        assert json.loads(lines[1])["kind"] == "round"

    def test_feedback_wrong_frame_rejected(self, client):
        sid = create_session(client)
        resp = client.post(f"/sessions/{sid}/feedback",
                           json={"frame": 5, "regions": []})
        assert resp.status_code == 400
        assert "current_frame_index" in str(resp.json()["detail"])

    def test_mutations_refused_while_training(self, client):
        sid = create_session(client, hil=service_hil(epochs=4000).to_record())
        body = client.get(f"/sessions/{sid}/frames/0").json()
        out = client.post(f"/sessions/{sid}/feedback",
                          json={"frame": 0,
                                "regions": gt_regions_payload(body)}).json()
        while not out.get("retrain_scheduled"):
            out = client.post(f"/sessions/{sid}/advance").json()
        # training now runs in the background; mutations must be refused but
        # reads must still work
        codes = set()
        for _ in range(20):
            state = client.get(f"/sessions/{sid}/state").json()
            if state["phase"] != "training":
                break
            codes.add(client.post(f"/sessions/{sid}/advance").status_code)
            assert client.get(f"/sessions/{sid}/frames/0").status_code == 200
        if codes:
            assert codes == {409}
        wait_not_training(client, sid, timeout=120)


class TestReplayEquivalence:
    def test_http_replay_matches_cli_report(self, client):
        # in-process oracle session produces the reference report + trace
        dataset = service_scene()
        report, engine = run_hil_session(dataset, DETECTOR, service_hil(),
                                         OracleUser(dataset), model_seed=3)
        reference = report.to_bytes()
        events = engine.user_events()

        sid = create_session(client)
        for event in events:
            wait_not_training(client, sid)
            if event["type"] == "accept":
                resp = client.post(f"/sessions/{sid}/advance")
            else:
                regions = [{"box": r["box"], "label": r["label"],
                            "instance": r["instance"]}
                           for r in event["regions"]]
                resp = client.post(f"/sessions/{sid}/feedback",
                                   json={"frame": event["frame"],
                                         "regions": regions})
            assert resp.status_code == 200, resp.text
        state = wait_not_training(client, sid)
        assert state["phase"] == "done"
        served = client.get(f"/sessions/{sid}/metrics").content
        assert served == reference

    def test_finished_session_report_persisted(self, client, data_dir):
        sid = create_session(client, mode="oracle")
        deadline = time.time() + 120
        while time.time() < deadline:
            if client.get(f"/sessions/{sid}/state").json()["phase"] == "done":
                break
            time.sleep(0.05)
        report_file = data_dir / "sessions" / f"{sid}-report.jsonl"
        assert report_file.exists()
        assert report_file.read_bytes() == \
            client.get(f"/sessions/{sid}/metrics").content

    def test_oracle_mode_session_runs_to_completion(self, client):
        sid = create_session(client, mode="oracle")
        deadline = time.time() + 120
        while time.time() < deadline:
            state = client.get(f"/sessions/{sid}/state").json()
            if state["phase"] == "done":
                break
            time.sleep(0.05)
        assert state["phase"] == "done"
        dataset = service_scene()
        report, _ = run_hil_session(dataset, DETECTOR, service_hil(),
                                    OracleUser(dataset), model_seed=3)
        assert client.get(f"/sessions/{sid}/metrics").content == report.to_bytes()
