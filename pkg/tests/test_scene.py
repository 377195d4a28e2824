"""Scene generator: determinism, mirrored pairs, gaze, file round-trips."""

import numpy as np
import pytest

from gazeloop.scene import (BACKGROUND, BoundingBox, MotionSpec, ObjectSpec,
                            SceneConfig, dataset_to_bytes, generate_scene,
                            load_dataset, save_dataset, simulate_gaze)
from gazeloop.storage import DatasetFormatError


def small_config(seed=7, n_frames=20, sigma_app=0.0, sigma_cam=0.0):
    objects = (
        ObjectSpec(label="device", size=(40.0, 30.0), start=(100.0, 120.0),
                   motion=MotionSpec(kind="linear", velocity=(1.0, 0.0)),
                   mirrored_pair=True),
        ObjectSpec(label="book", size=(50.0, 40.0), start=(160.0, 60.0)),
    )
    return SceneConfig(n_frames=n_frames, fps=30.0, width=320, height=240,
                       objects=objects, d_app=8, sigma_app=sigma_app,
                       sigma_cam=sigma_cam, seed=seed)


class TestGeneration:
    def test_same_seed_byte_identical(self):
        a = generate_scene(small_config())
        b = generate_scene(small_config())
        assert dataset_to_bytes(a) == dataset_to_bytes(b)

    def test_different_seed_differs(self):
        a = generate_scene(small_config(seed=7))
        b = generate_scene(small_config(seed=8))
        assert dataset_to_bytes(a) != dataset_to_bytes(b)

    def test_mirrored_pair_appearance_equal_every_frame(self):
        ds = generate_scene(small_config(sigma_app=0.0))
        for frame in ds.frames:
            pair = [o for o in frame.objects if o.class_label.startswith("device")]
            assert len(pair) == 2
            assert np.array_equal(pair[0].appearance, pair[1].appearance)

    def test_mirrored_pair_labels_by_initial_x(self):
        ds = generate_scene(small_config())
        first = ds.frames[0]
        left = next(o for o in first.objects if o.class_label == "device-left")
        right = next(o for o in first.objects if o.class_label == "device-right")
        assert left.box.center()[0] < right.box.center()[0]
        # labels stay with the instance on later frames
        for frame in ds.frames:
            by_id = {o.instance_id: o.class_label for o in frame.objects}
            assert by_id[left.instance_id] == "device-left"
            assert by_id[right.instance_id] == "device-right"

    def test_last_frame_time(self):
        cfg = small_config(n_frames=300)
        ds = generate_scene(cfg)
        assert ds.frames[-1].time_s == pytest.approx(299 / 30.0)
        assert [f.index for f in ds.frames] == list(range(300))

    def test_boxes_stay_in_frame_under_jitter(self):
        ds = generate_scene(small_config(sigma_cam=25.0, n_frames=60))
        cfg = ds.config
        for frame in ds.frames:
            for obj in frame.objects:
                b = obj.box
                assert 0.0 <= b.x_min < b.x_max <= cfg.width
                assert 0.0 <= b.y_min < b.y_max <= cfg.height

    def test_zero_objects_rejected(self):
        cfg = small_config()
        with pytest.raises(ValueError):
            generate_scene(SceneConfig(n_frames=5, fps=30.0, width=100, height=100,
                                       objects=(), seed=1))
        with pytest.raises(ValueError):
            generate_scene(
                SceneConfig(n_frames=0, fps=30.0, width=100, height=100,
                            objects=cfg.objects, seed=1))


class TestGaze:
    def test_noiseless_dwell_hits_center(self):
        ds = generate_scene(small_config())
        fixations = simulate_gaze(ds, dwell_frames=5, saccade_noise_px=0.0)
        assert len(fixations) == len(ds.frames)
        for fx in fixations:
            frame = ds.frames[fx.frame_index]
            if fx.aoi_label != BACKGROUND:
                obj = next(o for o in frame.objects if o.class_label == fx.aoi_label)
                cx, cy = obj.box.center()
                assert (fx.x, fx.y) == (pytest.approx(cx), pytest.approx(cy))

    def test_background_points_off_objects(self):
        ds = generate_scene(small_config())
        for fx in simulate_gaze(ds, dwell_frames=3, saccade_noise_px=0.0):
            frame = ds.frames[fx.frame_index]
            on_object = any(o.box.contains(fx.x, fx.y) for o in frame.objects)
            assert on_object == (fx.aoi_label != BACKGROUND)

    def test_fixed_seed_identical_stream(self):
        ds = generate_scene(small_config())
        a = simulate_gaze(ds, 4, 2.0, seed=11)
        b = simulate_gaze(ds, 4, 2.0, seed=11)
        assert [(f.frame_index, f.x, f.y, f.aoi_label) for f in a] == \
               [(f.frame_index, f.x, f.y, f.aoi_label) for f in b]

    def test_fixations_in_bounds(self):
        ds = generate_scene(small_config(sigma_cam=10.0))
        for fx in simulate_gaze(ds, 4, 50.0):
            assert 0 <= fx.x <= ds.config.width
            assert 0 <= fx.y <= ds.config.height


class TestDatasetFiles:
    def test_round_trip_identity(self, tmp_path):
        ds = generate_scene(small_config(sigma_app=0.1, sigma_cam=1.5))
        path = tmp_path / "scene.jsonl"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert dataset_to_bytes(loaded) == dataset_to_bytes(ds)

    def test_truncated_file_rejected(self, tmp_path):
        ds = generate_scene(small_config())
        path = tmp_path / "scene.jsonl"
        save_dataset(ds, path)
        data = path.read_bytes()
        (tmp_path / "cut.jsonl").write_bytes(data[: int(len(data) * 0.6)])
        with pytest.raises(DatasetFormatError):
            load_dataset(tmp_path / "cut.jsonl")

    def test_empty_frame_list_rejected(self, tmp_path):
        ds = generate_scene(small_config())
        path = tmp_path / "empty.jsonl"
        header_line = dataset_to_bytes(ds).split(b"\n")[0]
        path.write_bytes(header_line + b"\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(path)

    def test_garbage_line_names_location(self, tmp_path):
        ds = generate_scene(small_config())
        path = tmp_path / "scene.jsonl"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        lines[3] = "{not json"
        bad = tmp_path / "bad.jsonl"
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="line 4"):
            load_dataset(bad)


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        BoundingBox(10, 10, 10, 20)
