"""Detector stand-in: candidate regions (boxes + descriptors) per frame.

The detector is not trained here. Feedback rounds instead shrink its noise
through DetectorSchedule, which models how detection quality improves as
correction data accumulates. A loader for externally precomputed detection
dumps shares the same record schema.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scene import BoundingBox, Frame, SceneDataset, clamp_box
from .storage import (SCHEMA_VERSION, DatasetFormatError, iter_kind,
                      read_records, require_fields, write_records)


@dataclass(eq=False)
class DetectionRecord:
    frame_index: int
    box: BoundingBox
    descriptor: np.ndarray
    score: float | None = None


@dataclass(frozen=True)
class DetectorConfig:
    sigma_loc: float = 0.0       # px jitter on each box coordinate
    p_miss: float = 0.0          # probability a true object goes undetected
    lambda_fp: float = 0.0       # Poisson rate of spurious detections per frame
    sigma_descriptor: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.p_miss < 1.0:
            raise ValueError("p_miss must be in [0, 1)")
        if self.sigma_loc < 0 or self.lambda_fp < 0 or self.sigma_descriptor < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class DetectorSchedule:
    """Per-round noise decay: round k runs the detector at noise * decay**k."""

    decay: float = 1.0

    def config_for_round(self, base: DetectorConfig, round_k: int) -> DetectorConfig:
        if round_k < 0:
            raise ValueError("round index must be >= 0")
        f = self.decay ** round_k
        return replace(base, sigma_loc=base.sigma_loc * f, p_miss=base.p_miss * f,
                       lambda_fp=base.lambda_fp * f,
                       sigma_descriptor=base.sigma_descriptor * f)


def detector_to_record(config: DetectorConfig) -> dict:
    return {"sigma_loc": config.sigma_loc, "p_miss": config.p_miss,
            "lambda_fp": config.lambda_fp,
            "sigma_descriptor": config.sigma_descriptor, "seed": config.seed}


def detector_from_record(rec: dict) -> DetectorConfig:
    return DetectorConfig(sigma_loc=rec["sigma_loc"], p_miss=rec["p_miss"],
                          lambda_fp=rec["lambda_fp"],
                          sigma_descriptor=rec["sigma_descriptor"],
                          seed=rec["seed"])


def detect_regions(frame: Frame, config: DetectorConfig, width: int,
                   height: int) -> list[DetectionRecord]:
    """Jittered/noised copies of the frame's objects plus spurious regions.

    Deterministic per (frame index, config seed). A noiseless config returns
    the ground truth bit-exactly.
    """
    config.validate()
    rng = np.random.default_rng([config.seed, frame.index])
    records: list[DetectionRecord] = []
    for obj in frame.objects:
        if rng.random() < config.p_miss:
            continue
        if config.sigma_loc > 0:
            dx = rng.normal(0.0, config.sigma_loc, 4)
            box = clamp_box(obj.box.x_min + dx[0], obj.box.y_min + dx[1],
                            obj.box.x_max + dx[2], obj.box.y_max + dx[3],
                            width, height)
        else:
            box = obj.box
        if config.sigma_descriptor > 0:
            descriptor = obj.appearance + rng.normal(0.0, config.sigma_descriptor,
                                                     obj.appearance.shape[0])
        else:
            descriptor = obj.appearance.copy()
        score = float(0.55 + 0.45 * rng.random())
        records.append(DetectionRecord(frame.index, box, descriptor, score))

    n_spurious = int(rng.poisson(config.lambda_fp)) if config.lambda_fp > 0 else 0
    d_app = frame.objects[0].appearance.shape[0] if frame.objects else 8
    for _ in range(n_spurious):
        w = rng.uniform(20.0, 80.0)
        h = rng.uniform(20.0, 80.0)
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        box = clamp_box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, width, height)
        descriptor = rng.normal(0.0, 1.0, d_app)
        records.append(DetectionRecord(frame.index, box, descriptor,
                                       float(0.05 + 0.55 * rng.random())))
    return records


def detect_dataset(dataset: SceneDataset, config: DetectorConfig) -> dict[int, list[DetectionRecord]]:
    cfg = dataset.config
    return {f.index: detect_regions(f, config, cfg.width, cfg.height)
            for f in dataset.frames}


# --- detections file schema ----------------------------------------------

def save_detections(detections: dict[int, list[DetectionRecord]], path) -> None:
    all_records = [r for recs in detections.values() for r in recs]
    d_app = all_records[0].descriptor.shape[0] if all_records else None
    header = {"kind": "detections", "schema_version": SCHEMA_VERSION, "d_app": d_app}

    def rows():
        for frame_index in sorted(detections):
            for r in detections[frame_index]:
                yield {"kind": "detection", "frame": r.frame_index,
                       "box": list(r.box.as_tuple()),
                       "descriptor": [float(v) for v in r.descriptor],
                       "score": r.score}
    write_records(path, header, rows())


def load_detections(path) -> dict[int, list[DetectionRecord]]:
    """Read a detections dump grouped by frame. An empty file is an empty
    mapping; inconsistent descriptor lengths are a format error."""
    header, records = read_records(path, "detections")
    if not header:
        return {}
    grouped: dict[int, list[DetectionRecord]] = {}
    d_app: int | None = None
    for i, rec in iter_kind(records, "detection", str(path)):
        require_fields(rec, ["frame", "box", "descriptor"], f"{path}: record {i + 2}")
        descriptor = np.asarray(rec["descriptor"], dtype=np.float64)
        if d_app is None:
            d_app = descriptor.shape[0]
        elif descriptor.shape[0] != d_app:
            raise DatasetFormatError(
                f"{path}: record {i + 2}: descriptor length {descriptor.shape[0]} "
                f"!= {d_app} seen earlier")
        try:
            box = BoundingBox(*rec["box"])
        except (TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}: record {i + 2}: bad box ({exc})") from exc
        grouped.setdefault(rec["frame"], []).append(
            DetectionRecord(rec["frame"], box, descriptor, rec.get("score")))
    return grouped
