"""Deterministic synthetic desk scenes: moving labeled objects with
appearance descriptors, camera jitter, and a simulated gaze stream.

Frames carry no raster pixels; an object's appearance is an explicit
descriptor vector, which is what the downstream detector stand-in and the
graph classifier consume. The entire dataset is a pure function of
SceneConfig (seed included), so any experiment built on it replays exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .storage import (SCHEMA_VERSION, DatasetFormatError, iter_kind,
                      read_records, records_to_bytes, require_fields,
                      write_records)

BACKGROUND = "background"


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


def clamp_box(x_min, y_min, x_max, y_max, width, height) -> BoundingBox:
    """Clamp a box to frame bounds, nudging degenerate results back to 1 px."""
    x0 = min(max(x_min, 0.0), width - 1.0)
    y0 = min(max(y_min, 0.0), height - 1.0)
    x1 = max(min(x_max, float(width)), x0 + 1.0)
    y1 = max(min(y_max, float(height)), y0 + 1.0)
    return BoundingBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class MotionSpec:
    """Object center trajectory: static, linear (px/frame), or sinusoidal."""

    kind: str = "static"
    velocity: tuple[float, float] = (0.0, 0.0)
    amplitude: tuple[float, float] = (0.0, 0.0)
    period_frames: float = 120.0
    phase: float = 0.0

    def position(self, start: tuple[float, float], frame_index: int) -> tuple[float, float]:
        x0, y0 = start
        t = float(frame_index)
        if self.kind == "static":
            return (x0, y0)
        if self.kind == "linear":
            return (x0 + self.velocity[0] * t, y0 + self.velocity[1] * t)
        if self.kind == "sinusoidal":
            s = math.sin(2.0 * math.pi * t / self.period_frames + self.phase)
            return (x0 + self.amplitude[0] * s, y0 + self.amplitude[1] * s)
        raise ValueError(f"unknown motion kind {self.kind!r}")

    def mirrored(self, frame_width: float) -> "MotionSpec":
        # Reflection across the vertical midline flips x displacement.
        if self.kind == "linear":
            return replace(self, velocity=(-self.velocity[0], self.velocity[1]))
        if self.kind == "sinusoidal":
            return replace(self, amplitude=(-self.amplitude[0], self.amplitude[1]))
        return self


@dataclass(frozen=True)
class ObjectSpec:
    """One scene object, or a mirrored pair when mirrored_pair is set.

    A mirrored pair yields two instances with the *same* base appearance
    vector; their labels get '-left'/'-right' suffixes assigned by x-center
    on frame 0 and stay with the instance afterwards.
    """

    label: str
    size: tuple[float, float]
    start: tuple[float, float]
    motion: MotionSpec = MotionSpec()
    mirrored_pair: bool = False
    appearance: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SceneConfig:
    n_frames: int
    fps: float
    width: int
    height: int
    objects: tuple[ObjectSpec, ...]
    d_app: int = 16
    sigma_app: float = 0.0
    sigma_cam: float = 0.0
    seed: int = 0
    gaze_dwell_frames: int = 12
    gaze_noise_px: float = 2.0

    def validate(self) -> None:
        if self.n_frames < 1:
            raise ValueError("a scene needs at least one frame")
        if not self.objects:
            raise ValueError("a scene needs at least one object")
        if self.fps <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("fps and frame dimensions must be positive")
        if self.d_app < 1:
            raise ValueError("descriptor dimension must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(eq=False)
class GtObject:
    class_label: str
    instance_id: int
    box: BoundingBox
    appearance: np.ndarray


@dataclass(eq=False)
class Frame:
    index: int
    time_s: float
    objects: list[GtObject]


@dataclass(eq=False)
class FixationPoint:
    frame_index: int
    x: float
    y: float
    aoi_label: str = BACKGROUND


@dataclass(eq=False)
class SceneDataset:
    config: SceneConfig
    frames: list[Frame]
    fixations: list[FixationPoint] = field(default_factory=list)

    @property
    def class_labels(self) -> list[str]:
        labels = {o.class_label for f in self.frames for o in f.objects}
        return sorted(labels)

    def fixation_for(self, frame_index: int) -> FixationPoint | None:
        for fx in self.fixations:
            if fx.frame_index == frame_index:
                return fx
        return None


@dataclass(frozen=True)
class _Instance:
    label: str
    instance_id: int
    size: tuple[float, float]
    start: tuple[float, float]
    motion: MotionSpec
    appearance: np.ndarray


def _expand_instances(config: SceneConfig, rng: np.random.Generator) -> list[_Instance]:
    instances: list[_Instance] = []
    next_id = 0
    for spec in config.objects:
        if spec.appearance is not None:
            base = np.asarray(spec.appearance, dtype=np.float64)
            if base.shape != (config.d_app,):
                raise ValueError(f"appearance for {spec.label!r} must have length {config.d_app}")
        else:
            base = rng.normal(0.0, 1.0, config.d_app)
        if spec.mirrored_pair:
            mirror_start = (config.width - spec.start[0], spec.start[1])
            a = _Instance(spec.label, next_id, spec.size, spec.start, spec.motion, base)
            b = _Instance(spec.label, next_id + 1, spec.size, mirror_start,
                          spec.motion.mirrored(config.width), base)
            next_id += 2
            left, right = (a, b) if a.start[0] <= b.start[0] else (b, a)
            instances.append(replace(left, label=f"{spec.label}-left"))
            instances.append(replace(right, label=f"{spec.label}-right"))
        else:
            instances.append(_Instance(spec.label, next_id, spec.size, spec.start,
                                       spec.motion, base))
            next_id += 1
    return instances


def generate_scene(config: SceneConfig) -> SceneDataset:
    """Build the full dataset (frames, ground truth, gaze) from the config."""
    config.validate()
    appearance_rng = np.random.default_rng([config.seed, 0])
    jitter_rng = np.random.default_rng([config.seed, 1])
    noise_rng = np.random.default_rng([config.seed, 2])

    instances = _expand_instances(config, appearance_rng)
    frames: list[Frame] = []
    for t in range(config.n_frames):
        cam_dx, cam_dy = (jitter_rng.normal(0.0, config.sigma_cam, 2)
                          if config.sigma_cam > 0 else (0.0, 0.0))
        objects = []
        for inst in instances:
            cx, cy = inst.motion.position(inst.start, t)
            cx += cam_dx
            cy += cam_dy
            w, h = inst.size
            box = clamp_box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2,
                            config.width, config.height)
            if config.sigma_app > 0:
                appearance = inst.appearance + noise_rng.normal(0.0, config.sigma_app,
                                                                config.d_app)
            else:
                appearance = inst.appearance.copy()
            objects.append(GtObject(inst.label, inst.instance_id, box, appearance))
        frames.append(Frame(index=t, time_s=t / config.fps, objects=objects))

    dataset = SceneDataset(config=config, frames=frames)
    dataset.fixations = simulate_gaze(dataset, config.gaze_dwell_frames,
                                      config.gaze_noise_px)
    return dataset


def label_point(frame: Frame, x: float, y: float) -> str:
    """Ground-truth AOI for a point: smallest containing box, else background."""
    hits = [o for o in frame.objects if o.box.contains(x, y)]
    if not hits:
        return BACKGROUND
    hits.sort(key=lambda o: (o.box.area, o.instance_id))
    return hits[0].class_label


def simulate_gaze(dataset: SceneDataset, dwell_frames: int, saccade_noise_px: float,
                  seed: int | None = None) -> list[FixationPoint]:
    """Dwell on one target (an object or background) for dwell_frames, then jump.

    Each fixation carries its geometric ground-truth AOI label.
    """
    if not dataset.frames:
        raise ValueError("cannot simulate gaze over an empty dataset")
    if dwell_frames < 1:
        raise ValueError("dwell_frames must be >= 1")
    cfg = dataset.config
    rng = np.random.default_rng([cfg.seed if seed is None else seed, 3])
    instance_ids = sorted({o.instance_id for f in dataset.frames for o in f.objects})
    targets = instance_ids + [None]  # None = deliberate background glance

    fixations: list[FixationPoint] = []
    target = None
    for frame in dataset.frames:
        if frame.index % dwell_frames == 0:
            target = targets[rng.integers(0, len(targets))]
        obj = next((o for o in frame.objects if o.instance_id == target), None)
        if obj is not None:
            cx, cy = obj.box.center()
            if saccade_noise_px > 0:
                cx += rng.normal(0.0, saccade_noise_px)
                cy += rng.normal(0.0, saccade_noise_px)
            x = min(max(cx, 0.0), cfg.width - 1.0)
            y = min(max(cy, 0.0), cfg.height - 1.0)
        else:
            x, y = _background_point(frame, cfg.width, cfg.height, rng)
        fixations.append(FixationPoint(frame.index, x, y, label_point(frame, x, y)))
    return fixations


def _background_point(frame: Frame, width: int, height: int,
                      rng: np.random.Generator) -> tuple[float, float]:
    for _ in range(100):
        x = rng.uniform(0.0, width - 1.0)
        y = rng.uniform(0.0, height - 1.0)
        if all(not o.box.contains(x, y) for o in frame.objects):
            return (x, y)
    return (0.0, 0.0)  # pathological scene fully covered by objects


# --- dataset file schema -------------------------------------------------

def _config_to_record(config: SceneConfig) -> dict:
    return {
        "n_frames": config.n_frames, "fps": config.fps,
        "width": config.width, "height": config.height,
        "d_app": config.d_app, "sigma_app": config.sigma_app,
        "sigma_cam": config.sigma_cam, "seed": config.seed,
        "gaze_dwell_frames": config.gaze_dwell_frames,
        "gaze_noise_px": config.gaze_noise_px,
        "objects": [{
            "label": s.label, "size": list(s.size), "start": list(s.start),
            "motion": {"kind": s.motion.kind, "velocity": list(s.motion.velocity),
                       "amplitude": list(s.motion.amplitude),
                       "period_frames": s.motion.period_frames, "phase": s.motion.phase},
            "mirrored_pair": s.mirrored_pair,
            "appearance": list(s.appearance) if s.appearance is not None else None,
        } for s in config.objects],
    }


def config_from_record(rec: dict) -> SceneConfig:
    objects = tuple(
        ObjectSpec(
            label=o["label"], size=tuple(o["size"]), start=tuple(o["start"]),
            motion=MotionSpec(kind=o["motion"]["kind"],
                              velocity=tuple(o["motion"]["velocity"]),
                              amplitude=tuple(o["motion"]["amplitude"]),
                              period_frames=o["motion"]["period_frames"],
                              phase=o["motion"]["phase"]),
            mirrored_pair=o["mirrored_pair"],
            appearance=tuple(o["appearance"]) if o.get("appearance") is not None else None,
        ) for o in rec["objects"])
    return SceneConfig(
        n_frames=rec["n_frames"], fps=rec["fps"], width=rec["width"],
        height=rec["height"], objects=objects, d_app=rec["d_app"],
        sigma_app=rec["sigma_app"], sigma_cam=rec["sigma_cam"], seed=rec["seed"],
        gaze_dwell_frames=rec["gaze_dwell_frames"], gaze_noise_px=rec["gaze_noise_px"])


def _dataset_records(dataset: SceneDataset):
    fix_by_frame: dict[int, list[FixationPoint]] = {}
    for fx in dataset.fixations:
        fix_by_frame.setdefault(fx.frame_index, []).append(fx)
    for frame in dataset.frames:
        yield {
            "kind": "frame",
            "index": frame.index,
            "time_s": frame.time_s,
            "objects": [{
                "label": o.class_label, "instance": o.instance_id,
                "box": list(o.box.as_tuple()),
                "appearance": [float(v) for v in o.appearance],
            } for o in frame.objects],
            "fixations": [{
                "x": fx.x, "y": fx.y, "aoi": fx.aoi_label,
            } for fx in fix_by_frame.get(frame.index, [])],
        }


def dataset_header(dataset: SceneDataset) -> dict:
    return {"kind": "scene_dataset", "schema_version": SCHEMA_VERSION,
            "config": _config_to_record(dataset.config)}


def dataset_to_bytes(dataset: SceneDataset) -> bytes:
    return records_to_bytes(dataset_header(dataset), _dataset_records(dataset))


def save_dataset(dataset: SceneDataset, path) -> None:
    write_records(path, dataset_header(dataset), _dataset_records(dataset))


def load_dataset(path) -> SceneDataset:
    header, records = read_records(path, "scene_dataset")
    if not header:
        raise DatasetFormatError(f"{path}: empty dataset file")
    require_fields(header, ["config"], f"{path}: header")
    config = config_from_record(header["config"])
    frames: list[Frame] = []
    fixations: list[FixationPoint] = []
    for i, rec in iter_kind(records, "frame", str(path)):
        require_fields(rec, ["index", "time_s", "objects", "fixations"],
                       f"{path}: frame record {i + 2}")
        objects = [GtObject(o["label"], o["instance"], BoundingBox(*o["box"]),
                            np.asarray(o["appearance"], dtype=np.float64))
                   for o in rec["objects"]]
        frames.append(Frame(rec["index"], rec["time_s"], objects))
        for fx in rec["fixations"]:
            fixations.append(FixationPoint(rec["index"], fx["x"], fx["y"], fx["aoi"]))
    if not frames:
        raise DatasetFormatError(f"{path}: dataset has no frames")
    if len(frames) != config.n_frames:
        raise DatasetFormatError(
            f"{path}: header promises {config.n_frames} frames, found {len(frames)}")
    for expected, frame in enumerate(frames):
        if frame.index != expected:
            raise DatasetFormatError(f"{path}: frame indices not contiguous at {frame.index}")
    return SceneDataset(config=config, frames=frames, fixations=fixations)
