"""Memory-driven annotation propagation across frames.

A small feature memory carries labeled object instances forward: a read
step correlates each detection with every stored instance (cosine
similarity gated by distance from the instance's predicted position), an
assignment step greedily labels detections above a match threshold, and a
write step folds matched detections back into the memory (running-mean
keys, EMA velocity, aging and capacity eviction). Seeding the memory from
one annotated frame is enough to label a whole clip of subsequent frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import iou
from .proposals import DetectionRecord
from .scene import BACKGROUND, BoundingBox


@dataclass(frozen=True)
class PropagationParams:
    tau_match: float = 0.5           # min gated correlation to inherit a label
    alpha_mem: float = 0.3           # running-mean / EMA rate, in (0, 1]
    capacity: int = 64
    sigma_gate_frac: float = 0.25    # gate width as a fraction of frame diagonal

    def validate(self) -> None:
        if not 0.0 < self.alpha_mem <= 1.0:
            raise ValueError("alpha_mem must be in (0, 1]")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.sigma_gate_frac <= 0:
            raise ValueError("gate width must be positive")


@dataclass(eq=False)
class MemoryEntry:
    key: np.ndarray                  # running-mean descriptor
    label: str
    instance_id: int
    box: BoundingBox
    velocity: tuple[float, float] = (0.0, 0.0)
    age: int = 0                     # frames since last update

    def predicted_center(self) -> tuple[float, float]:
        cx, cy = self.box.center()
        horizon = self.age + 1
        return (cx + self.velocity[0] * horizon, cy + self.velocity[1] * horizon)


@dataclass(eq=False)
class TrackMemory:
    width: int
    height: int
    params: PropagationParams = PropagationParams()
    entries: list[MemoryEntry] = field(default_factory=list)

    def __post_init__(self):
        self.params.validate()

    @property
    def sigma_gate(self) -> float:
        return self.params.sigma_gate_frac * math.hypot(self.width, self.height)

    def instance_ids(self) -> set[int]:
        return {e.instance_id for e in self.entries}


@dataclass(eq=False)
class AnnotatedRegion:
    frame_index: int
    box: BoundingBox
    label: str
    instance_id: int
    source: str = "propagated"       # "user" | "propagated"

    def to_record(self) -> dict:
        return {"frame": self.frame_index, "box": list(self.box.as_tuple()),
                "label": self.label, "instance": self.instance_id,
                "source": self.source}

    @classmethod
    def from_record(cls, rec: dict) -> "AnnotatedRegion":
        return cls(rec["frame"], BoundingBox(*rec["box"]), rec["label"],
                   rec["instance"], rec.get("source", "user"))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def memory_read(frame_features: list[DetectionRecord],
                memory: TrackMemory) -> np.ndarray:
    """Correlation matrix C[i, k] = cosine(descriptor_i, key_k) * spatial gate.

    Entries lie in [-1, 1]; an empty memory yields an empty matrix.
    """
    n, m = len(frame_features), len(memory.entries)
    c = np.zeros((n, m))
    if m == 0 or n == 0:
        return c
    two_sigma_sq = 2.0 * memory.sigma_gate ** 2
    for k, entry in enumerate(memory.entries):
        if entry.key.shape != frame_features[0].descriptor.shape:
            raise ValueError("descriptor dimension differs between memory and frame")
        px, py = entry.predicted_center()
        for i, det in enumerate(frame_features):
            cx, cy = det.box.center()
            gate = math.exp(-((cx - px) ** 2 + (cy - py) ** 2) / two_sigma_sq)
            c[i, k] = _cosine(det.descriptor, entry.key) * gate
    return c


def greedy_match(correlation: np.ndarray, tau: float) -> dict[int, int]:
    """Greedy best-first assignment detection -> entry above tau; each side
    used at most once. Ties break deterministically by (det, entry) index."""
    n, m = correlation.shape
    pairs = sorted(((float(correlation[i, k]), i, k)
                    for i in range(n) for k in range(m)),
                   key=lambda t: (-t[0], t[1], t[2]))
    used_det: set[int] = set()
    used_entry: set[int] = set()
    matches: dict[int, int] = {}
    for corr, i, k in pairs:
        if corr < tau:
            break
        if i in used_det or k in used_entry:
            continue
        matches[i] = k
        used_det.add(i)
        used_entry.add(k)
    return matches


def memory_write(frame_features: list[DetectionRecord], memory: TrackMemory,
                 matches: dict[int, int]) -> TrackMemory:
    """Fold matched detections into the memory; age the rest; evict beyond
    capacity, oldest first. matches must be injective on both sides."""
    if len(set(matches.values())) != len(matches):
        raise ValueError("matches must assign each memory entry at most once")
    a = memory.params.alpha_mem
    matched_entries = {k: i for i, k in matches.items()}
    for k, entry in enumerate(memory.entries):
        if k in matched_entries:
            det = frame_features[matched_entries[k]]
            old_cx, old_cy = entry.box.center()
            new_cx, new_cy = det.box.center()
            horizon = entry.age + 1
            step = ((new_cx - old_cx) / horizon, (new_cy - old_cy) / horizon)
            entry.key = (1.0 - a) * entry.key + a * det.descriptor
            entry.velocity = ((1.0 - a) * entry.velocity[0] + a * step[0],
                              (1.0 - a) * entry.velocity[1] + a * step[1])
            entry.box = det.box
            entry.age = 0
        else:
            entry.age += 1
    if len(memory.entries) > memory.params.capacity:
        keep = sorted(range(len(memory.entries)),
                      key=lambda j: (memory.entries[j].age, memory.entries[j].instance_id))
        keep = sorted(keep[:memory.params.capacity])
        memory.entries = [memory.entries[j] for j in keep]
    return memory


def assign_labels(frame_features: list[DetectionRecord], memory: TrackMemory,
                  correlation: np.ndarray) -> list[AnnotatedRegion]:
    """Label each detection from its best memory match above tau_match;
    everything else becomes background with a fresh provisional id (< 0)."""
    matches = greedy_match(correlation, memory.params.tau_match)
    regions: list[AnnotatedRegion] = []
    provisional = -1
    for i, det in enumerate(frame_features):
        if i in matches:
            entry = memory.entries[matches[i]]
            regions.append(AnnotatedRegion(det.frame_index, det.box, entry.label,
                                           entry.instance_id, source="propagated"))
        else:
            regions.append(AnnotatedRegion(det.frame_index, det.box, BACKGROUND,
                                           provisional, source="propagated"))
            provisional -= 1
    return regions


def seed_memory(memory: TrackMemory, regions: list[AnnotatedRegion],
                detections: list[DetectionRecord]) -> None:
    """Install or refresh memory entries from user-confirmed regions.

    Each non-background region takes its key from the best-overlapping
    detection descriptor (the engine has no access to ground-truth
    appearance). Regions without any overlapping detection are skipped.
    Existing entries keep their velocity estimate.
    """
    existing = {e.instance_id: e for e in memory.entries}
    for region in regions:
        if region.label == BACKGROUND:
            continue
        best = None
        best_iou = 0.0
        for det in detections:
            v = iou(region.box, det.box)
            if v > best_iou:
                best_iou = v
                best = det
        if best is None or best_iou <= 0.0:
            continue
        if region.instance_id in existing:
            entry = existing[region.instance_id]
            entry.key = best.descriptor.copy()
            entry.label = region.label
            entry.box = region.box
            entry.age = 0
        else:
            entry = MemoryEntry(key=best.descriptor.copy(), label=region.label,
                                instance_id=region.instance_id, box=region.box)
            memory.entries.append(entry)
            existing[region.instance_id] = entry
    if len(memory.entries) > memory.params.capacity:
        memory.entries = memory.entries[-memory.params.capacity:]


def propagate_step(memory: TrackMemory,
                   detections: list[DetectionRecord]) -> list[AnnotatedRegion]:
    """One frame of read -> assign -> write."""
    correlation = memory_read(detections, memory)
    regions = assign_labels(detections, memory, correlation)
    by_instance = {e.instance_id: k for k, e in enumerate(memory.entries)}
    matches = {i: by_instance[r.instance_id]
               for i, r in enumerate(regions) if r.label != BACKGROUND}
    memory_write(detections, memory, matches)
    return regions


def propagate_annotations(seed: list[AnnotatedRegion], frame_range,
                          detections_by_frame: dict[int, list[DetectionRecord]],
                          width: int, height: int,
                          params: PropagationParams = PropagationParams()
                          ) -> dict[int, list[AnnotatedRegion]]:
    """Extend seed annotations on the first frame of frame_range across the
    rest of the range. Deterministic."""
    frames = list(frame_range)
    if not frames:
        raise ValueError("empty frame range")
    t0 = frames[0]
    if any(r.frame_index != t0 for r in seed):
        raise ValueError(f"seed regions must reference frame {t0}")
    memory = TrackMemory(width=width, height=height, params=params)
    seed_memory(memory, seed, detections_by_frame.get(t0, []))
    out: dict[int, list[AnnotatedRegion]] = {t0: list(seed)}
    for t in frames[1:]:
        out[t] = propagate_step(memory, detections_by_frame.get(t, []))
    return out
