"""Per-frame graphs over detections: the input representation of the
message-passing classifier.

Every frame becomes a fully connected digraph (no self-loops) whose node
features concatenate normalized box coordinates with the detection
descriptor. Node order is canonical, so graph construction is invariant to
the order detections arrive in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .proposals import DetectionRecord


@dataclass(eq=False)
class FrameGraph:
    features: np.ndarray             # (n, 4 + d_app), canonical node order
    records: list[DetectionRecord]   # same order as feature rows
    width: int
    height: int

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def node_ids(self) -> list[int]:
        return list(range(self.n_nodes))

    @property
    def edges(self) -> list[tuple[int, int]]:
        n = self.n_nodes
        return [(u, v) for u in range(n) for v in range(n) if u != v]

    def neighbors(self, v: int) -> list[int]:
        if not 0 <= v < self.n_nodes:
            raise ValueError(f"node {v} out of range")
        return [u for u in range(self.n_nodes) if u != v]


def node_feature(det: DetectionRecord, frame_width: int, frame_height: int) -> np.ndarray:
    """concat(x_min/W, y_min/H, x_max/W, y_max/H, descriptor); coords in [0,1]."""
    if frame_width <= 0 or frame_height <= 0:
        raise ValueError("frame dimensions must be positive")
    b = det.box
    coords = np.array([b.x_min / frame_width, b.y_min / frame_height,
                       b.x_max / frame_width, b.y_max / frame_height],
                      dtype=np.float64)
    coords = np.clip(coords, 0.0, 1.0)
    return np.concatenate([coords, np.asarray(det.descriptor, dtype=np.float64)])


def _canonical_key(det: DetectionRecord):
    return (det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max,
            tuple(float(v) for v in det.descriptor))


def build_frame_graph(dets: list[DetectionRecord], frame_width: int,
                      frame_height: int) -> FrameGraph:
    """Complete graph over one frame's detections in canonical node order.

    An empty detection list yields a valid empty graph.
    """
    ordered = sorted(dets, key=_canonical_key)
    if ordered:
        features = np.stack([node_feature(d, frame_width, frame_height) for d in ordered])
    else:
        features = np.zeros((0, 4), dtype=np.float64)
    return FrameGraph(features=features, records=ordered,
                      width=frame_width, height=frame_height)
