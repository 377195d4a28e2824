"""Deterministic frame rasterization for the UI: ground-truth rectangles
with class-keyed fill colors on a dark background, encoded as PNG."""

from __future__ import annotations

import io

from PIL import Image, ImageDraw

from .scene import Frame

_BG = (24, 24, 28)
_PALETTE = [
    (214, 96, 77), (67, 147, 195), (90, 174, 97), (230, 171, 2),
    (153, 112, 171), (216, 130, 177), (102, 194, 165), (179, 136, 103),
]


def class_color(label: str, class_labels) -> tuple[int, int, int]:
    ordered = sorted(set(class_labels))
    try:
        idx = ordered.index(label)
    except ValueError:
        idx = len(ordered)
    return _PALETTE[idx % len(_PALETTE)]


def render_frame_png(frame: Frame, width: int, height: int,
                     class_labels) -> bytes:
    img = Image.new("RGB", (width, height), _BG)
    draw = ImageDraw.Draw(img)
    for obj in sorted(frame.objects, key=lambda o: o.instance_id):
        color = class_color(obj.class_label, class_labels)
        b = obj.box
        draw.rectangle([b.x_min, b.y_min, b.x_max - 1, b.y_max - 1],
                       fill=color, outline=(240, 240, 240))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
