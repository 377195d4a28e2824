"""Independent oracles the tests compare the implementation against.

Everything here is deliberately brute-force and written from the definition
of each quantity, not from the implementation under test. Run this module
directly to regenerate the frozen constants quoted in the tests.
"""

from __future__ import annotations

import math

import numpy as np


def iou_xyxy(a, b) -> float:
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    ua = (a[2] - a[0]) * (a[3] - a[1])
    ub = (b[2] - b[0]) * (b[3] - b[1])
    union = ua + ub - inter
    return inter / union if union > 0 else 0.0


def ap_enumeration_oracle(scored_preds, gt_boxes, alpha: float) -> float:
    """AP by exhaustive PR enumeration.

    scored_preds: list of (box, score) for one class; gt_boxes: list of box.
    For every prefix of the score-sorted prediction list, re-run greedy
    matching from scratch to get one (recall, precision) point, then
    integrate the all-point-interpolated curve by scanning for the max
    precision at each recall level.
    """
    if not gt_boxes:
        return 0.0
    order = sorted(range(len(scored_preds)), key=lambda i: (-scored_preds[i][1], i))
    ranked = [scored_preds[i][0] for i in order]
    points = []  # (recall, precision) after each rank
    for prefix in range(1, len(ranked) + 1):
        taken = [False] * len(gt_boxes)
        tp = 0
        for pb in ranked[:prefix]:
            best_j, best_v = None, 0.0
            for j, gb in enumerate(gt_boxes):
                if taken[j]:
                    continue
                v = iou_xyxy(pb, gb)
                if v >= alpha and v > best_v:
                    best_v, best_j = v, j
            if best_j is not None:
                taken[best_j] = True
                tp += 1
        points.append((tp / len(gt_boxes), tp / prefix))
    ap = 0.0
    prev_r = 0.0
    for i, (r, _) in enumerate(points):
        if r > prev_r:
            best_p = max(p for (r2, p) in points[i:] if True)
            ap += (r - prev_r) * best_p
            prev_r = r
    return ap


def two_node_maxpool_forward_oracle(x0, x1, w1, wo):
    """Scalar recomputation of a two-node, depth-1, maxpool forward pass.

    x0, x1: node feature lists; w1: (d_out, 2*d_in) nested lists; wo:
    (C, d_out) nested lists. Returns per-node logits. Pure Python floats.
    """
    def layer(own, nbr):
        concat = list(own) + list(nbr)
        out = []
        for row in w1:
            s = sum(a * b for a, b in zip(row, concat))
            out.append(s if s > 0 else 0.0)
        return out

    h0 = layer(x0, x1)   # sole neighbor of node 0 is node 1
    h1 = layer(x1, x0)
    logits = []
    for h in (h0, h1):
        logits.append([sum(a * b for a, b in zip(row, h)) for row in wo])
    return logits


def gcn_two_node_oracle(x, w, adjacency):
    """One GCN layer on a 2-node graph by scalar arithmetic: relu(D^-1/2 A
    D^-1/2 X W)."""
    deg = [sum(row) for row in adjacency]
    norm = [[adjacency[i][j] / math.sqrt(deg[i] * deg[j]) for j in range(2)]
            for i in range(2)]
    prop = [[sum(norm[i][k] * x[k][j] for k in range(2)) for j in range(len(x[0]))]
            for i in range(2)]
    out = [[sum(prop[i][k] * w[k][j] for k in range(len(w)))
            for j in range(len(w[0]))] for i in range(2)]
    return [[v if v > 0 else 0.0 for v in row] for row in out]


def jitter_iou_band(sigma: float = 2.0, n: int = 200000, trials: int = 1000,
                    seed: int = 123):
    """Monte-Carlo oracle for the detector localization-jitter model:
    distribution of IoU(jittered box, original) for a 60x48 box, and a
    +-6-sigma-of-the-mean band for a `trials`-sample mean."""
    base = (200.0, 200.0, 260.0, 248.0)
    rng = np.random.default_rng(seed)
    vals = np.empty(n)
    for i in range(n):
        d = rng.normal(0, sigma, 4)
        j = (base[0] + d[0], base[1] + d[1], base[2] + d[2], base[3] + d[3])
        vals[i] = 0.0 if (j[0] >= j[2] or j[1] >= j[3]) else iou_xyxy(base, j)
    half = 6 * vals.std() / math.sqrt(trials)
    return vals.mean() - half, vals.mean() + half


if __name__ == "__main__":
    lo, hi = jitter_iou_band()
    print(f"jitter IoU band (sigma=2, 1000-trial mean): [{lo:.4f}, {hi:.4f}]")
