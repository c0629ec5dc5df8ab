"""Deterministic region-proposal math.

Anchor grids over a stride-8 feature lattice, IoU-based positive/negative
target assignment, seeded minibatch sampling, and ROI pooling with
bilinear interpolation including its analytic gradients with respect to
both the feature values and the box coordinates.

Feature maps are plain (channels, height, width) float arrays; the texel
at index (p, q) is centered at continuous coordinate (q + 0.5, p + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, boxes_to_corners, encode_delta, iou_matrix

__all__ = [
    "AnchorGrid",
    "TargetAssignment",
    "generate_anchors",
    "assign_targets",
    "sample_minibatch",
    "roi_pool_bilinear",
    "roi_pool_backward",
]


@dataclass(frozen=True)
class AnchorGrid:
    """Anchor geometry: K = len(scales) * len(aspect_ratios) boxes per
    feature cell, centered at ((i+0.5)*stride, (j+0.5)*stride).

    An anchor of scale s and ratio r (r = w/h; words are wide) has
    w = s*sqrt(r) and h = s/sqrt(r), so its area is s^2.
    """

    stride: int = 8
    scales: tuple[float, ...] = (24.0, 40.0, 64.0, 104.0, 168.0)
    aspect_ratios: tuple[float, ...] = (2.0, 4.0, 7.0)

    @property
    def anchors_per_cell(self) -> int:
        return len(self.scales) * len(self.aspect_ratios)


def generate_anchors(feat_w: int, feat_h: int, grid: AnchorGrid = AnchorGrid()) -> list[Box]:
    """All anchors for a feat_w x feat_h feature map, in row-major cell
    order, scale-major (then ratio) within each cell. Anchors may extend
    beyond the image; they are only clipped after decoding."""
    if feat_w < 1 or feat_h < 1:
        raise ValueError("feature map dims must be positive")
    shapes = [
        (s * np.sqrt(r), s / np.sqrt(r)) for s in grid.scales for r in grid.aspect_ratios
    ]
    anchors = []
    for j in range(feat_h):
        yc = (j + 0.5) * grid.stride
        for i in range(feat_w):
            xc = (i + 0.5) * grid.stride
            anchors.extend(Box(xc, yc, w, h) for w, h in shapes)
    return anchors


@dataclass
class TargetAssignment:
    """Per-anchor training targets.

    labels: 1 positive, 0 negative, -1 ignore. matched_gt: ground-truth
    index for positives, -1 elsewhere. deltas: encoded regression target
    rows, valid where the label is positive.
    """

    labels: np.ndarray
    matched_gt: np.ndarray
    deltas: np.ndarray

    @property
    def positive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 1)

    @property
    def negative_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 0)


def assign_targets(
    anchors: list[Box],
    gt: list[Box],
    pos_thr: float = 0.75,
    neg_thr: float = 0.4,
) -> TargetAssignment:
    """Label anchors by max-IoU against ground truth.

    IoU above ``pos_thr`` is positive, below ``neg_thr`` negative,
    in between ignored. Additionally every ground-truth box with any
    overlap promotes its single best anchor to positive, so no reachable
    ground truth is left unmatched.
    """
    if not (0 < neg_thr < pos_thr < 1):
        raise ValueError("need 0 < neg_thr < pos_thr < 1")
    n = len(anchors)
    labels = np.full(n, -1, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    deltas = np.zeros((n, 4), dtype=np.float64)
    if not gt:
        labels[:] = 0
        return TargetAssignment(labels, matched, deltas)

    overlaps = iou_matrix(boxes_to_corners(anchors), boxes_to_corners(gt))
    best_gt = overlaps.argmax(axis=1)
    best_iou = overlaps[np.arange(n), best_gt]
    labels[best_iou < neg_thr] = 0
    pos = best_iou > pos_thr
    labels[pos] = 1
    matched[pos] = best_gt[pos]

    # Best anchor per ground truth becomes positive even below pos_thr;
    # later ground truths win a shared best anchor (deterministic).
    for g in range(len(gt)):
        a = int(overlaps[:, g].argmax())
        if overlaps[a, g] > 0:
            labels[a] = 1
            matched[a] = g

    for a in np.flatnonzero(labels == 1):
        d = encode_delta(anchors[a], gt[matched[a]])
        deltas[a] = (d.tx, d.ty, d.tw, d.th)
    return TargetAssignment(labels, matched, deltas)


def sample_minibatch(
    assign: TargetAssignment,
    n_pos: int = 128,
    n_neg: int = 128,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample up to n_pos positive and n_neg negative anchor indices
    without replacement, reproducibly for a given seed."""
    rng = np.random.default_rng(seed)
    pos_pool = assign.positive_indices
    neg_pool = assign.negative_indices
    pos = rng.choice(pos_pool, size=min(n_pos, len(pos_pool)), replace=False)
    neg = rng.choice(neg_pool, size=min(n_neg, len(neg_pool)), replace=False)
    return pos, neg


def _sample_grid(box: Box, out_h: int, out_w: int):
    """Cell-center sample coordinates for pooling ``box`` to out_h x out_w."""
    xs = box.x0 + (np.arange(out_w) + 0.5) * (box.w / out_w)
    ys = box.y0 + (np.arange(out_h) + 0.5) * (box.h / out_h)
    return np.meshgrid(xs, ys)


def _check_pool_args(fm: np.ndarray, box: Box, out_h: int, out_w: int) -> np.ndarray:
    fm = np.asarray(fm, dtype=np.float64)
    if fm.ndim != 3:
        raise ValueError("feature map must be (channels, height, width)")
    if out_h < 1 or out_w < 1:
        raise ValueError("output dims must be >= 1")
    _, h, w = fm.shape
    ix = min(box.x1, w) - max(box.x0, 0)
    iy = min(box.y1, h) - max(box.y0, 0)
    if ix <= 0 or iy <= 0:
        raise ValueError("box has no area inside the feature map")
    return fm


def _neighbor_values(fm: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Gather fm[:, p, q] with zero for out-of-grid texels."""
    _, h, w = fm.shape
    valid = (p >= 0) & (p < h) & (q >= 0) & (q < w)
    vals = fm[:, np.clip(p, 0, h - 1), np.clip(q, 0, w - 1)]
    return vals * valid[None]


def roi_pool_bilinear(fm: np.ndarray, box: Box, out_h: int, out_w: int) -> np.ndarray:
    """Pool ``box`` to a fixed (channels, out_h, out_w) patch.

    Each output cell reads the feature map at its cell center through
    bilinear interpolation; samples outside the map read zero.
    """
    fm = _check_pool_args(fm, box, out_h, out_w)
    x, y = _sample_grid(box, out_h, out_w)
    u, v = x - 0.5, y - 0.5
    q0 = np.floor(u).astype(np.int64)
    p0 = np.floor(v).astype(np.int64)
    fx, fy = u - q0, v - p0
    return (
        _neighbor_values(fm, p0, q0) * ((1 - fy) * (1 - fx))[None]
        + _neighbor_values(fm, p0, q0 + 1) * ((1 - fy) * fx)[None]
        + _neighbor_values(fm, p0 + 1, q0) * (fy * (1 - fx))[None]
        + _neighbor_values(fm, p0 + 1, q0 + 1) * (fy * fx)[None]
    )


def roi_pool_backward(
    fm: np.ndarray,
    box: Box,
    out_grad: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint of :func:`roi_pool_bilinear`.

    Returns (fm_grad, box_grad) where box_grad is a length-4 array of
    derivatives with respect to (xc, yc, w, h). Both are accumulated into
    zero-initialized buffers.
    """
    fm = _check_pool_args(fm, box, *out_grad.shape[1:])
    c, h, w = fm.shape
    out_h, out_w = out_grad.shape[1], out_grad.shape[2]
    x, y = _sample_grid(box, out_h, out_w)
    u, v = x - 0.5, y - 0.5
    q0 = np.floor(u).astype(np.int64)
    p0 = np.floor(v).astype(np.int64)
    fx, fy = u - q0, v - p0

    corners = [
        (p0, q0, (1 - fy) * (1 - fx)),
        (p0, q0 + 1, (1 - fy) * fx),
        (p0 + 1, q0, fy * (1 - fx)),
        (p0 + 1, q0 + 1, fy * fx),
    ]
    fm_grad = np.zeros_like(fm)
    for p, q, weight in corners:
        valid = (p >= 0) & (p < h) & (q >= 0) & (q < w)
        pc = np.clip(p, 0, h - 1).ravel()
        qc = np.clip(q, 0, w - 1).ravel()
        contrib = (out_grad * weight[None] * valid[None]).reshape(c, -1)
        for ch in range(c):
            np.add.at(fm_grad[ch], (pc, qc), contrib[ch])

    # Sample-position gradients from the bilinear weights.
    g00 = _neighbor_values(fm, p0, q0)
    g01 = _neighbor_values(fm, p0, q0 + 1)
    g10 = _neighbor_values(fm, p0 + 1, q0)
    g11 = _neighbor_values(fm, p0 + 1, q0 + 1)
    dval_dx = (1 - fy)[None] * (g01 - g00) + fy[None] * (g11 - g10)
    dval_dy = (1 - fx)[None] * (g10 - g00) + fx[None] * (g11 - g01)
    dl_dx = (out_grad * dval_dx).sum(axis=0)
    dl_dy = (out_grad * dval_dy).sum(axis=0)

    # x = xc + w * ax, y = yc + h * ay with the cell-center offsets below.
    ax = ((np.arange(out_w) + 0.5) / out_w - 0.5)[None, :]
    ay = ((np.arange(out_h) + 0.5) / out_h - 0.5)[:, None]
    box_grad = np.array(
        [dl_dx.sum(), dl_dy.sum(), (dl_dx * ax).sum(), (dl_dy * ay).sum()],
        dtype=np.float64,
    )
    return fm_grad, box_grad
