"""Axis-aligned box algebra.

Boxes are kept in center form (xc, yc, w, h) in page-pixel units; corner
form (x0, y0, x1, y1) is derived on demand. Everything here is pure and
deterministic: IoU, greedy non-maximum suppression, anchor-relative box
encoding/decoding, and the smooth-L1 regression loss with its gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "BoxDelta",
    "iou",
    "iou_matrix",
    "nms",
    "encode_delta",
    "decode_delta",
    "smooth_l1",
    "boxes_to_corners",
    "boxes_from_corners",
]


@dataclass(frozen=True)
class Box:
    """A box as center coordinates plus positive width and height."""

    xc: float
    yc: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box needs positive size, got w={self.w}, h={self.h}")

    @property
    def x0(self) -> float:
        return self.xc - self.w / 2

    @property
    def y0(self) -> float:
        return self.yc - self.h / 2

    @property
    def x1(self) -> float:
        return self.xc + self.w / 2

    @property
    def y1(self) -> float:
        return self.yc + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @staticmethod
    def from_corners(x0: float, y0: float, x1: float, y1: float) -> "Box":
        return Box((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class BoxDelta:
    """Box offset relative to an anchor: normalized translation for the
    center, log-space scaling for width and height."""

    tx: float
    ty: float
    tw: float
    th: float


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint or when the
    intersection has zero area (boxes sharing only an edge)."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0 or iy <= 0:
        return 0.0
    # Areas from the same corner values as the intersection, so the result
    # stays in [0, 1] despite center-form rounding.
    inter = ix * iy
    area_a = (a.x1 - a.x0) * (a.y1 - a.y0)
    area_b = (b.x1 - b.x0) * (b.y1 - b.y0)
    return inter / (area_a + area_b - inter)


def boxes_to_corners(boxes: list[Box]) -> np.ndarray:
    """Stack boxes into an (N, 4) corner-form float array."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.corners() for b in boxes], dtype=np.float64)


def boxes_from_corners(arr: np.ndarray) -> list[Box]:
    return [Box.from_corners(*row) for row in np.asarray(arr, dtype=np.float64)]


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between corner-form box arrays, shape (N, M)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def nms(boxes: list[Box] | np.ndarray, scores, overlap_threshold: float) -> list[int]:
    """Greedy non-maximum suppression.

    Boxes are visited in descending score order (ties broken by lower
    original index); a box is suppressed when its IoU with an already-kept
    box exceeds ``overlap_threshold``. Returns kept indices in visit order.
    """
    corners = boxes if isinstance(boxes, np.ndarray) else boxes_to_corners(boxes)
    corners = np.asarray(corners, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(corners) != len(scores):
        raise ValueError(f"{len(corners)} boxes but {len(scores)} scores")

    order = np.lexsort((np.arange(len(scores)), -scores))
    kept: list[int] = []
    kept_corners: list[np.ndarray] = []
    for i in order:
        cand = corners[i]
        if kept_corners:
            overlaps = iou_matrix(cand[None, :], np.stack(kept_corners))[0]
            if np.any(overlaps > overlap_threshold):
                continue
        kept.append(int(i))
        kept_corners.append(cand)
    return kept


def encode_delta(anchor: Box, target: Box) -> BoxDelta:
    """Express ``target`` relative to ``anchor``: center offsets normalized
    by the anchor size, width/height as log ratios."""
    return BoxDelta(
        tx=(target.xc - anchor.xc) / anchor.w,
        ty=(target.yc - anchor.yc) / anchor.h,
        tw=math.log(target.w / anchor.w),
        th=math.log(target.h / anchor.h),
    )


def decode_delta(anchor: Box, delta: BoxDelta) -> Box:
    """Inverse of :func:`encode_delta`."""
    return Box(
        xc=anchor.xc + delta.tx * anchor.w,
        yc=anchor.yc + delta.ty * anchor.h,
        w=anchor.w * math.exp(delta.tw),
        h=anchor.h * math.exp(delta.th),
    )


def smooth_l1(x: float, t: float) -> tuple[float, float]:
    """Smooth-L1 regression loss and its derivative with respect to ``x``.

    With z = x - t: 0.5 z^2 for |z| < 1, |z| - 0.5 otherwise. The two
    branches agree in value and derivative at |z| = 1; the quadratic
    branch's derivative (z itself) is used there.
    """
    z = x - t
    if abs(z) <= 1.0:
        return 0.5 * z * z, z
    return abs(z) - 0.5, math.copysign(1.0, z)
