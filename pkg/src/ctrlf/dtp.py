"""Dilated text proposals: connected-component region proposals.

Grayscale manuscript images (float arrays in [0, 1], dark ink on light
ground) are binarized at several multiples of the image mean, each binary
image is morphologically closed with several rectangular kernels, and
tight bounding boxes of the connected components of every (threshold,
kernel) combination are pooled and deduplicated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from .geometry import Box

__all__ = ["DtpConfig", "multi_threshold", "morph_close", "connected_component_boxes", "dtp_proposals"]

_CONNECTIVITY_STRUCTS = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class DtpConfig:
    """Proposal-generator knobs.

    ``threshold_coeffs`` are the multiples of the image mean used for
    binarization; ``kernels`` are (width, height) closing rectangles with
    odd sides, biased horizontal because word fragments separate mainly
    along the text line. Components smaller than ``min_box_area`` pixels
    are dropped.
    """

    threshold_coeffs: tuple[float, ...] = (0.6, 0.8, 0.9, 1.0)
    kernels: tuple[tuple[int, int], ...] = ((5, 1), (9, 1), (15, 3), (21, 3), (31, 5))
    min_box_area: int = 20
    connectivity: int = 8
    invert: bool = False  # set for light ink on dark ground

    def __post_init__(self):
        if not self.threshold_coeffs or any(c <= 0 for c in self.threshold_coeffs):
            raise ValueError("threshold coefficients must be positive and non-empty")
        if not self.kernels or any(kw < 1 or kh < 1 for kw, kh in self.kernels):
            raise ValueError("kernel dims must be >= 1 and non-empty")
        if self.connectivity not in _CONNECTIVITY_STRUCTS:
            raise ValueError("connectivity must be 4 or 8")


def multi_threshold(img: np.ndarray, coeffs) -> list[np.ndarray]:
    """Binarize at each multiple of the image mean; ink (foreground) is
    every pixel strictly below coeff * mean."""
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    mean = img.mean()
    return [img < c * mean for c in coeffs]


def morph_close(binary: np.ndarray, kernel_w: int, kernel_h: int) -> np.ndarray:
    """Binary closing with a kernel_w x kernel_h rectangle.

    Pixels outside the image count as background for both the dilation and
    the erosion, so closing never reaches beyond a one-kernel margin.
    """
    if kernel_w % 2 == 0 or kernel_h % 2 == 0:
        raise ValueError("kernel sides must be odd")
    binary = np.asarray(binary, dtype=bool)
    if kernel_w == 1 and kernel_h == 1:
        return binary.copy()
    structure = np.ones((kernel_h, kernel_w), dtype=bool)
    dilated = ndi.binary_dilation(binary, structure=structure, border_value=0)
    return ndi.binary_erosion(dilated, structure=structure, border_value=0)


def connected_component_boxes(binary: np.ndarray, connectivity: int = 8, min_area: int = 0) -> list[Box]:
    """Tight bounding box of every foreground component with at least
    ``min_area`` pixels, in top-left scan order of first encounter."""
    binary = np.asarray(binary, dtype=bool)
    labels, n = ndi.label(binary, structure=_CONNECTIVITY_STRUCTS[connectivity])
    if n == 0:
        return []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    boxes = []
    for lab, sl in enumerate(ndi.find_objects(labels), start=1):
        if sl is None or counts[lab] < min_area:
            continue
        ys, xs = sl
        boxes.append(Box.from_corners(float(xs.start), float(ys.start), float(xs.stop), float(ys.stop)))
    return boxes


def dtp_proposals(img: np.ndarray, cfg: DtpConfig = DtpConfig()) -> list[Box]:
    """Pool component boxes over every (threshold, kernel) combination.

    Exact duplicates (same integer corner coordinates) are removed and the
    result is sorted by corner coordinates, so the output is deterministic
    regardless of evaluation order.
    """
    img = np.asarray(img, dtype=np.float64)
    if cfg.invert:
        img = img.max() - img
    seen: set[tuple[float, float, float, float]] = set()
    for binary in multi_threshold(img, cfg.threshold_coeffs):
        for kw, kh in cfg.kernels:
            closed = morph_close(binary, kw, kh)
            for box in connected_component_boxes(closed, cfg.connectivity, cfg.min_box_area):
                seen.add(box.corners())
    return [Box.from_corners(*c) for c in sorted(seen)]
