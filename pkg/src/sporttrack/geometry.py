"""Box, point and embedding primitives used by every other module.

Boxes are axis-aligned and stored as left-top corner plus width and height,
in pixels. All distances and thresholds in the package are raw pixel values
at native image resolution; nothing here normalises by image size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, ZeroDisplacementError, ZeroVectorError

Embedding = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box; w and h must be strictly positive and finite."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"box {name} must be finite, got {value!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Disjoint boxes score 0; boxes that merely share an edge have zero
    intersection area and also score 0.
    """
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return min(1.0, inter / (a.area + b.area - inter))


def center(box: BoundingBox) -> Point:
    return Point(box.x + box.w / 2, box.y + box.h / 2)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    ca, cb = center(a), center(b)
    return math.hypot(ca.x - cb.x, ca.y - cb.y)


def direction_angle(start: Point, end: Point) -> float:
    """Angle of travel from start to end, in radians in (-pi, pi].

    Raises ZeroDisplacementError when the points coincide, because the
    direction is undefined there rather than zero.
    """
    dx = end.x - start.x
    dy = end.y - start.y
    if dx == 0 and dy == 0:
        raise ZeroDisplacementError(f"no displacement from {start} to {end}")
    angle = math.atan2(dy, dx)
    if angle == -math.pi:
        angle = math.pi
    return angle


def angle_difference(a: float, b: float) -> float:
    """Absolute difference between two angles, wrapped into [0, pi]."""
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def cosine_similarity(u: Embedding, v: Embedding) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"embedding dims differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVectorError("cosine similarity undefined for a zero vector")
    value = float(np.dot(u, v) / (nu * nv))
    return max(-1.0, min(1.0, value))


def cosine_distance(u: Embedding, v: Embedding) -> float:
    return 1.0 - cosine_similarity(u, v)


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) float array of (x, y, w, h)."""
    if not boxes:
        return np.zeros((0, 4))
    return np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=float)


def centers_array(boxes: np.ndarray) -> np.ndarray:
    """Centers of an (n, 4) box array as an (n, 2) array."""
    return boxes[:, :2] + boxes[:, 2:] / 2


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between an (n, 4) and an (m, 4) box array.

    Same convention as iou(): empty or edge-touching intersections are 0.
    """
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    ax1, ay1 = a[:, 0, None], a[:, 1, None]
    ax2, ay2 = ax1 + a[:, 2, None], ay1 + a[:, 3, None]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = a[:, 2, None] * a[:, 3, None] + b[None, :, 2] * b[None, :, 3] - inter
    return np.where(inter > 0, inter / union, 0.0)


def distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise center distances between two (n, 4) box arrays."""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    ca = centers_array(a)
    cb = centers_array(b)
    diff = ca[:, None, :] - cb[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))
