"""Annotation geometry: quadrilateral hand boxes, axis-parallel box algebra,
minimum-area enclosing rectangles, crop extension, and dataset tallies.

Coordinates are continuous pixel values; boxes are closed intervals for all
area math. Everything here is pure and safe to call from multiple threads.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .head import CONTACT_STATES, LABEL_VALUES, validate_label


@dataclass(frozen=True)
class AxisBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise DimensionError(f"inverted box {self}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def as_list(self):
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class RotatedBox:
    cx: float
    cy: float
    width: float
    height: float
    angle: float  # radians, canonicalized to [0, pi/2)

    @property
    def area(self):
        return self.width * self.height

    def corners(self):
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = np.array([c, s])
        v = np.array([-s, c])
        center = np.array([self.cx, self.cy])
        hw, hh = self.width / 2.0, self.height / 2.0
        return np.array(
            [center - hw * u - hh * v, center + hw * u - hh * v,
             center + hw * u + hh * v, center - hw * u + hh * v]
        )


def _signed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_cross(p1, p2, p3, p4):
    # proper intersection only: shared endpoints/collinear touching do not count
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and all(
        d != 0 for d in (d1, d2, d3, d4)
    )


class Quadrilateral:
    """Four-vertex hand box. Vertices are normalized to counter-clockwise
    order on construction; a self-intersecting vertex sequence is repaired by
    reordering around the centroid (with a warning)."""

    def __init__(self, vertices):
        pts = np.asarray(vertices, dtype=np.float64)
        if pts.shape != (4, 2):
            raise DimensionError(f"quadrilateral needs 4 (x, y) vertices, got shape {pts.shape}")
        if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or _segments_cross(
            pts[1], pts[2], pts[3], pts[0]
        ):
            warnings.warn("self-intersecting quadrilateral repaired by reordering", stacklevel=2)
            centroid = pts.mean(axis=0)
            angles = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
            pts = pts[np.argsort(angles)]
        if _signed_area(pts) < 0:
            pts = pts[::-1].copy()
        self.vertices = pts

    @property
    def area(self):
        return _signed_area(self.vertices)

    def as_list(self):
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass
class HandAnnotation:
    quad: Quadrilateral
    contact: tuple  # 4-tuple over {yes, no, unsure}, indexed like CONTACT_STATES

    def __post_init__(self):
        self.contact = validate_label(self.contact)


@dataclass
class ImageRecord:
    image_id: str
    width: float
    height: float
    hands: list
    objects: list

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DimensionError(f"image {self.image_id}: non-positive size")


# ---------------------------------------------------------------------------
# box algebra


def envelope(quad):
    """Smallest axis-parallel box containing the quadrilateral."""
    pts = quad.vertices
    return AxisBox(float(pts[:, 0].min()), float(pts[:, 1].min()),
                   float(pts[:, 0].max()), float(pts[:, 1].max()))


def _convex_hull(pts):
    # monotone chain; returns hull in counter-clockwise order
    pts = sorted({(float(x), float(y)) for x, y in pts})
    if len(pts) <= 2:
        return pts

    def half(points):
        chain = []
        for p in points:
            while len(chain) >= 2:
                ax, ay = chain[-2]
                bx, by = chain[-1]
                if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    return lower[:-1] + upper[:-1]


def min_area_rect(quad):
    """Minimum-area enclosing rectangle of the quadrilateral.

    An optimal rectangle is aligned with some hull edge, so the sweep only
    examines hull-edge directions. Degenerate (collinear) input yields a
    zero-height rectangle along the segment.
    """
    hull = _convex_hull(quad.vertices)
    if len(hull) == 1:
        x, y = hull[0]
        return RotatedBox(x, y, 0.0, 0.0, 0.0)
    if len(hull) == 2:
        (x1, y1), (x2, y2) = hull
        length = math.hypot(x2 - x1, y2 - y1)
        angle = math.atan2(y2 - y1, x2 - x1)
        return _canonical_rect((x1 + x2) / 2.0, (y1 + y2) / 2.0, length, 0.0, angle)

    pts = np.array(hull)
    best = None
    for i in range(len(hull)):
        ex, ey = pts[(i + 1) % len(hull)] - pts[i]
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        c, s = ex / norm, ey / norm
        xs = pts[:, 0] * c + pts[:, 1] * s
        ys = -pts[:, 0] * s + pts[:, 1] * c
        w = xs.max() - xs.min()
        h = ys.max() - ys.min()
        if best is None or w * h < best[0]:
            cx_r, cy_r = (xs.max() + xs.min()) / 2.0, (ys.max() + ys.min()) / 2.0
            cx = cx_r * c - cy_r * s
            cy = cx_r * s + cy_r * c
            best = (w * h, cx, cy, w, h, math.atan2(ey, ex))
    _, cx, cy, w, h, angle = best
    return _canonical_rect(cx, cy, w, h, angle)


def _canonical_rect(cx, cy, w, h, angle):
    # fold the angle into [0, pi/2), swapping sides per quarter turn
    quarter = math.pi / 2.0
    angle = angle % math.pi
    if angle >= quarter:
        angle -= quarter
        w, h = h, w
    return RotatedBox(float(cx), float(cy), float(w), float(h), float(angle))


def extend_box(box, factor=1.5, bounds=None):
    """Scale each side about the box center (factor 1.5 gives 2.25x area).
    Clamps to [0, W] x [0, H] only when bounds=(W, H) is supplied."""
    if factor <= 0:
        raise ContractError(f"extend_box: factor must be positive, got {factor}")
    cx, cy = box.center
    hw, hh = box.width * factor / 2.0, box.height * factor / 2.0
    out = AxisBox(cx - hw, cy - hh, cx + hw, cy + hh)
    if bounds is not None:
        w, h = bounds
        out = AxisBox(max(0.0, out.x_min), max(0.0, out.y_min),
                      min(float(w), out.x_max), min(float(h), out.y_max))
    return out


def intersection_area(a, b):
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    return max(0.0, iw) * max(0.0, ih)


def iou(a, b):
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def overlap_fraction(hand, obj):
    """Fraction of the hand box covered by the object box."""
    if hand.area <= 0:
        raise ContractError("overlap_fraction: zero-area hand box")
    return intersection_area(hand, obj) / hand.area


def union_box(a, b):
    return AxisBox(min(a.x_min, b.x_min), min(a.y_min, b.y_min),
                   max(a.x_max, b.x_max), max(a.y_max, b.y_max))


def fallback_union(hand):
    """Union region when no object was detected: the hand's own region."""
    return hand


def size_filter(quad, height, width):
    """Keep a hand iff the minimum side of its axis-parallel envelope strictly
    exceeds min(height, width) / 30."""
    if height <= 0 or width <= 0:
        raise ContractError("size_filter: image dimensions must be positive")
    box = envelope(quad)
    return min(box.width, box.height) > min(height, width) / 30.0


def dataset_stats(records):
    """Tallies of yes/no/unsure per contact state over all hands."""
    records = list(records)
    per_state = [{v: 0 for v in LABEL_VALUES} for _ in CONTACT_STATES]
    hands = 0
    for rec in records:
        for hand in rec.hands:
            hands += 1
            for i, v in enumerate(hand.contact):
                per_state[i][v] += 1
    return {
        "images": len(records),
        "hands": hands,
        "per_state": {CONTACT_STATES[i]: per_state[i] for i in range(len(CONTACT_STATES))},
    }
