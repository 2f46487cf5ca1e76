"""Oriented 3D box algebra.

Boxes live on the ground plane: x/y are planar center coordinates, z is the
vertical center, yaw rotates about the vertical axis. Overlap quantities
decompose into a bird's-eye-view (BEV) polygon factor and a vertical
interval factor:

    intersection volume = area(BEV rectangle clip) * vertical overlap
    hull volume         = area(2D convex hull of 8 corners) * vertical span

BEV rectangle intersection uses successive half-plane clipping (convex vs
convex, exact for rectangles); the hull uses the monotone-chain algorithm.
All functions are pure; boxes are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Degenerate edges / slivers below this are treated as empty.
EPS = 1e-9


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.remainder(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Box3D:
    """7-DOF oriented box: center (x, y, z), dims (w, l, h), yaw.

    Length ``l`` runs along the heading axis, width ``w`` across it and
    height ``h`` along the vertical. Optional ``vx``/``vy`` carry
    ground-plane velocity when the dataset provides it.
    """

    x: float
    y: float
    z: float
    w: float
    l: float
    h: float
    yaw: float
    vx: Optional[float] = None
    vy: Optional[float] = None

    def __post_init__(self):
        if not (self.w > 0 and self.l > 0 and self.h > 0):
            raise ValueError(f"box dims must be positive, got w={self.w} l={self.l} h={self.h}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def z_interval(self) -> tuple[float, float]:
        return (self.z - self.h / 2.0, self.z + self.h / 2.0)


@dataclass(frozen=True)
class Detection:
    """One detector output: a box plus score, category and optional
    appearance payload (embedding vector, occlusion level 0-3)."""

    box: Box3D
    score: float
    category: int
    embedding: Optional[np.ndarray] = None
    occlusion: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0, 1], got {self.score}")
        if not 0 <= self.occlusion <= 3:
            raise ValueError(f"occlusion level must be in 0..3, got {self.occlusion}")


def volume(box: Box3D) -> float:
    """Box volume w*l*h (pose-invariant)."""
    return box.w * box.l * box.h


def bev_corners(box: Box3D) -> np.ndarray:
    """Four BEV corners (4, 2), counter-clockwise."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dl, dw = box.l / 2.0, box.w / 2.0
    local = np.array([[dl, dw], [-dl, dw], [-dl, -dw], [dl, -dw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([box.x, box.y])


def polygon_area(points: np.ndarray) -> float:
    """Shoelace area of a simple polygon given as (n, 2) vertices."""
    if len(points) < 3:
        return 0.0
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Clip a convex ``subject`` polygon by a convex ``clip`` polygon.

    Successive half-plane clipping against each clip edge. Both polygons
    must be counter-clockwise. Returns the (possibly empty) intersection
    polygon as an (n, 2) array.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            return np.empty((0, 2))
        a = clip[i]
        b = clip[(i + 1) % n]
        # Inside = left of directed edge a->b (CCW polygon interior).
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        inputs = output
        output = []
        s = inputs[-1]
        s_side = side(s)
        for e in inputs:
            e_side = side(e)
            if e_side >= -EPS:
                if s_side < -EPS:
                    output.append(_edge_intersection(s, e, a, b))
                output.append(e)
            elif s_side >= -EPS:
                output.append(_edge_intersection(s, e, a, b))
            s, s_side = e, e_side
    return np.array(output) if output else np.empty((0, 2))


def _edge_intersection(p1, p2, q1, q2) -> tuple[float, float]:
    """Intersection of line p1p2 with line q1q2 (assumed non-parallel)."""
    dpx, dpy = p2[0] - p1[0], p2[1] - p1[1]
    dqx, dqy = q2[0] - q1[0], q2[1] - q1[1]
    denom = dpx * dqy - dpy * dqx
    t = ((q1[0] - p1[0]) * dqy - (q1[1] - p1[1]) * dqx) / denom
    return (p1[0] + t * dpx, p1[1] + t * dpy)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """2D convex hull (monotone chain), returned counter-clockwise."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= EPS:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= EPS:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    poly = clip_convex(bev_corners(a), bev_corners(b))
    return polygon_area(poly)


def intersection_volume(a: Box3D, b: Box3D) -> float:
    """Overlap volume: BEV polygon intersection area times vertical overlap."""
    za0, za1 = a.z_interval
    zb0, zb1 = b.z_interval
    dz = min(za1, zb1) - max(za0, zb0)
    if dz <= EPS:
        return 0.0
    area = bev_intersection_area(a, b)
    if area <= EPS:
        return 0.0
    return area * dz


def union_volume(a: Box3D, b: Box3D) -> float:
    return volume(a) + volume(b) - intersection_volume(a, b)


def hull_volume(a: Box3D, b: Box3D) -> float:
    """Enclosing volume: 2D hull of the 8 BEV corners times the spanning
    vertical interval."""
    corners = np.vstack([bev_corners(a), bev_corners(b)])
    hull = convex_hull(corners)
    za0, za1 = a.z_interval
    zb0, zb1 = b.z_interval
    span = max(za1, zb1) - min(za0, zb0)
    return polygon_area(hull) * span


def iou3d(a: Box3D, b: Box3D) -> float:
    inter = intersection_volume(a, b)
    if inter <= 0.0:
        return 0.0
    return inter / (volume(a) + volume(b) - inter)


def giou3d(a: Box3D, b: Box3D) -> float:
    """Generalized 3D IoU in (-1, 1]: IoU minus the hull fraction not
    covered by the union. Symmetric; negative for disjoint boxes whose
    hull strictly exceeds the union."""
    inter = intersection_volume(a, b)
    union = volume(a) + volume(b) - inter
    hull = hull_volume(a, b)
    iou = inter / union
    return iou - (hull - union) / hull


def nms(detections: Sequence[Detection], threshold: float) -> list[Detection]:
    """Greedy class-aware non-maximum suppression on 3D IoU.

    Detections are visited by descending confidence; a detection survives
    if its IoU3D with every already-kept detection of the same category is
    at most ``threshold``. Never suppresses across categories.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"nms threshold must be in [0, 1], got {threshold}")
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    kept: list[int] = []
    for i in order:
        det = detections[i]
        suppressed = False
        for j in kept:
            other = detections[j]
            if other.category != det.category:
                continue
            if iou3d(det.box, other.box) > threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    kept.sort()
    return [detections[i] for i in kept]
