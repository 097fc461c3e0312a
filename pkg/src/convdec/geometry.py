"""Rotated rectangles, frames and orientation-preserving similarities.

A box is stored by its anchor point, the angle of its long side, and its
length/width; the rectangle is ``anchor + F @ diag(len, wid) @ ([0,1] x [-1,1])``
with ``F`` the rotation by the frame angle. Corners are always derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonPositiveScale, NotOriginCentered

CONTAINMENT_SLACK = 1e-9


def frame_from_slope(m: float) -> float:
    """Angle of the unit tangent (1, m)/|(1, m)|."""
    return math.atan(m)


def frame_vectors(angle: float):
    """Tangent and normal unit vectors; the normal is the tangent turned by +90 degrees."""
    c, s = math.cos(angle), math.sin(angle)
    return (c, s), (-s, c)


@dataclass(frozen=True)
class Similarity:
    """The map ``xi -> ratio * O(angle) @ (xi - point)``."""

    ratio: float = 1.0
    angle: float = 0.0
    point: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.ratio > 0:
            raise NonPositiveScale(f"similarity ratio must be positive, got {self.ratio}")

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return self.ratio * np.array([[c, -s], [s, c]])

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.ratio, math.cos(self.angle), math.sin(self.angle),
                self.point[0], self.point[1])

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        c, s = math.cos(self.angle), math.sin(self.angle)
        x = xi[..., 0] - self.point[0]
        y = xi[..., 1] - self.point[1]
        return np.stack([self.ratio * (c * x - s * y), self.ratio * (s * x + c * y)], axis=-1)

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        x -= self.point[0]
        y -= self.point[1]
        return self.ratio * (c * x - s * y), self.ratio * (s * x + c * y)

    def inverse(self) -> Similarity:
        # xi = p + O(-a) y / r = (1/r) O(-a) (y - (-r O(a) p))
        c, s = math.cos(self.angle), math.sin(self.angle)
        px, py = self.point
        q = (-self.ratio * (c * px - s * py), -self.ratio * (s * px + c * py))
        return Similarity(1.0 / self.ratio, -self.angle, q)

    def __matmul__(self, inner: Similarity) -> Similarity:
        """``self @ inner`` is the composition ``self o inner``."""
        return compose(self, inner)


IDENTITY = Similarity()


def compose(outer: Similarity, inner: Similarity) -> Similarity:
    # outer(inner(x)) = r1 r2 O(a1 + a2) (x - p2 - O(-a2) p1 / r2)
    c, s = math.cos(-inner.angle), math.sin(-inner.angle)
    qx, qy = outer.point
    px = inner.point[0] + (c * qx - s * qy) / inner.ratio
    py = inner.point[1] + (s * qx + c * qy) / inner.ratio
    return Similarity(outer.ratio * inner.ratio, outer.angle + inner.angle, (px, py))


@dataclass(frozen=True)
class CanonicalBox:
    """Rectangle ``anchor + (t | n) diag(length, width) ([0,1] x [-1,1])``.

    ``interval`` is the parameter interval of the curve arc the box was built
    from; ``anchor`` is the curve point at ``interval[0]``.
    """

    interval: tuple[float, float]
    anchor: tuple[float, float]
    angle: float
    length: float
    width: float
    level: int = 0
    kind: str = "root"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def anchor_param(self) -> float:
        return self.interval[0]

    @property
    def frame(self):
        return frame_vectors(self.angle)

    @property
    def centroid(self) -> tuple[float, float]:
        (tx, ty), _ = self.frame
        h = 0.5 * self.length
        return self.anchor[0] + h * tx, self.anchor[1] + h * ty

    @property
    def area(self) -> float:
        return 2.0 * self.length * self.width

    def corners(self) -> np.ndarray:
        return box_corners(self)

    def rescaling_map(self) -> Similarity:
        """``xi -> wid^{-1} (t | n)^{-1} (xi - anchor)``."""
        return Similarity(1.0 / self.width, -self.angle, self.anchor)

    def local_coords(self, pts) -> np.ndarray:
        """Coordinates relative to the centroid, scaled so the box is [-1,1]^2."""
        pts = np.asarray(pts, dtype=float)
        (tx, ty), (nx, ny) = self.frame
        cx, cy = self.centroid
        dx = pts[..., 0] - cx
        dy = pts[..., 1] - cy
        u = (dx * tx + dy * ty) / (0.5 * self.length)
        v = (dx * nx + dy * ny) / self.width
        return np.stack([u, v], axis=-1)

    def contains(self, pts, slack: float = CONTAINMENT_SLACK) -> np.ndarray:
        uv = self.local_coords(pts)
        return np.all(np.abs(uv) <= 1.0 + slack, axis=-1)

    def to_record(self) -> dict:
        return {
            "level": self.level,
            "kind": self.kind,
            "interval": [self.interval[0], self.interval[1]],
            "anchor": [self.anchor[0], self.anchor[1]],
            "frame_angle": self.angle,
            "len": self.length,
            "wid": self.width,
        }

    @classmethod
    def from_record(cls, rec: dict) -> CanonicalBox:
        return cls(tuple(rec["interval"]), tuple(rec["anchor"]), rec["frame_angle"],
                   rec["len"], rec["wid"], rec["level"], rec["kind"])


def box_corners(box: CanonicalBox) -> np.ndarray:
    """Images of (0,-1), (0,1), (1,1), (1,-1) under anchor + frame diag(len, wid)."""
    (tx, ty), (nx, ny) = box.frame
    ax, ay = box.anchor
    out = []
    for a, b in ((0.0, -1.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)):
        u, v = a * box.length, b * box.width
        out.append((ax + u * tx + v * nx, ay + u * ty + v * ny))
    return np.array(out)


def dilate(box: CanonicalBox, s: float) -> CanonicalBox:
    """Centroid-fixed dilation ``c + s (D - c)``."""
    if not s > 0:
        raise NonPositiveScale(f"dilation factor must be positive, got {s}")
    (tx, ty), _ = box.frame
    cx, cy = box.centroid
    h = 0.5 * s * box.length
    anchor = (cx - h * tx, cy - h * ty)
    return replace(box, anchor=anchor, length=s * box.length, width=s * box.width)


def contains_box(outer: CanonicalBox, inner: CanonicalBox, slack: float = CONTAINMENT_SLACK) -> bool:
    return bool(np.all(outer.contains(inner.corners(), slack)))


def map_box(sim: Similarity, box: CanonicalBox, **changes) -> CanonicalBox:
    """Image of a box under a similarity (anchor, angle and scales transported)."""
    anchor = sim.apply_point(*box.anchor)
    out = replace(box, anchor=anchor, angle=box.angle + sim.angle,
                  length=box.length * sim.ratio, width=box.width * sim.ratio)
    return replace(out, **changes) if changes else out


@dataclass(frozen=True)
class CenteredRect:
    """Origin-centred rectangle with half-axes along a rotated frame."""

    half_long: float
    half_short: float
    angle: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def contains(self, pts, slack: float = CONTAINMENT_SLACK) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        (tx, ty), (nx, ny) = frame_vectors(self.angle)
        u = (pts[..., 0] * tx + pts[..., 1] * ty) / self.half_long
        v = (pts[..., 0] * nx + pts[..., 1] * ny) / self.half_short
        return np.maximum(np.abs(u), np.abs(v)) <= 1.0 + slack

    def corners(self) -> np.ndarray:
        (tx, ty), (nx, ny) = frame_vectors(self.angle)
        out = []
        for a, b in ((-1, -1), (-1, 1), (1, 1), (1, -1)):
            u, v = a * self.half_long, b * self.half_short
            out.append((u * tx + v * nx, u * ty + v * ny))
        return np.array(out)


def centered(box: CanonicalBox) -> CenteredRect:
    """The box translated so that its centroid is the origin."""
    return CenteredRect(0.5 * box.length, box.width, box.angle)


def polar_dual(rect: CenteredRect | CanonicalBox) -> CenteredRect:
    """Rectangle dual to an origin-centred rectangle.

    The exact polar of a rectangle with half-axes (A, B) is the rhombus
    ``|u|A + |v|B <= 1``. We return the rectangle with half-axes (1/A, 1/B),
    which contains that rhombus and sits inside its double; it is also the
    rectangle whose inscribed ellipse is the polar of the box's inscribed
    ellipse.
    """
    if isinstance(rect, CanonicalBox):
        if np.hypot(*rect.centroid) > CONTAINMENT_SLACK * (rect.length + rect.width):
            raise NotOriginCentered("recentre the box before taking its dual")
        rect = centered(rect)
    return CenteredRect(1.0 / rect.half_long, 1.0 / rect.half_short, rect.angle,
                        meta={"sandwich": 2.0})
