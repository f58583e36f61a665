"""Axis-aligned boxes, 2-D transforms, IOU and center distance.

Shared vocabulary for augmentation, label induction and evaluation.
Coordinate convention: continuous coordinates, top-left origin, y grows
downward; pixel (row i, col j) occupies the unit square [j, j+1) x [i, i+1),
so the IOU of integer-aligned boxes matches pixel counting exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateWarpError(ValueError):
    """A projective transform mapped a point to (or near) infinity."""


@dataclass(frozen=True)
class Point2:
    """A 2-D point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle (x1, y1) top-left to (x2, y2) bottom-right.

    Degenerate (zero-area) boxes are valid values.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError("non-finite box coordinate")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(
                f"invalid box ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "requires x1 <= x2 and y1 <= y2"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point2:
        return Point2((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def corners(self) -> list[Point2]:
        """The four corners, clockwise from top-left."""
        return [
            Point2(self.x1, self.y1),
            Point2(self.x2, self.y1),
            Point2(self.x2, self.y2),
            Point2(self.x1, self.y2),
        ]

    def clip(self, width: float, height: float) -> "BoundingBox":
        """Clip to the frame [0, width] x [0, height]."""
        x1 = min(max(self.x1, 0.0), width)
        x2 = min(max(self.x2, 0.0), width)
        y1 = min(max(self.y1, 0.0), height)
        y2 = min(max(self.y2, 0.0), height)
        return BoundingBox(x1, y1, x2, y2)

    def inset(self, margin: float) -> "BoundingBox":
        """Shrink inward by `margin` on all sides, collapsing at the center."""
        cx, cy = self.center.x, self.center.y
        return BoundingBox(
            min(self.x1 + margin, cx),
            min(self.y1 + margin, cy),
            max(self.x2 - margin, cx),
            max(self.y2 - margin, cy),
        )

    def union(self, other: "BoundingBox") -> "BoundingBox":
        """Smallest box containing both."""
        return BoundingBox(
            min(self.x1, other.x1),
            min(self.y1, other.y1),
            max(self.x2, other.x2),
            max(self.y2, other.y2),
        )


@dataclass(frozen=True)
class Affine2:
    """2x3 affine transform (rotation / scale / shear / translation)."""

    matrix: tuple[tuple[float, float, float], tuple[float, float, float]]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 3) or not np.all(np.isfinite(m)):
            raise ValueError("affine transform requires a finite 2x3 matrix")

    @staticmethod
    def identity() -> "Affine2":
        return Affine2(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)))

    @staticmethod
    def translation(tx: float, ty: float) -> "Affine2":
        return Affine2(((1.0, 0.0, tx), (0.0, 1.0, ty)))

    @staticmethod
    def rotation_about(degrees: float, cx: float, cy: float) -> "Affine2":
        """Rotation by `degrees` (counter-clockwise on screen, y-down frame) about (cx, cy)."""
        th = math.radians(degrees)
        c, s = math.cos(th), math.sin(th)
        # conjugate the rotation by the translation to the pivot
        return Affine2((
            (c, s, cx - c * cx - s * cy),
            (-s, c, cy + s * cx - c * cy),
        ))

    def apply(self, p: Point2) -> Point2:
        (a, b, tx), (c, d, ty) = self.matrix
        return Point2(a * p.x + b * p.y + tx, c * p.x + d * p.y + ty)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), Affine2.identity().as_array(), atol=tol))


@dataclass(frozen=True)
class Projective2:
    """3x3 homography, normalized so the bottom-right entry is 1."""

    matrix: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("projective transform requires a finite 3x3 matrix")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise ValueError("projective transform is singular")
        if abs(m[2, 2] - 1.0) > 1e-9:
            raise ValueError("homography must be normalized to matrix[2][2] == 1")

    @staticmethod
    def from_array(m: np.ndarray) -> "Projective2":
        m = np.asarray(m, dtype=float)
        if abs(m[2, 2]) <= 1e-12:
            raise DegenerateWarpError("homography has vanishing normalization entry")
        m = m / m[2, 2]
        m[2, 2] = 1.0
        return Projective2(tuple(tuple(float(v) for v in row) for row in m))

    @staticmethod
    def identity() -> "Projective2":
        return Projective2(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))

    @staticmethod
    def from_point_pairs(src: list[Point2], dst: list[Point2]) -> "Projective2":
        """Solve the homography mapping 4 source points onto 4 target points (DLT)."""
        if len(src) != 4 or len(dst) != 4:
            raise ValueError("exactly 4 point correspondences required")
        rows, rhs = [], []
        for s, d in zip(src, dst):
            rows.append([s.x, s.y, 1, 0, 0, 0, -d.x * s.x, -d.x * s.y])
            rhs.append(d.x)
            rows.append([0, 0, 0, s.x, s.y, 1, -d.y * s.x, -d.y * s.y])
            rhs.append(d.y)
        try:
            h = np.linalg.solve(np.asarray(rows, float), np.asarray(rhs, float))
        except np.linalg.LinAlgError as exc:
            raise DegenerateWarpError(f"singular homography system: {exc}") from exc
        m = np.append(h, 1.0).reshape(3, 3)
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateWarpError("homography is singular")
        return Projective2.from_array(m)

    def apply(self, p: Point2) -> Point2:
        m = self.as_array()
        v = m @ np.array([p.x, p.y, 1.0])
        if abs(v[2]) <= 1e-12:
            raise DegenerateWarpError(f"point ({p.x}, {p.y}) maps to infinity")
        return Point2(float(v[0] / v[2]), float(v[1] / v[2]))

    def inverse(self) -> "Projective2":
        return Projective2.from_array(np.linalg.inv(self.as_array()))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), np.eye(3), atol=tol))


Transform2 = Affine2 | Projective2


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when the union has zero area."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centers."""
    ca, cb = a.center, b.center
    return math.hypot(ca.x - cb.x, ca.y - cb.y)


def transform_box(t: Transform2, b: BoundingBox) -> BoundingBox:
    """Map the four corners of `b` through `t`; return their axis-aligned envelope.

    Raises DegenerateWarpError if a projective transform sends a corner to
    the plane at infinity.
    """
    pts = [t.apply(c) for c in b.corners()]
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    return BoundingBox(min(xs), min(ys), max(xs), max(ys))
