"""Rigid transforms and axis-aligned boxes shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


@dataclass(frozen=True)
class RigidTransform:
    """Rigid body transform (rotation then translation), sensor -> world."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    @classmethod
    def from_quaternion(cls, qx, qy, qz, qw, t=(0.0, 0.0, 0.0)) -> "RigidTransform":
        rot = Rotation.from_quat([qx, qy, qz, qw]).as_matrix()
        return cls(rot, np.asarray(t, dtype=float))

    def to_quaternion(self) -> np.ndarray:
        """Return (qx, qy, qz, qw)."""
        return Rotation.from_matrix(self.rotation).as_quat()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack of points (..., 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self @ other).apply(p) == self.apply(other.apply(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


@dataclass
class Box3:
    """Axis-aligned box in world coordinates."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    @classmethod
    def from_points(cls, points: np.ndarray) -> "Box3":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def height(self) -> float:
        return float(self.max_corner[2] - self.min_corner[2])

    @property
    def horizontal_diagonal(self) -> float:
        """Diagonal of the x-y footprint; the vertical extent does not count."""
        dx = self.max_corner[0] - self.min_corner[0]
        dy = self.max_corner[1] - self.min_corner[1]
        return float(np.hypot(dx, dy))

    @property
    def centroid(self) -> np.ndarray:
        return (self.min_corner + self.max_corner) / 2.0

    def intersects(self, other: "Box3") -> bool:
        return bool(
            np.all(self.min_corner <= other.max_corner)
            and np.all(other.min_corner <= self.max_corner)
        )

    def translated(self, offset) -> "Box3":
        off = np.asarray(offset, dtype=float)
        return Box3(self.min_corner + off, self.max_corner + off)

    def inflated(self, margin: float) -> "Box3":
        return Box3(self.min_corner - margin, self.max_corner + margin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points (N, 3) inside the box (inclusive)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=1)

    def copy(self) -> "Box3":
        return Box3(self.min_corner.copy(), self.max_corner.copy())
