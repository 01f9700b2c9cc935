"""Camera model, frame-tagged 3D points and the transforms between them.

Conventions, fixed for the whole package:

- Camera frame: x right, y down, z forward (standard pinhole; a pixel
  (u, v) with depth d backprojects to z = d).
- World frame: right-handed, gravity-aligned, z up. The ground plane is
  (x, y); "horizontal" always means these two components.
- Poses are world-from-camera: p_world = R * p_camera + t, with t the
  ego agent's position.
- Semi-local frame: world orientation, ego-centered. Equivalently
  R * p_camera, or p_world - t; the ego agent sits at its origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Quaternions are renormalized silently within NORM_SOFT of unit length;
# anything further off than NORM_HARD is rejected as corrupt input.
NORM_SOFT = 1e-6
NORM_HARD = 1e-3


class GeometryError(ValueError):
    """Rejected geometric input (bad depth, out-of-bounds pixel, bad pose)."""


class FrameTagError(TypeError):
    """A point was passed to an operation expecting a different frame."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )


@dataclass(frozen=True)
class PixelPoint:
    """Pixel coordinates plus the metric depth sampled at that pixel."""

    u: float
    v: float
    depth: float


class _Point3:
    """Shared behaviour of the frame-tagged point types."""

    __slots__ = ()

    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def horizontal_norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class CameraPoint(_Point3):
    """3D point in the camera frame (x right, y down, z forward), meters."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SemiLocalPoint(_Point3):
    """3D point in the semi-local frame (world orientation, ego at origin)."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class WorldPoint(_Point3):
    """3D point in the gravity-aligned world frame (z up), meters."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z) representing a rotation."""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: tuple[float, float, float], angle: float) -> "Quaternion":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            raise GeometryError("rotation axis must be non-zero")
        s = math.sin(angle / 2.0) / n
        return cls(math.cos(angle / 2.0), ax * s, ay * s, az * s)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        """Renormalize, rejecting quaternions further than NORM_HARD from unit."""
        n = self.norm()
        if abs(n - 1.0) > NORM_HARD:
            raise GeometryError(f"quaternion norm {n} too far from 1 to trust")
        if abs(n - 1.0) <= NORM_SOFT:
            return self
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product; (a * b) rotates first by b, then by a."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def rotate(self, p: tuple[float, float, float]) -> tuple[float, float, float]:
        """Rotate a 3-vector: v' = v + 2w(q x v) + 2 q x (q x v)."""
        qx, qy, qz, qw = self.x, self.y, self.z, self.w
        vx, vy, vz = p
        # t = 2 * q_vec x v
        tx = 2.0 * (qy * vz - qz * vy)
        ty = 2.0 * (qz * vx - qx * vz)
        tz = 2.0 * (qx * vy - qy * vx)
        return (
            vx + qw * tx + (qy * tz - qz * ty),
            vy + qw * ty + (qz * tx - qx * tz),
            vz + qw * tz + (qx * ty - qy * tx),
        )

    def rotate_inverse(self, p: tuple[float, float, float]) -> tuple[float, float, float]:
        return self.conjugate().rotate(p)

    def rotation_matrix(self) -> list[list[float]]:
        w, x, y, z = self.w, self.x, self.y, self.z
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]


@dataclass(frozen=True)
class Pose:
    """World-from-camera rigid transform: rotation quaternion + ego position."""

    rotation: Quaternion
    translation: WorldPoint

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", self.rotation.normalized())
        if not isinstance(self.translation, WorldPoint):
            raise FrameTagError("pose translation must be a WorldPoint")


def backproject(p: PixelPoint, k: CameraIntrinsics) -> CameraPoint:
    """Lift a pixel + depth to a camera-frame point: d * K^-1 * [u v 1]^T."""
    if not isinstance(p, PixelPoint):
        raise FrameTagError("backproject expects a PixelPoint")
    if p.depth <= 0:
        raise GeometryError(f"depth must be positive, got {p.depth}")
    if not (0 <= p.u < k.width and 0 <= p.v < k.height):
        raise GeometryError(f"pixel ({p.u}, {p.v}) outside {k.width}x{k.height} image")
    return CameraPoint(
        x=p.depth * (p.u - k.cx) / k.fx,
        y=p.depth * (p.v - k.cy) / k.fy,
        z=p.depth,
    )


def project(p: CameraPoint, k: CameraIntrinsics) -> PixelPoint:
    """Inverse of backproject; requires the point in front of the camera."""
    if not isinstance(p, CameraPoint):
        raise FrameTagError("project expects a CameraPoint")
    if p.z <= 0:
        raise GeometryError(f"cannot project point behind the camera (z={p.z})")
    return PixelPoint(
        u=k.cx + k.fx * p.x / p.z,
        v=k.cy + k.fy * p.y / p.z,
        depth=p.z,
    )


def camera_to_world(p: CameraPoint, pose: Pose) -> WorldPoint:
    """R * p + t."""
    if not isinstance(p, CameraPoint):
        raise FrameTagError("camera_to_world expects a CameraPoint")
    rx, ry, rz = pose.rotation.rotate(p.as_tuple())
    t = pose.translation
    return WorldPoint(rx + t.x, ry + t.y, rz + t.z)


def world_to_camera(p: WorldPoint, pose: Pose) -> CameraPoint:
    """R^-1 * (p - t); the generator-side inverse of camera_to_world."""
    if not isinstance(p, WorldPoint):
        raise FrameTagError("world_to_camera expects a WorldPoint")
    t = pose.translation
    cx, cy, cz = pose.rotation.rotate_inverse((p.x - t.x, p.y - t.y, p.z - t.z))
    return CameraPoint(cx, cy, cz)


def camera_to_semilocal(p: CameraPoint, rotation: Quaternion) -> SemiLocalPoint:
    """R * p: rotate into world orientation without translating."""
    if not isinstance(p, CameraPoint):
        raise FrameTagError("camera_to_semilocal expects a CameraPoint")
    rx, ry, rz = rotation.normalized().rotate(p.as_tuple())
    return SemiLocalPoint(rx, ry, rz)


def world_to_semilocal(p: WorldPoint, pose: Pose) -> SemiLocalPoint:
    """p - t: world coordinates relative to the ego agent."""
    if not isinstance(p, WorldPoint):
        raise FrameTagError("world_to_semilocal expects a WorldPoint")
    t = pose.translation
    return SemiLocalPoint(p.x - t.x, p.y - t.y, p.z - t.z)
