"""Quaternion / vector algebra shared by every stage of the pipeline.

Conventions, fixed once for the whole package:

* World frame is right-handed with Z up; gravity points along (0, 0, -1) g.
* Quaternions are stored (w, x, y, z) and renormalized by every producing
  operation, so the unit-norm invariant is checkable after any call.
* ``rotate_vector(q, v)`` maps a body-frame vector into the world frame;
  the inverse mapping uses the conjugate.
* Euler angles are intrinsic Z-Y-X (yaw about world up, then pitch about
  the body lateral axis, then roll), in degrees. Pitch lies in [-90, +90];
  at gimbal lock the roll is defined to be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_DEG = math.pi / 180.0


@dataclass(frozen=True, slots=True)
class Vec3:
    """A 3-vector. Units depend on context (mm, g, deg/s, gauss)."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scale(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero-length vector")
        return self.scale(1.0 / n)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class UnitQuat:
    """Unit quaternion (w, x, y, z) representing a rotation."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "UnitQuat":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return UnitQuat(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "UnitQuat":
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def multiply(self, other: "UnitQuat") -> "UnitQuat":
        """Hamilton product self ⊗ other, renormalized."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ).normalized()

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


IDENTITY_QUAT = UnitQuat(1.0, 0.0, 0.0, 0.0)

EX = Vec3(1.0, 0.0, 0.0)
EY = Vec3(0.0, 1.0, 0.0)
EZ = Vec3(0.0, 0.0, 1.0)
WORLD_UP = EZ
GRAVITY_WORLD = Vec3(0.0, 0.0, -1.0)  # in g


@dataclass(frozen=True, slots=True)
class EulerAngles:
    """Intrinsic Z-Y-X yaw/pitch/roll, degrees."""

    yaw: float
    pitch: float
    roll: float


@dataclass(frozen=True, slots=True)
class PlaneBasis:
    """Orthonormal in-plane axes (u, v) and normal n, plus an origin in mm."""

    u: Vec3
    v: Vec3
    n: Vec3
    origin: Vec3


def axis_angle_quat(axis: Vec3, angle_deg: float) -> UnitQuat:
    """Quaternion for a rotation of ``angle_deg`` about ``axis``."""
    a = axis.normalized()
    half = 0.5 * angle_deg * _DEG
    s = math.sin(half)
    return UnitQuat(math.cos(half), a.x * s, a.y * s, a.z * s).normalized()


def rotate_vector(q: UnitQuat, v: Vec3) -> Vec3:
    """Apply the rotation q to v (body frame -> world frame)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    # R(q)·v expanded; cheaper than building the full matrix
    tx = 2.0 * (y * v.z - z * v.y)
    ty = 2.0 * (z * v.x - x * v.z)
    tz = 2.0 * (x * v.y - y * v.x)
    return Vec3(
        v.x + w * tx + (y * tz - z * ty),
        v.y + w * ty + (z * tx - x * tz),
        v.z + w * tz + (x * ty - y * tx),
    )


def integrate_gyro(q: UnitQuat, omega_dps: Vec3, dt_s: float) -> UnitQuat:
    """Advance q by the body-frame rotation vector omega*dt.

    omega is in deg/s. The increment uses the exact axis-angle exponential,
    so constant-rate integration is exact regardless of step size.
    """
    if dt_s < 0.0:
        raise ValueError(f"dt must be non-negative, got {dt_s}")
    rx = omega_dps.x * _DEG * dt_s
    ry = omega_dps.y * _DEG * dt_s
    rz = omega_dps.z * _DEG * dt_s
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        dq = UnitQuat(1.0, 0.5 * rx, 0.5 * ry, 0.5 * rz)
    else:
        half = 0.5 * angle
        k = math.sin(half) / angle
        dq = UnitQuat(math.cos(half), rx * k, ry * k, rz * k)
    return q.multiply(dq)


def quat_to_matrix(q: UnitQuat) -> list[list[float]]:
    """3x3 rotation matrix of q (columns are the rotated body axes)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]


def quat_from_matrix(m: list[list[float]]) -> UnitQuat:
    """Quaternion of a 3x3 rotation matrix (Shepperd's branching)."""
    trace = m[0][0] + m[1][1] + m[2][2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = UnitQuat(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    elif m[0][0] > m[1][1] and m[0][0] > m[2][2]:
        s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0
        q = UnitQuat(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    elif m[1][1] > m[2][2]:
        s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0
        q = UnitQuat(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    else:
        s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0
        q = UnitQuat(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    return q.normalized()


def from_euler(e: EulerAngles) -> UnitQuat:
    """Quaternion of intrinsic Z-Y-X Euler angles in degrees."""
    qz = axis_angle_quat(EZ, e.yaw)
    qy = axis_angle_quat(EY, e.pitch)
    qx = axis_angle_quat(EX, e.roll)
    return qz.multiply(qy).multiply(qx)


def to_euler(q: UnitQuat) -> EulerAngles:
    """Intrinsic Z-Y-X Euler angles of q, degrees.

    At |pitch| = 90 deg the yaw/roll split is by convention roll := 0.
    """
    m = quat_to_matrix(q)
    sp = -m[2][0]
    if sp >= 1.0 - 1e-12:
        pitch = 90.0
        yaw = math.degrees(math.atan2(-m[0][1], m[1][1]))
        roll = 0.0
    elif sp <= -1.0 + 1e-12:
        pitch = -90.0
        yaw = math.degrees(math.atan2(-m[0][1], m[1][1]))
        roll = 0.0
    else:
        pitch = math.degrees(math.asin(sp))
        yaw = math.degrees(math.atan2(m[1][0], m[0][0]))
        roll = math.degrees(math.atan2(m[2][1], m[2][2]))
    return EulerAngles(yaw, pitch, roll)


def angle_between(a: Vec3, b: Vec3) -> float:
    """Angle between two vectors in degrees, in [0, 180]."""
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        raise ValueError("angle_between is undefined for zero-length vectors")
    c = a.dot(b) / (na * nb)
    c = max(-1.0, min(1.0, c))
    return math.degrees(math.acos(c))


def plane_from_quat(q: UnitQuat, origin: Vec3 = Vec3(0.0, 0.0, 0.0)) -> PlaneBasis:
    """Plane basis whose u/v/n are the body x/y/z axes rotated by q."""
    w, x, y, z = q.w, q.x, q.y, q.z
    # columns of R(q), i.e. the rotated body axes, in one pass
    return PlaneBasis(
        u=Vec3(1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)),
        v=Vec3(2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)),
        n=Vec3(2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)),
        origin=origin,
    )
