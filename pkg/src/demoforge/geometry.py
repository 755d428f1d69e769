"""Quaternion and rigid-pose helpers.

Quaternions are (w, x, y, z) tuples (Hamilton convention); composing
``quat_mul(a, b)`` applies ``b`` first in the body frame of ``a``, i.e.
``R(a*b) = R(a) @ R(b)``. Positions are 3-tuples of floats in meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)

QUAT_NORM_TOL = 1e-9


def _as_vec3(v) -> Vec3:
    x, y, z = (float(c) for c in v)
    return (x, y, z)


def quat_normalize(q) -> Quat:
    w, x, y, z = (float(c) for c in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return (w / n, x / n, y / n, z / n)


def quat_mul(a, b) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q) -> Quat:
    w, x, y, z = q
    return (w, -x, -y, -z)


def quat_rotate(q, v) -> Vec3:
    """Rotate vector v by quaternion q."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * (q_vec x v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    # v' = v + w*t + q_vec x t
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_from_axis_angle(axis, angle: float) -> Quat:
    ax, ay, az = axis
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    h = 0.5 * angle
    s = math.sin(h) / n
    return (math.cos(h), ax * s, ay * s, az * s)


def quat_from_rpy_degrees(roll: float, pitch: float, yaw: float) -> Quat:
    """Intrinsic roll(x) -> pitch(y) -> yaw(z) rotation, angles in degrees."""
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), math.radians(roll))
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), math.radians(pitch))
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), math.radians(yaw))
    return quat_mul(quat_mul(qx, qy), qz)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def matrix_to_quat(m) -> Quat:
    m = np.asarray(m, dtype=np.float64)
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return quat_normalize((w, x, y, z))


def quat_angle(q) -> float:
    """Rotation angle in radians, in [0, pi]."""
    w = max(-1.0, min(1.0, float(q[0])))
    return 2.0 * math.acos(abs(w))


@dataclass(frozen=True)
class Pose6D:
    """Rigid pose: world position (m) and unit quaternion orientation (w,x,y,z)."""

    position: Vec3
    orientation: Quat = IDENTITY_QUAT

    def __post_init__(self):
        pos = _as_vec3(self.position)
        quat = tuple(float(c) for c in self.orientation)
        if len(quat) != 4:
            raise ValueError("orientation must have 4 components")
        if not all(math.isfinite(c) for c in pos):
            raise ValueError(f"non-finite position {pos}")
        if not all(math.isfinite(c) for c in quat):
            raise ValueError(f"non-finite orientation {quat}")
        n = math.sqrt(sum(c * c for c in quat))
        if abs(n - 1.0) > QUAT_NORM_TOL:
            raise ValueError(f"quaternion norm {n} deviates from 1 beyond {QUAT_NORM_TOL}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    def transform_point(self, p) -> Vec3:
        r = quat_rotate(self.orientation, p)
        return (r[0] + self.position[0], r[1] + self.position[1], r[2] + self.position[2])

    def rotate_vector(self, v) -> Vec3:
        return quat_rotate(self.orientation, v)

    def inverse_transform_point(self, p) -> Vec3:
        d = (p[0] - self.position[0], p[1] - self.position[1], p[2] - self.position[2])
        return quat_rotate(quat_conj(self.orientation), d)

    def compose(self, other: "Pose6D") -> "Pose6D":
        """self then other-in-self-frame: world_T = self_T @ other_T."""
        return Pose6D(
            self.transform_point(other.position),
            quat_normalize(quat_mul(self.orientation, other.orientation)),
        )

    def inverse(self) -> "Pose6D":
        qi = quat_conj(self.orientation)
        p = quat_rotate(qi, self.position)
        return Pose6D((-p[0], -p[1], -p[2]), qi)

    def with_position(self, position) -> "Pose6D":
        return Pose6D(_as_vec3(position), self.orientation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m


def vec_add(a, b) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vec_sub(a, b) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vec_scale(a, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vec_dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vec_cross(a, b) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vec_norm(a) -> float:
    return math.sqrt(vec_dot(a, a))


def vec_unit(a) -> Vec3:
    n = vec_norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def frame_quat(x_axis, y_axis, z_axis) -> Quat:
    """Quaternion whose rotation matrix has the given unit columns."""
    m = np.column_stack([x_axis, y_axis, z_axis])
    return matrix_to_quat(m)


def look_at_quat(eye, target, up=(0.0, 0.0, 1.0)) -> Quat:
    """Camera-to-world orientation: +z toward target, +x right, +y down."""
    f = vec_unit(vec_sub(target, eye))
    x = vec_cross(f, up)
    if vec_norm(x) < 1e-9:
        x = vec_cross(f, (1.0, 0.0, 0.0))
        if vec_norm(x) < 1e-9:
            x = vec_cross(f, (0.0, 1.0, 0.0))
    x = vec_unit(x)
    y = vec_cross(f, x)
    return frame_quat(x, y, f)
