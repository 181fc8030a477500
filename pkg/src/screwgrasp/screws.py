"""Rigid transforms, unit screws in Plücker coordinates and constant screw motion.

Conventions
-----------
* A :class:`Pose` maps body coordinates to reference coordinates,
  ``x_ref = R @ x_body + p``.
* Pitch is translation per radian, ``h = d / theta``.  Pure translation is
  encoded by ``h = inf`` with a zero moment vector.
* The rotation angle of a displacement is canonicalized to ``(0, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import IdentityDisplacement

INFINITE = math.inf

IDENTITY_TOL = 1e-9


def skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def rodrigues(axis, angle):
    K = skew(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_translation(cls, t):
        return cls(np.eye(3), t)

    @classmethod
    def from_rotation(cls, R):
        return cls(R, np.zeros(3))

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def random(cls, rng, translation_scale=1.0):
        R = Rotation.random(random_state=rng).as_matrix()
        return cls(R, rng.uniform(-translation_scale, translation_scale, 3))

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, points):
        """Map points (shape ``(3,)`` or ``(N, 3)``) from body to reference frame."""
        return np.asarray(points) @ self.rotation.T + self.translation

    def rotate(self, vectors):
        return np.asarray(vectors) @ self.rotation.T

    def __matmul__(self, other: "Pose") -> "Pose":
        return pose_compose(self, other)

    def inverse(self) -> "Pose":
        return pose_inverse(self)

    def is_valid(self, tol=1e-9):
        R = self.rotation
        return (np.max(np.abs(R.T @ R - np.eye(3))) <= tol
                and np.linalg.det(R) > 0.0)

    def allclose(self, other, atol=1e-9):
        return (np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
                and np.allclose(self.translation, other.translation, atol=atol, rtol=0))

    def to_json(self):
        w_last = Rotation.from_matrix(self.rotation).as_quat()
        q = [float(w_last[3]), float(w_last[0]), float(w_last[1]), float(w_last[2])]
        return {"position": [float(x) for x in self.translation], "quaternion": q}

    @classmethod
    def from_json(cls, data):
        q = np.asarray(data["quaternion"], dtype=float)
        if q.shape != (4,):
            raise ValueError("quaternion must have 4 components [w, x, y, z]")
        norm = np.linalg.norm(q)
        if abs(norm - 1.0) >= 1e-6:
            raise ValueError(f"quaternion is not unit length (|q| = {norm:.9f})")
        q = q / norm
        R = Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
        return cls(R, data["position"])

    def __repr__(self):
        return f"Pose(R={self.rotation.tolist()}, p={self.translation.tolist()})"


def pose_compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pose_inverse(g: Pose) -> Pose:
    Rt = g.rotation.T
    return Pose(Rt, -Rt @ g.translation)


@dataclass(frozen=True, eq=False)
class UnitScrew:
    """Screw axis ``(l, m)`` with pitch ``h`` (``INFINITE`` for pure translation)."""

    direction: np.ndarray
    moment: np.ndarray
    pitch: float

    def __post_init__(self):
        l = np.array(self.direction, dtype=float).reshape(3)
        m = np.array(self.moment, dtype=float).reshape(3)
        h = float(self.pitch)
        if math.isinf(h):
            h = INFINITE
            m = np.zeros(3)
        l.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "direction", l)
        object.__setattr__(self, "moment", m)
        object.__setattr__(self, "pitch", h)

    @classmethod
    def through_point(cls, direction, point, pitch=0.0):
        l = np.asarray(direction, dtype=float)
        l = l / np.linalg.norm(l)
        return cls(l, np.cross(point, l), pitch)

    @classmethod
    def translation(cls, direction):
        l = np.asarray(direction, dtype=float)
        return cls(l / np.linalg.norm(l), np.zeros(3), INFINITE)

    @property
    def is_translation(self):
        return math.isinf(self.pitch)

    @property
    def axis_point(self):
        """Point of the axis closest to the origin (the origin itself for translations)."""
        return np.cross(self.direction, self.moment)

    def is_valid(self, tol=1e-9):
        if abs(np.linalg.norm(self.direction) - 1.0) > tol:
            return False
        if self.is_translation:
            return not np.any(self.moment)
        return abs(float(self.direction @ self.moment)) <= tol

    def to_json(self):
        return {
            "l": [float(x) for x in self.direction],
            "m": [float(x) for x in self.moment],
            "h": "inf" if self.is_translation else float(self.pitch),
        }

    def __repr__(self):
        return (f"UnitScrew(l={self.direction.tolist()}, m={self.moment.tolist()}, "
                f"h={self.pitch})")


def _canonical_axis(axis):
    """Flip ``axis`` so its first non-negligible component is positive."""
    for c in axis:
        if abs(c) > 1e-12:
            return axis if c > 0 else -axis
    return axis


def _rotation_log(R):
    """Return ``(axis, angle)`` with ``angle`` in ``[0, pi]``."""
    s_vec = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(s_vec)
    c = 0.5 * (np.trace(R) - 1.0)
    angle = math.atan2(s, c)
    if angle < IDENTITY_TOL:
        return np.zeros(3), 0.0
    if c > -0.5:
        # sin(angle) is well conditioned here
        return s_vec / s, angle
    # near pi: recover the axis from the symmetric part, the sign from the skew part
    B = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / math.sqrt(max(B[k, k], 0.0))
    axis /= np.linalg.norm(axis)
    if axis @ s_vec < 0:
        axis = -axis
    if s < 1e-12:
        axis = _canonical_axis(axis)
    return axis, angle


def screw_from_poses(a: Pose, b: Pose):
    """Screw and magnitude of the displacement from ``a`` to ``b``.

    The screw is expressed in the body frame of ``a``, so that
    ``a @ screw_exp(screw, magnitude)`` reproduces ``b``.
    """
    D = pose_inverse(a) @ b
    axis, angle = _rotation_log(D.rotation)
    p = D.translation
    if angle == 0.0:
        dist = float(np.linalg.norm(p))
        if dist < IDENTITY_TOL:
            raise IdentityDisplacement("poses coincide; the screw is undefined")
        return UnitScrew(p / dist, np.zeros(3), INFINITE), dist
    d = float(axis @ p)
    p_perp = p - d * axis
    cot_half = math.cos(angle / 2.0) / math.sin(angle / 2.0)
    point = 0.5 * (p_perp + cot_half * np.cross(axis, p_perp))
    return UnitScrew(axis, np.cross(point, axis), d / angle), angle


def screw_exp(s: UnitScrew, magnitude: float) -> Pose:
    l = s.direction
    if s.is_translation:
        return Pose(np.eye(3), magnitude * l)
    R = rodrigues(l, magnitude)
    q = s.axis_point
    return Pose(R, (np.eye(3) - R) @ q + s.pitch * magnitude * l)


def screw_transform(s: UnitScrew, g: Pose) -> UnitScrew:
    """Express ``s`` in the reference frame of ``g`` (Plücker line transform)."""
    l = g.rotation @ s.direction
    if s.is_translation:
        return UnitScrew(l, np.zeros(3), INFINITE)
    m = g.rotation @ s.moment + np.cross(g.translation, l)
    return UnitScrew(l, m, s.pitch)


@dataclass(frozen=True, eq=False)
class ScrewSegment:
    start: Pose
    end: Pose
    screw: UnitScrew
    magnitude: float

    @classmethod
    def from_poses(cls, start: Pose, end: Pose) -> "ScrewSegment":
        screw, magnitude = screw_from_poses(start, end)
        return cls(start, end, screw, magnitude)

    @property
    def spatial_screw(self) -> UnitScrew:
        """The segment screw in the frame the poses are expressed in."""
        return screw_transform(self.screw, self.start)


def screw_interpolate(seg: ScrewSegment, t: float) -> Pose:
    if t == 0.0:
        return seg.start
    return seg.start @ screw_exp(seg.screw, t * seg.magnitude)


def same_axis_line(s1: UnitScrew, s2: UnitScrew, tol=1e-6):
    """True if the two screws share axis line (direction up to sign) and pitch."""
    l1, l2 = s1.direction, s2.direction
    if s1.is_translation != s2.is_translation:
        return False
    if not s1.is_translation and abs(s1.pitch - s2.pitch) > tol:
        return False
    sign = 1.0 if l1 @ l2 >= 0 else -1.0
    if np.linalg.norm(l1 - sign * l2) > tol:
        return False
    return bool(np.linalg.norm(s1.axis_point - s2.axis_point) <= tol)
