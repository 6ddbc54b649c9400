"""Frames, rotations, gravity, and geodetic/local conversions.

Conventions shared by the whole package:

- n-frame: local navigation frame, North-East-Down at the current position.
- b-frame: IMU body frame, forward-right-down.
- v-frame: vehicle frame, x forward, y right, z down, origin at the
  rear-wheel speed-measurement point.
- Euler angles are ZYX (yaw about down, then pitch, then roll).
  ``euler_to_rotation(e)`` returns the matrix that maps vectors expressed in
  the rotated (body) frame into the reference frame, i.e. C_b^n when ``e`` is
  the attitude of b relative to n.
- Geodetic positions are latitude/longitude in radians on the WGS-84
  ellipsoid and ellipsoidal height in metres.

All functions are pure and operate on plain numpy arrays; 3-vectors are
``(3,)`` float arrays and rotations are ``(3, 3)`` direction cosine matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# WGS-84 defining / derived constants.
WGS84_A = 6378137.0                    # semi-major axis [m]
WGS84_F = 1.0 / 298.257223563          # flattening
WGS84_B = WGS84_A * (1.0 - WGS84_F)    # semi-minor axis [m]
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)   # first eccentricity squared
WGS84_GM = 3.986004418e14              # gravitational constant [m^3/s^2]
EARTH_RATE = 7.292115e-5               # earth rotation rate [rad/s]

# Normal gravity at the equator/pole and the Somigliana constant
# k = (b*gamma_p - a*gamma_e) / (a*gamma_e).
GRAVITY_EQUATOR = 9.7803253359
GRAVITY_POLE = 9.8321849379
SOMIGLIANA_K = (WGS84_B * GRAVITY_POLE - WGS84_A * GRAVITY_EQUATOR) / (
    WGS84_A * GRAVITY_EQUATOR
)
# m = omega^2 a^2 b / GM, used by the free-air height correction.
GRAVITY_M = EARTH_RATE**2 * WGS84_A**2 * WGS84_B / WGS84_GM


class GimbalLockError(ValueError):
    """Raised when Euler angles are not recoverable from a rotation."""


@dataclass(frozen=True)
class GeodeticPosition:
    """Latitude [rad], longitude [rad], ellipsoidal height [m]."""

    lat: float
    lon: float
    height: float

    def __post_init__(self):
        if not (abs(self.lat) <= math.pi / 2 + 1e-12):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (abs(self.lon) <= math.pi + 1e-12):
            raise ValueError(f"longitude out of range: {self.lon}")
        if not math.isfinite(self.height):
            raise ValueError("height must be finite")


@dataclass(frozen=True)
class EulerAngles:
    """ZYX Euler angles [rad]: yaw about down, then pitch, then roll."""

    roll: float
    pitch: float
    yaw: float

    def __post_init__(self):
        if not (abs(self.pitch) <= math.pi / 2 + 1e-12):
            raise ValueError(f"pitch out of range: {self.pitch}")


def skew(v) -> np.ndarray:
    """Cross-product operator matrix: skew(v) @ u == cross(v, u)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def euler_to_rotation(e: EulerAngles) -> np.ndarray:
    """ZYX Euler angles to direction cosine matrix (rotated frame -> reference)."""
    cr, sr = math.cos(e.roll), math.sin(e.roll)
    cp, sp = math.cos(e.pitch), math.sin(e.pitch)
    cy, sy = math.cos(e.yaw), math.sin(e.yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def rotation_to_euler(rot: np.ndarray) -> EulerAngles:
    """Inverse of :func:`euler_to_rotation`.

    Raises :class:`GimbalLockError` when pitch is within 1e-6 rad of +/- pi/2,
    where roll and yaw are no longer separable.
    """
    rot = np.asarray(rot, dtype=float)
    sp = -rot[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(pitch) >= math.pi / 2 - 1e-6:
        raise GimbalLockError("pitch within 1e-6 of +/- pi/2")
    roll = math.atan2(rot[2, 1], rot[2, 2])
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    return EulerAngles(roll, pitch, yaw)


def rotvec_to_rotation(phi) -> np.ndarray:
    """Exponential map: rotation vector [rad] to rotation matrix (Rodrigues)."""
    x, y, z = phi
    angle = math.sqrt(x * x + y * y + z * z)
    if angle < 1e-12:
        # Second-order series keeps orthonormality to machine precision here.
        a, b = 1.0, 0.5
    else:
        a = math.sin(angle) / angle
        b = (1.0 - math.cos(angle)) / angle**2
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - b * (yy + zz), b * xy - a * z, b * xz + a * y],
            [b * xy + a * z, 1.0 - b * (xx + zz), b * yz - a * x],
            [b * xz - a * y, b * yz + a * x, 1.0 - b * (xx + yy)],
        ]
    )


def orthonormalize(rot: np.ndarray) -> np.ndarray:
    """One symmetric Newton step toward the nearest orthonormal matrix.

    Sufficient to hold R^T R = I at machine precision when applied every
    integration step.
    """
    return rot @ (1.5 * np.eye(3) - 0.5 * (rot.T @ rot))


def is_rotation(rot: np.ndarray, tol: float = 1e-9) -> bool:
    rot = np.asarray(rot, dtype=float)
    return (
        rot.shape == (3, 3)
        and np.abs(rot.T @ rot - np.eye(3)).max() <= tol
        and abs(np.linalg.det(rot) - 1.0) <= tol
    )


def normal_gravity(pos: GeodeticPosition) -> float:
    """Somigliana normal gravity with free-air height correction [m/s^2, +down]."""
    sin2 = math.sin(pos.lat) ** 2
    g0 = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * sin2) / math.sqrt(1.0 - WGS84_E2 * sin2)
    h = pos.height
    correction = (
        1.0
        - 2.0 / WGS84_A * (1.0 + WGS84_F + GRAVITY_M - 2.0 * WGS84_F * sin2) * h
        + 3.0 * h**2 / WGS84_A**2
    )
    return g0 * correction


def curvature_radii(lat: float) -> tuple[float, float]:
    """Meridian (R_M) and prime-vertical (R_N) curvature radii at latitude."""
    s2 = math.sin(lat) ** 2
    w = math.sqrt(1.0 - WGS84_E2 * s2)
    r_m = WGS84_A * (1.0 - WGS84_E2) / w**3
    r_n = WGS84_A / w
    return r_m, r_n


def geodetic_to_local(pos: GeodeticPosition, origin: GeodeticPosition) -> np.ndarray:
    """NED offset [m] of ``pos`` relative to ``origin``.

    Linearized with the curvature radii at the origin; intended for
    displacements below ~50 km.
    """
    r_m, r_n = curvature_radii(origin.lat)
    north = (pos.lat - origin.lat) * (r_m + origin.height)
    east = (pos.lon - origin.lon) * (r_n + origin.height) * math.cos(origin.lat)
    down = origin.height - pos.height
    return np.array([north, east, down])


def local_to_geodetic(ned, origin: GeodeticPosition) -> GeodeticPosition:
    """Inverse of :func:`geodetic_to_local` (same origin linearization)."""
    north, east, down = np.asarray(ned, dtype=float)
    r_m, r_n = curvature_radii(origin.lat)
    return GeodeticPosition(
        origin.lat + north / (r_m + origin.height),
        origin.lon + east / ((r_n + origin.height) * math.cos(origin.lat)),
        origin.height - down,
    )


def earth_rate_ned(lat: float) -> np.ndarray:
    """Earth rotation rate expressed in the n-frame [rad/s]."""
    return np.array([EARTH_RATE * math.cos(lat), 0.0, -EARTH_RATE * math.sin(lat)])


def transport_rate_ned(vel_ned, pos: GeodeticPosition) -> np.ndarray:
    """Rotation rate of the n-frame w.r.t. the earth frame [rad/s]."""
    vn, ve, _ = np.asarray(vel_ned, dtype=float)
    r_m, r_n = curvature_radii(pos.lat)
    return np.array(
        [
            ve / (r_n + pos.height),
            -vn / (r_m + pos.height),
            -ve * math.tan(pos.lat) / (r_n + pos.height),
        ]
    )
