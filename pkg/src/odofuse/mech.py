"""Strapdown inertial mechanization in the local NED frame.

Single-sample integration with trapezoidal increments of the instantaneous
rate samples; the attitude step uses the rotation-vector exponential map and
is renormalized every step. Earth rotation and transport rate are modeled so
that noise-free simulator output round-trips exactly up to discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geo
from .geo import GeodeticPosition
from .streams import ImuSample, ImuSeries, NavSeries


@dataclass
class NavState:
    """Position, NED velocity [m/s] and attitude C_b^n of the IMU."""

    position: GeodeticPosition
    velocity: np.ndarray
    attitude: np.ndarray  # C_b^n, b-frame -> n-frame

    def copy(self) -> "NavState":
        return NavState(self.position, self.velocity.copy(), self.attitude.copy())


def _cross(a, b) -> np.ndarray:
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def mechanize_step(state: NavState, prev: ImuSample, curr: ImuSample) -> NavState:
    """Advance one IMU interval: attitude, then velocity, then position."""
    dt = curr.time - prev.time
    if dt <= 0.0:
        raise ValueError("non-monotonic IMU timestamps")

    pos = state.position
    vel = state.velocity
    cbn = state.attitude

    w_ie = geo.earth_rate_ned(pos.lat)
    w_en = geo.transport_rate_ned(vel, pos)
    w_in = w_ie + w_en
    gravity = np.array([0.0, 0.0, geo.normal_gravity(pos)])

    # Attitude: body increment on the right, n-frame rotation on the left.
    alpha = 0.5 * (prev.gyro + curr.gyro) * dt
    zeta = w_in * dt
    cbn_new = geo.rotvec_to_rotation(-zeta) @ cbn @ geo.rotvec_to_rotation(alpha)
    cbn_new = geo.orthonormalize(cbn_new)

    # Velocity: trapezoid of the rotated specific force plus gravity and a
    # Heun pass on the Coriolis/transport term.
    f_n = 0.5 * (cbn @ prev.accel + cbn_new @ curr.accel)
    w_cor = 2.0 * w_ie + w_en
    vel_pred = vel + dt * (f_n + gravity - _cross(w_cor, vel))
    cor = _cross(w_cor, 0.5 * (vel + vel_pred))
    vel_new = vel + dt * (f_n + gravity - cor)

    # Position: trapezoidal velocity integration with radii at current position.
    d_ned = 0.5 * dt * (vel + vel_new)
    pos_new = geo.local_to_geodetic(d_ned, pos)

    return NavState(pos_new, vel_new, cbn_new)


def mechanize(initial: NavState, imu: ImuSeries) -> NavSeries:
    """Dead-reckon a whole IMU stream from an initial state."""
    n = len(imu)
    lat = np.empty(n)
    lon = np.empty(n)
    height = np.empty(n)
    vel = np.empty((n, 3))
    roll = np.empty(n)
    pitch = np.empty(n)
    yaw = np.empty(n)

    state = initial.copy()
    for k in range(n):
        if k > 0:
            state = mechanize_step(state, imu.sample(k - 1), imu.sample(k))
        lat[k] = state.position.lat
        lon[k] = state.position.lon
        height[k] = state.position.height
        vel[k] = state.velocity
        e = geo.rotation_to_euler(state.attitude)
        roll[k], pitch[k], yaw[k] = e.roll, e.pitch, e.yaw

    return NavSeries(imu.time.copy(), lat, lon, height, vel, roll, pitch, yaw)
