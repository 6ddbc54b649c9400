"""Data cleaning and dataset assembly for the speed regressor.

Cleaning order is normative: bias compensation happens in the b-frame first,
then the mounting rotation maps the stream into the v-frame. Reversing the
order rotates the biases and gives a different stream (covered by a test).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ekf import BiasEstimate
from .geo import EulerAngles
from .sim import MountingConfig
from .streams import ImuSeries

WINDOW_LEN = 50
STATIONARY_LABEL_THRESHOLD = 0.1  # m/s, the zero-velocity detector threshold


@dataclass(frozen=True)
class MountingEstimate:
    """Estimated pitch/heading mounting angles [rad]; roll is unobservable."""

    pitch: float
    heading: float

    def __post_init__(self):
        limit = math.radians(30.0)
        if abs(self.pitch) >= limit or abs(self.heading) >= limit:
            raise ValueError("mounting estimates must stay below 30 deg")

    def to_mounting(self, lever_arm=(0.0, 0.0, 0.0)) -> MountingConfig:
        return MountingConfig(
            EulerAngles(0.0, self.pitch, self.heading), np.asarray(lever_arm, dtype=float)
        )


@dataclass
class LabeledWindow:
    """One training sample: (50, 6) v-frame window, wheel-speed label, truth flag."""

    window: np.ndarray
    label: float
    stationary: bool


def compensate_biases(imu: ImuSeries, biases: BiasEstimate) -> ImuSeries:
    """Subtract the estimated gyro/accel biases from every sample."""
    return ImuSeries(imu.time.copy(), imu.gyro - biases.gyro, imu.accel - biases.accel)


def apply_mounting(imu: ImuSeries, estimate: MountingEstimate) -> ImuSeries:
    """Rotate angular rate and specific force from b-frame into v-frame."""
    c_b_v = estimate.to_mounting().c_b_v()
    return ImuSeries(imu.time.copy(), imu.gyro @ c_b_v.T, imu.accel @ c_b_v.T)


def clean_imu(imu: ImuSeries, biases: BiasEstimate, estimate: MountingEstimate) -> ImuSeries:
    """Normative cleaning order: biases in b-frame first, then the rotation."""
    return apply_mounting(compensate_biases(imu, biases), estimate)


def estimate_mounting_angles(
    vel_b: np.ndarray,
    heading_rate: np.ndarray,
    sample_rate: float,
    min_speed: float = 2.0,
    max_heading_rate: float = math.radians(0.5),
    min_duration: float = 30.0,
) -> MountingEstimate:
    """Mounting angles from the mean b-frame velocity during straight driving.

    Qualifying samples move faster than ``min_speed`` with near-zero heading
    rate; averaging their b-frame velocity direction gives the heading and
    pitch misalignments (roll stays unobservable). Signs are chosen so that
    applying the estimate zeroes the mean lateral and vertical v-frame
    velocity.
    """
    vel_b = np.asarray(vel_b, dtype=float)
    heading_rate = np.asarray(heading_rate, dtype=float)
    speed = np.linalg.norm(vel_b, axis=1)
    mask = (speed > min_speed) & (np.abs(heading_rate) < max_heading_rate)
    if mask.sum() < min_duration * sample_rate:
        raise ValueError(
            f"need {min_duration:.0f}s of straight driving above {min_speed} m/s"
        )
    mean = vel_b[mask].mean(axis=0)
    heading = math.atan2(mean[1], mean[0])
    pitch = -math.atan2(mean[2], math.hypot(mean[0], mean[1]))
    return MountingEstimate(pitch, heading)


def build_windows(
    imu_v: ImuSeries,
    wheel_speed: np.ndarray,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sliding 50-sample windows with wheel-speed labels at window end.

    Returns (windows (M, 50, 6), labels (M,), stationary flags (M,)). Stride 1
    matches inference; larger strides thin training sets. The stationary flag
    applies the detector threshold to the label.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    wheel_speed = np.asarray(wheel_speed, dtype=float)
    n = len(imu_v)
    if wheel_speed.shape[0] != n:
        raise ValueError("IMU and wheel streams must be aligned sample-for-sample")
    if n < WINDOW_LEN:
        raise ValueError(f"need at least {WINDOW_LEN} samples")

    data = np.concatenate([imu_v.gyro, imu_v.accel], axis=1)
    ends = np.arange(WINDOW_LEN - 1, n, stride)
    idx = ends[:, None] - (WINDOW_LEN - 1) + np.arange(WINDOW_LEN)[None, :]
    windows = data[idx]
    labels = np.maximum(wheel_speed[ends], 0.0)
    return windows, labels, labels < STATIONARY_LABEL_THRESHOLD


def labeled_windows(imu_v: ImuSeries, wheel_speed, stride: int = 1) -> list[LabeledWindow]:
    windows, labels, flags = build_windows(imu_v, wheel_speed, stride)
    return [
        LabeledWindow(w, float(v), bool(s)) for w, v, s in zip(windows, labels, flags)
    ]
