"""Sensor stream records and their on-disk CSV formats.

All file formats live here:

- IMU stream:    header + ``t,gx,gy,gz,ax,ay,az`` (s, rad/s x3, m/s^2 x3)
- wheel speed:   header + ``t,v`` (s, m/s)
- GNSS fixes:    header + ``t,lat,lon,h,std_n,std_e,std_d,valid``
                 (s, rad, rad, m, m, m, m, 0/1)
- truth/fused:   header + ``t,lat,lon,h,vn,ve,vd,roll,pitch,yaw`` (SI, rad)

Values are written with ``repr`` so 64-bit floats round-trip exactly and
reruns are byte-identical. Timestamps must increase monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geo import GeodeticPosition


class ImuSample(NamedTuple):
    """One IMU record: time [s], angular rate [rad/s], specific force [m/s^2]."""

    time: float
    gyro: np.ndarray
    accel: np.ndarray


class GnssFix(NamedTuple):
    """One GNSS fix: time [s], position, per-axis NED std [m], validity."""

    time: float
    position: GeodeticPosition
    std_ned: np.ndarray
    valid: bool


@dataclass
class ImuSeries:
    """IMU stream as a struct of arrays: time (N,), gyro (N,3), accel (N,3)."""

    time: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float)
        self.accel = np.asarray(self.accel, dtype=float)
        n = self.time.shape[0]
        if self.gyro.shape != (n, 3) or self.accel.shape != (n, 3):
            raise ValueError("gyro/accel must be (N, 3) matching time")
        if n > 1 and np.any(np.diff(self.time) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return self.time.shape[0]

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.time[i]), self.gyro[i], self.accel[i])


@dataclass
class WheelSeries:
    """Wheel (or pseudo) speed stream: time (N,), speed (N,) [m/s]."""

    time: np.ndarray
    speed: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.speed = np.asarray(self.speed, dtype=float)
        if self.speed.shape != self.time.shape:
            raise ValueError("speed must match time shape")


@dataclass
class GnssSeries:
    """GNSS fixes as arrays; ``lat``/``lon`` rad, ``height`` m, ``std_ned`` (N,3)."""

    time: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    height: np.ndarray
    std_ned: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.std_ned = np.asarray(self.std_ned, dtype=float)

    def __len__(self) -> int:
        return self.time.shape[0]

    def fix(self, i: int) -> GnssFix:
        return GnssFix(
            float(self.time[i]),
            GeodeticPosition(float(self.lat[i]), float(self.lon[i]), float(self.height[i])),
            self.std_ned[i],
            bool(self.valid[i]),
        )


@dataclass
class NavSeries:
    """Navigation solution stream (truth or fused): arrays, angles in rad."""

    time: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    height: np.ndarray
    vel_ned: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return self.time.shape[0]


def _write_csv(path, header: str, columns) -> None:
    rows = np.column_stack(columns)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(repr(float(x)) for x in row) + "\n")


def _read_csv(path, expected_header: str) -> np.ndarray:
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        if header != expected_header:
            raise ValueError(f"{path}: expected header {expected_header!r}, got {header!r}")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    return data


IMU_HEADER = "t,gx,gy,gz,ax,ay,az"
WHEEL_HEADER = "t,v"
GNSS_HEADER = "t,lat,lon,h,std_n,std_e,std_d,valid"
NAV_HEADER = "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw"


def write_imu_csv(path, imu: ImuSeries) -> None:
    _write_csv(path, IMU_HEADER, [imu.time, imu.gyro, imu.accel])


def read_imu_csv(path) -> ImuSeries:
    data = _read_csv(path, IMU_HEADER)
    return ImuSeries(data[:, 0], data[:, 1:4], data[:, 4:7])


def write_wheel_csv(path, wheel: WheelSeries) -> None:
    _write_csv(path, WHEEL_HEADER, [wheel.time, wheel.speed])


def read_wheel_csv(path) -> WheelSeries:
    data = _read_csv(path, WHEEL_HEADER)
    return WheelSeries(data[:, 0], data[:, 1])


def write_gnss_csv(path, gnss: GnssSeries) -> None:
    _write_csv(
        path,
        GNSS_HEADER,
        [gnss.time, gnss.lat, gnss.lon, gnss.height, gnss.std_ned, gnss.valid.astype(float)],
    )


def read_gnss_csv(path) -> GnssSeries:
    data = _read_csv(path, GNSS_HEADER)
    return GnssSeries(
        data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4:7], data[:, 7] != 0.0
    )


def write_nav_csv(path, nav: NavSeries) -> None:
    _write_csv(
        path,
        NAV_HEADER,
        [nav.time, nav.lat, nav.lon, nav.height, nav.vel_ned, nav.roll, nav.pitch, nav.yaw],
    )


def read_nav_csv(path) -> NavSeries:
    data = _read_csv(path, NAV_HEADER)
    return NavSeries(
        data[:, 0],
        data[:, 1],
        data[:, 2],
        data[:, 3],
        data[:, 4:7],
        data[:, 7],
        data[:, 8],
        data[:, 9],
    )
