"""Integrated navigation: mechanization, EKF, GNSS, and velocity aiding.

One :func:`run` replays a recorded scenario offline. Every IMU epoch
compensates biases with the current filter estimate, mechanizes, and
propagates the covariance. Valid GNSS fixes update position at their own
epochs. At the velocity-update rate the selected aiding mode applies either
the NHC rows alone, or the pseudo-odometer / wheel-odometer forward speed
with NHC; zero-velocity epochs in the odometer modes get ZUPT + ZARU instead.
All measurements pass the innovation gate, and the error state feeds back
after every applied update.

Pseudo-odometer speeds need bias-compensated v-frame windows, but the FIR
stage is whole-stream: a preliminary GNSS+NHC pass harvests the causal bias
trajectory, then speeds are inferred and filtered offline before the final
fusion pass consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import geo
from .ekf import ErrorStateFilter, ProcessNoise, default_initial_covariance
from .fir import ZERO_SPEED_THRESHOLD, design_lowpass, fir_apply
from .geo import EulerAngles
from .mech import NavState, mechanize_step
from .net import SpeedNet
from .sim import MountingConfig
from .streams import GnssSeries, ImuSeries, NavSeries, WheelSeries
from .training import WINDOW_LEN


class AidingMode(Enum):
    NHC_ONLY = "nhc"
    PSEUDO_ODO = "pseudo"
    WHEEL_ODO = "wheel"


@dataclass(frozen=True)
class FusionConfig:
    mode: AidingMode = AidingMode.NHC_ONLY
    sigma_nhc: float = 0.1                      # m/s
    sigma_zupt: float = 0.1                     # m/s
    sigma_zaru: float = math.radians(0.1)       # rad/s
    sigma_pseudo: float = 0.3                   # m/s
    sigma_wheel: float = 0.1                    # m/s
    velocity_update_hz: float = 1.0
    gate_threshold: float = 3.84
    gate_on_squared: bool = True
    gnss_std_max: float = 1.0                   # m
    zero_speed_threshold: float = ZERO_SPEED_THRESHOLD
    mount: MountingConfig = field(default_factory=MountingConfig)
    noise: ProcessNoise = field(default_factory=ProcessNoise)
    init_pos_std: float = 1.0
    init_vel_std: float = 0.1
    init_tilt_std: float = math.radians(0.5)
    init_heading_std: float = math.radians(2.0)
    init_gyro_bias_std: float = math.radians(2.0)
    init_accel_bias_std: float = 0.2
    initial_attitude: EulerAngles = EulerAngles(0.0, 0.0, 0.0)

    def initial_covariance(self, pos_std: float | None = None) -> np.ndarray:
        return default_initial_covariance(
            pos_std if pos_std is not None else self.init_pos_std,
            self.init_vel_std,
            self.init_tilt_std,
            self.init_heading_std,
            self.init_gyro_bias_std,
            self.init_accel_bias_std,
        )


@dataclass
class UpdateLogEntry:
    time: float
    kind: str
    component: str
    innovation: float
    normalized: float
    applied: bool


@dataclass
class FusionOutput:
    nav: NavSeries
    bias_gyro: np.ndarray
    bias_accel: np.ndarray
    log: list
    speed_raw: np.ndarray | None = None       # aligned with nav.time[49:]
    speed_filtered: np.ndarray | None = None
    zero_flags: np.ndarray | None = None
    skipped_gnss: int = 0

    def log_rows(self) -> list:
        return [
            (e.time, e.kind, e.component, e.innovation, e.normalized, int(e.applied))
            for e in self.log
        ]


def initialize(
    cfg: FusionConfig,
    gnss: GnssSeries | None = None,
    truth_state: NavState | None = None,
) -> tuple[NavState, np.ndarray]:
    """Coarse initial state: truth snapshot, or first valid fix + config attitude."""
    if truth_state is not None:
        return truth_state.copy(), cfg.initial_covariance()
    if gnss is not None:
        for i in range(len(gnss)):
            fix = gnss.fix(i)
            if fix.valid:
                state = NavState(
                    fix.position,
                    np.zeros(3),
                    geo.euler_to_rotation(cfg.initial_attitude),
                )
                pos_std = float(np.max(fix.std_ned))
                return state, cfg.initial_covariance(pos_std)
    raise ValueError("no valid initial fix or truth state")


def _log_report(log: list, time: float, report) -> None:
    for comp, dz, y, ok in zip(
        report.components, report.innovations, report.normalized, report.accepted
    ):
        log.append(UpdateLogEntry(time, report.kind, comp, dz, y, ok))


def pseudo_odometer_bias_pass(
    imu: ImuSeries, gnss: GnssSeries, cfg: FusionConfig, initial: NavState | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Preliminary GNSS+NHC run returning the causal bias trajectory (N, 3) x2."""
    prelim_cfg = FusionConfig(
        mode=AidingMode.NHC_ONLY,
        sigma_nhc=cfg.sigma_nhc,
        velocity_update_hz=cfg.velocity_update_hz,
        gate_threshold=cfg.gate_threshold,
        gate_on_squared=cfg.gate_on_squared,
        gnss_std_max=cfg.gnss_std_max,
        mount=cfg.mount,
        noise=cfg.noise,
        initial_attitude=cfg.initial_attitude,
    )
    out = run(imu, gnss, prelim_cfg, initial=initial)
    return out.bias_gyro, out.bias_accel


def compute_pseudo_speeds(
    imu: ImuSeries,
    model: SpeedNet,
    mount: MountingConfig,
    bias_gyro: np.ndarray,
    bias_accel: np.ndarray,
    batch_size: int = 2048,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw and FIR-filtered pseudo-odometer speed, aligned with imu.time[49:].

    Every sample of a window is compensated with the bias estimate as of the
    window's end epoch (causal within the offline replay), then rotated into
    the v-frame with the configured mounting.
    """
    c_b_v = mount.c_b_v()
    stream = np.concatenate([imu.gyro, imu.accel], axis=1)
    n = stream.shape[0]
    if n < WINDOW_LEN:
        raise ValueError(f"need at least {WINDOW_LEN} samples")
    ends = np.arange(WINDOW_LEN - 1, n)
    offsets = np.arange(WINDOW_LEN) - (WINDOW_LEN - 1)
    scale = model.architecture.scale
    raw = np.empty(ends.shape[0])
    for start in range(0, ends.shape[0], batch_size):
        e = ends[start : start + batch_size]
        win = stream[e[:, None] + offsets[None, :]].copy()
        win[:, :, :3] -= bias_gyro[e][:, None, :]
        win[:, :, 3:] -= bias_accel[e][:, None, :]
        win[:, :, :3] = win[:, :, :3] @ c_b_v.T
        win[:, :, 3:] = win[:, :, 3:] @ c_b_v.T
        raw[start : start + e.shape[0]] = model.forward(win, train=False) / scale
    lowpass = design_lowpass(sample_rate_hz=1.0 / float(np.mean(np.diff(imu.time))))
    return raw, fir_apply(lowpass, raw)


def run(
    imu: ImuSeries,
    gnss: GnssSeries,
    cfg: FusionConfig,
    wheel: WheelSeries | None = None,
    model: SpeedNet | None = None,
    initial: NavState | None = None,
) -> FusionOutput:
    """Fuse one recorded scenario; deterministic for identical inputs."""
    n = len(imu)
    dt_nominal = float(np.mean(np.diff(imu.time)))
    rate = 1.0 / dt_nominal

    if cfg.mode is AidingMode.WHEEL_ODO:
        if wheel is None:
            raise ValueError("wheel-odometer mode needs a wheel-speed stream")
        if len(wheel.time) != n or abs(wheel.time[0] - imu.time[0]) > 1e-9:
            raise ValueError("wheel stream must be aligned with the IMU stream")
    speed_raw = speed_filtered = zero_flags = None
    if cfg.mode is AidingMode.PSEUDO_ODO:
        if model is None:
            raise ValueError("pseudo-odometer mode needs a trained model")
        bias_g, bias_a = pseudo_odometer_bias_pass(imu, gnss, cfg, initial)
        speed_raw, speed_filtered = compute_pseudo_speeds(
            imu, model, cfg.mount, bias_g, bias_a
        )
        zero_flags = speed_filtered < cfg.zero_speed_threshold

    state, cov = (
        (initial.copy(), cfg.initial_covariance())
        if initial is not None
        else initialize(cfg, gnss)
    )
    filt = ErrorStateFilter(cov, cfg.noise, cfg.gate_threshold, cfg.gate_on_squared)

    vel_step = rate / cfg.velocity_update_hz
    if abs(vel_step - round(vel_step)) > 1e-9:
        raise ValueError("velocity update rate must divide the IMU rate")
    vel_step = int(round(vel_step))

    # Map each GNSS fix onto its nearest IMU epoch.
    gnss_at = {}
    for i in range(len(gnss)):
        k = int(round((gnss.time[i] - imu.time[0]) * rate))
        if 0 <= k < n:
            gnss_at[k] = i

    lat = np.empty(n)
    lon = np.empty(n)
    height = np.empty(n)
    vel = np.empty((n, 3))
    roll = np.empty(n)
    pitch = np.empty(n)
    yaw = np.empty(n)
    bias_gyro_out = np.empty((n, 3))
    bias_accel_out = np.empty((n, 3))
    log: list = []
    skipped = 0

    prev = None
    for k in range(n):
        t = float(imu.time[k])
        sample = imu.sample(k)
        comp = sample._replace(
            gyro=sample.gyro - filt.biases.gyro, accel=sample.accel - filt.biases.accel
        )
        if prev is not None:
            state = mechanize_step(state, prev, comp)
            filt.predict(state, comp, comp.time - prev.time)

        if k in gnss_at:
            report = filt.update_gnss_position(state, gnss.fix(gnss_at[k]), cfg.gnss_std_max)
            if report.skipped_reason is not None:
                skipped += 1
            else:
                _log_report(log, t, report)
            if report.applied:
                state = filt.feedback(state)

        if k % vel_step == 0 and k >= WINDOW_LEN - 1:
            reports = []
            if cfg.mode is AidingMode.NHC_ONLY:
                reports.append(
                    filt.update_vframe_velocity(
                        state, comp, cfg.mount, None, 0.0, cfg.sigma_nhc
                    )
                )
            else:
                if cfg.mode is AidingMode.PSEUDO_ODO:
                    stationary = bool(zero_flags[k - (WINDOW_LEN - 1)])
                    v_fwd = float(speed_filtered[k - (WINDOW_LEN - 1)])
                    sigma_fwd = cfg.sigma_pseudo
                else:
                    v_fwd = float(wheel.speed[k])
                    stationary = v_fwd < cfg.zero_speed_threshold
                    sigma_fwd = cfg.sigma_wheel
                if stationary:
                    reports.append(filt.update_zupt(state, cfg.sigma_zupt))
                    reports.append(filt.update_zaru(comp, cfg.sigma_zaru))
                else:
                    reports.append(
                        filt.update_vframe_velocity(
                            state, comp, cfg.mount, v_fwd, sigma_fwd, cfg.sigma_nhc
                        )
                    )
            for report in reports:
                _log_report(log, t, report)
            if any(r.applied for r in reports):
                state = filt.feedback(state)

        lat[k] = state.position.lat
        lon[k] = state.position.lon
        height[k] = state.position.height
        vel[k] = state.velocity
        e = geo.rotation_to_euler(state.attitude)
        roll[k], pitch[k], yaw[k] = e.roll, e.pitch, e.yaw
        bias_gyro_out[k] = filt.biases.gyro
        bias_accel_out[k] = filt.biases.accel
        prev = comp

    nav = NavSeries(imu.time.copy(), lat, lon, height, vel, roll, pitch, yaw)
    return FusionOutput(
        nav,
        bias_gyro_out,
        bias_accel_out,
        log,
        speed_raw,
        speed_filtered,
        zero_flags,
        skipped,
    )
