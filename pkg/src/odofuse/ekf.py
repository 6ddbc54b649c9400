"""15-state error-state Kalman filter with gated, closed-loop updates.

State vector (order fixed): position error [m, NED], velocity error [m/s],
attitude error psi [rad], gyro bias error [rad/s], accel bias error [m/s^2].

Measurements are processed one scalar component at a time so the innovation
gate can reject individual axes. Each component's normalized innovation
y = dz / sqrt(H P H^T + R) is tested against the gate (default: y^2 > 3.84,
the 95% chi-square point for one degree of freedom; a literal |y| mode is
selectable). Accepted components apply a Joseph-form covariance update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .mech import NavState
from .sim import MountingConfig
from .streams import GnssFix, ImuSample

POS = slice(0, 3)
VEL = slice(3, 6)
ATT = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
N_STATES = 15

GATE_THRESHOLD = 3.84


@dataclass
class ProcessNoise:
    """Continuous-time PSDs; biases are random walks."""

    gyro_psd: float = 4.0e-8        # rad^2/s
    accel_psd: float = 6.0e-6       # m^2/s^3
    gyro_bias_psd: float = 1.0e-10  # (rad/s)^2/s
    accel_bias_psd: float = 4.0e-8  # (m/s^2)^2/s

    def __post_init__(self):
        if min(self.gyro_psd, self.accel_psd, self.gyro_bias_psd, self.accel_bias_psd) < 0:
            raise ValueError("process noise PSDs must be >= 0")

    def discrete(self, dt: float) -> np.ndarray:
        q = np.zeros(N_STATES)
        q[VEL] = self.accel_psd
        q[ATT] = self.gyro_psd
        q[BG] = self.gyro_bias_psd
        q[BA] = self.accel_bias_psd
        return np.diag(q * dt)


@dataclass
class BiasEstimate:
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "BiasEstimate":
        return BiasEstimate(self.gyro.copy(), self.accel.copy())


@dataclass
class UpdateReport:
    """Outcome of one measurement update attempt."""

    kind: str
    applied: bool
    components: tuple = ()
    innovations: tuple = ()
    normalized: tuple = ()
    accepted: tuple = ()
    skipped_reason: str | None = None

    @property
    def rejected(self) -> tuple:
        return tuple(c for c, ok in zip(self.components, self.accepted) if not ok)


def default_initial_covariance(
    pos_std: float = 1.0,
    vel_std: float = 0.1,
    tilt_std: float = math.radians(0.5),
    heading_std: float = math.radians(2.0),
    gyro_bias_std: float = math.radians(2.0),
    accel_bias_std: float = 0.2,
) -> np.ndarray:
    d = np.zeros(N_STATES)
    d[POS] = pos_std**2
    d[VEL] = vel_std**2
    d[ATT] = [tilt_std**2, tilt_std**2, heading_std**2]
    d[BG] = gyro_bias_std**2
    d[BA] = accel_bias_std**2
    return np.diag(d)


class ErrorStateFilter:
    """Owns the error state, its covariance, and the accumulated bias estimate."""

    def __init__(
        self,
        cov: np.ndarray | None = None,
        noise: ProcessNoise | None = None,
        gate_threshold: float = GATE_THRESHOLD,
        gate_on_squared: bool = True,
    ):
        self.P = default_initial_covariance() if cov is None else np.array(cov, dtype=float)
        if self.P.shape != (N_STATES, N_STATES):
            raise ValueError("covariance must be 15x15")
        self.noise = noise if noise is not None else ProcessNoise()
        self.gate_threshold = gate_threshold
        self.gate_on_squared = gate_on_squared
        self.dx = np.zeros(N_STATES)
        self.biases = BiasEstimate()

    # -- prediction -------------------------------------------------------

    def predict(self, nav: NavState, imu: ImuSample, dt: float) -> None:
        """Propagate covariance with the psi-angle small-error dynamics.

        ``imu`` must be bias-compensated; its specific force drives the
        velocity/attitude coupling.
        """
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        cbn = nav.attitude
        f_n = cbn @ imu.accel

        phi = np.eye(N_STATES)
        phi[POS, VEL] = np.eye(3) * dt
        phi[VEL, ATT] = geo.skew(f_n) * dt
        phi[VEL, BA] = cbn * dt
        phi[ATT, BG] = -cbn * dt

        self.P = phi @ self.P @ phi.T + self.noise.discrete(dt)
        self.P = 0.5 * (self.P + self.P.T)
        self.dx = phi @ self.dx

    # -- generic gated update ---------------------------------------------

    def update(self, dz, h_matrix, r_diag, labels=None, kind: str = "meas") -> UpdateReport:
        """Scalar-sequential gated update; returns what happened per component."""
        dz = np.atleast_1d(np.asarray(dz, dtype=float))
        h_matrix = np.atleast_2d(np.asarray(h_matrix, dtype=float))
        r_diag = np.atleast_1d(np.asarray(r_diag, dtype=float))
        m = dz.shape[0]
        if h_matrix.shape != (m, N_STATES) or r_diag.shape != (m,):
            raise ValueError("inconsistent measurement dimensions")
        if np.any(r_diag <= 0.0):
            raise ValueError("measurement variances must be positive")
        if labels is None:
            labels = tuple(str(j) for j in range(m))

        identity = np.eye(N_STATES)
        normalized = []
        accepted = []
        for j in range(m):
            h = h_matrix[j]
            # Innovation w.r.t. the running error estimate so earlier
            # components inform later ones within the same update.
            z_eff = dz[j] - h @ self.dx
            s = h @ self.P @ h + r_diag[j]
            y = z_eff / math.sqrt(s)
            normalized.append(y)
            stat = y * y if self.gate_on_squared else abs(y)
            if stat > self.gate_threshold:
                accepted.append(False)
                continue
            accepted.append(True)
            gain = (self.P @ h) / s
            self.dx = self.dx + gain * z_eff
            ikh = identity - np.outer(gain, h)
            self.P = ikh @ self.P @ ikh.T + r_diag[j] * np.outer(gain, gain)
            self.P = 0.5 * (self.P + self.P.T)

        return UpdateReport(
            kind=kind,
            applied=any(accepted),
            components=tuple(labels),
            innovations=tuple(float(v) for v in dz),
            normalized=tuple(float(v) for v in normalized),
            accepted=tuple(accepted),
        )

    # -- concrete observations --------------------------------------------

    def update_gnss_position(
        self, nav: NavState, fix: GnssFix, std_max: float = 1.0
    ) -> UpdateReport:
        """Position update in the local frame; over-threshold fixes are skipped."""
        if not fix.valid:
            return UpdateReport(kind="gnss", applied=False, skipped_reason="invalid fix")
        if np.any(np.asarray(fix.std_ned) >= std_max):
            return UpdateReport(kind="gnss", applied=False, skipped_reason="std over limit")
        dz = geo.geodetic_to_local(nav.position, fix.position)
        h = np.zeros((3, N_STATES))
        h[:, POS] = np.eye(3)
        return self.update(dz, h, np.asarray(fix.std_ned) ** 2, ("north", "east", "down"), "gnss")

    def update_vframe_velocity(
        self,
        nav: NavState,
        imu: ImuSample,
        mount: MountingConfig,
        v_fwd: float | None,
        sigma_fwd: float,
        sigma_nhc: float = 0.1,
    ) -> UpdateReport:
        """Vehicle-frame velocity update: odometer forward row plus NHC rows.

        ``imu`` must be bias-compensated (its gyro feeds the lever-arm term).
        With ``v_fwd`` None only the lateral/vertical (NHC) rows are used.
        """
        cbn = nav.attitude
        cnb = cbn.T
        c_b_v = mount.c_b_v()
        lever = mount.lever_arm

        w_in_n = geo.earth_rate_ned(nav.position.lat) + geo.transport_rate_ned(
            nav.velocity, nav.position
        )
        w_nb_b = imu.gyro - cnb @ w_in_n
        predicted = c_b_v @ (cnb @ nav.velocity) + c_b_v @ np.cross(w_nb_b, lever)

        h = np.zeros((3, N_STATES))
        cv = c_b_v @ cnb
        h[:, VEL] = cv
        h[:, ATT] = -cv @ geo.skew(nav.velocity)
        h[:, BG] = -c_b_v @ geo.skew(lever)

        if v_fwd is None:
            dz = predicted[1:]
            return self.update(
                dz, h[1:], np.array([sigma_nhc**2, sigma_nhc**2]), ("lateral", "vertical"), "nhc"
            )
        dz = predicted - np.array([v_fwd, 0.0, 0.0])
        r = np.array([sigma_fwd**2, sigma_nhc**2, sigma_nhc**2])
        return self.update(dz, h, r, ("forward", "lateral", "vertical"), "odo")

    def update_zupt(self, nav: NavState, sigma: float = 0.1) -> UpdateReport:
        h = np.zeros((3, N_STATES))
        h[:, VEL] = np.eye(3)
        return self.update(
            nav.velocity.copy(), h, np.full(3, sigma**2), ("vn", "ve", "vd"), "zupt"
        )

    def update_zaru(self, imu: ImuSample, sigma: float = math.radians(0.1)) -> UpdateReport:
        """Zero angular rate: the compensated gyro observes the gyro bias error."""
        h = np.zeros((3, N_STATES))
        h[:, BG] = np.eye(3)
        return self.update(
            imu.gyro.copy(), h, np.full(3, sigma**2), ("wx", "wy", "wz"), "zaru"
        )

    # -- closed-loop feedback ----------------------------------------------

    def feedback(self, nav: NavState) -> NavState:
        """Apply the error estimate to the navigation state and zero it."""
        dx = self.dx
        pos = geo.local_to_geodetic(-dx[POS], nav.position)
        vel = nav.velocity - dx[VEL]
        att = geo.orthonormalize(geo.rotvec_to_rotation(dx[ATT]) @ nav.attitude)
        self.biases.gyro = self.biases.gyro + dx[BG]
        self.biases.accel = self.biases.accel + dx[BA]
        self.dx = np.zeros(N_STATES)
        return NavState(pos, vel, att)
