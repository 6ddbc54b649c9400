"""Ground-truth vehicle trajectories and corrupted sensor synthesis.

A scenario is an ordered list of segments (Stop / Straight / Turn) driven on
a flat road: the vehicle's velocity always points along its body x axis
(roll = pitch = 0), so the non-holonomic constraint holds exactly in truth.

The continuous-time truth is *defined* as piecewise-linear forward
acceleration and heading rate between sample nodes. Segment-boundary steps in
those profiles are rounded with a short area-preserving blend aligned to the
sample grid, which keeps speed and heading exactly recoverable by trapezoidal
integration, so a noise-free synthesized IMU stream mechanizes back onto the
truth to well below the acceptance tolerance. Positions are integrated with
per-interval Gauss-Legendre quadrature of the closed-form interval
polynomials.

Optional speed-scaled road excitation (wheel-rotation harmonic in forward
acceleration plus a heading-rate micro-oscillation) makes vehicle speed
observable inside a one-second IMU window; it vanishes at standstill and is
genuine motion, so all consistency invariants are preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .geo import EulerAngles, GeodeticPosition
from .mech import NavState
from .streams import GnssSeries, ImuSeries, WheelSeries

DEFAULT_SAMPLE_RATE = 50.0


@dataclass(frozen=True)
class Stop:
    duration: float


@dataclass(frozen=True)
class Straight:
    duration: float
    start_speed: float
    end_speed: float


@dataclass(frozen=True)
class Turn:
    duration: float
    speed: float
    heading_rate: float


Segment = Stop | Straight | Turn


@dataclass(frozen=True)
class RoadExcitation:
    """Speed-scaled micro-motion of the truth trajectory and sensor mount.

    ``level`` scales everything; 0 disables. The forward-acceleration
    component oscillates at the wheel-rotation frequency with amplitude
    ``level * accel_per_speed_sq * v**2`` (road input power grows with
    speed), the heading-rate component at half that frequency with amplitude
    ``level * yaw_rate_per_speed * v``. ``vertical_per_speed_sq`` adds the
    road buzz felt by the IMU bracket along body z; it is a local
    specific-force disturbance at the sensor, not motion of the wheel point,
    so the non-holonomic constraint stays exact. Phases are drawn once per
    scenario from ``seed``. Everything vanishes at standstill.
    """

    level: float = 0.0
    wheel_radius: float = 0.45
    accel_per_speed_sq: float = 2.0e-3
    second_harmonic: float = 0.5
    vertical_per_speed_sq: float = 8.0e-4
    yaw_rate_per_speed: float = 6.0e-4
    low_speed_knee: float = 2.5
    speed_regulator: float = 0.5  # 1/s; pulls the jittered speed back to profile
    seed: int = 0


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple
    origin: GeodeticPosition = GeodeticPosition(math.radians(30.0), math.radians(114.0), 20.0)
    initial_heading: float = 0.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    excitation: RoadExcitation = field(default_factory=RoadExcitation)


@dataclass(frozen=True)
class SensorErrorModel:
    """Constant biases plus white noise; per-sample noise stds at the IMU rate."""

    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_noise_std: float = 0.0
    accel_noise_std: float = 0.0
    gnss_noise_std: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 1.0]))
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gyro_bias", np.asarray(self.gyro_bias, dtype=float))
        object.__setattr__(self, "accel_bias", np.asarray(self.accel_bias, dtype=float))
        object.__setattr__(self, "gnss_noise_std", np.asarray(self.gnss_noise_std, dtype=float))
        if self.gyro_noise_std < 0 or self.accel_noise_std < 0 or np.any(self.gnss_noise_std < 0):
            raise ValueError("noise stds must be >= 0")


@dataclass(frozen=True)
class MountingConfig:
    """IMU mounting: angles define C_b^v = euler_to_rotation(angles)^-1.

    ``lever_arm`` is the b-frame offset from the IMU to the rear-wheel speed
    measurement point [m].
    """

    angles: EulerAngles = EulerAngles(0.0, 0.0, 0.0)
    lever_arm: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "lever_arm", np.asarray(self.lever_arm, dtype=float))
        limit = math.radians(30.0)
        if max(abs(self.angles.roll), abs(self.angles.pitch), abs(self.angles.yaw)) >= limit:
            raise ValueError("mounting angles must stay below 30 deg")

    def c_b_v(self) -> np.ndarray:
        return geo.euler_to_rotation(self.angles).T

    def c_v_b(self) -> np.ndarray:
        return geo.euler_to_rotation(self.angles)


@dataclass
class ScenarioTruth:
    """Ground truth at the IMU rate plus the ideal v-frame-aligned IMU signal."""

    origin: GeodeticPosition
    sample_rate: float
    time: np.ndarray          # (N,)
    ned: np.ndarray           # (N, 3) position relative to origin
    vel_ned: np.ndarray       # (N, 3)
    heading: np.ndarray       # (N,)
    speed: np.ndarray         # (N,) forward speed = truth wheel speed v_odo
    accel_fwd: np.ndarray     # (N,) forward acceleration
    heading_rate: np.ndarray  # (N,)
    gyro_v: np.ndarray        # (N, 3) ideal angular rate, v-frame-aligned body
    accel_v: np.ndarray       # (N, 3) ideal specific force, v-frame-aligned body
    stationary: np.ndarray    # (N,) bool

    def __len__(self) -> int:
        return self.time.shape[0]

    def geodetic(self, i: int) -> GeodeticPosition:
        return geo.local_to_geodetic(self.ned[i], self.origin)

    def nav_state(self, i: int) -> NavState:
        cbn = geo.euler_to_rotation(EulerAngles(0.0, 0.0, float(self.heading[i])))
        return NavState(self.geodetic(i), self.vel_ned[i].copy(), cbn)

    def nav_arrays(self):
        """Truth as flat arrays (lat, lon, h, roll, pitch, yaw) for file export."""
        r_m, r_n = geo.curvature_radii(self.origin.lat)
        lat = self.origin.lat + self.ned[:, 0] / (r_m + self.origin.height)
        lon = self.origin.lon + self.ned[:, 1] / ((r_n + self.origin.height) * math.cos(self.origin.lat))
        height = self.origin.height - self.ned[:, 2]
        zeros = np.zeros_like(lat)
        return lat, lon, height, zeros, zeros, self.heading.copy()


# Half-width of the segment-boundary blend, in samples.
_BLEND_HALF_WIDTH = 10

# 5-point Gauss-Legendre nodes/weights on [0, 1].
_GL_X = (np.array([-0.9061798459386640, -0.5384693101056831, 0.0,
                   0.5384693101056831, 0.9061798459386640]) + 1.0) / 2.0
_GL_W = np.array([0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                  0.4786286704993665, 0.2369268850561891]) / 2.0


def _segment_speeds(seg: Segment) -> tuple[float, float]:
    if isinstance(seg, Stop):
        return 0.0, 0.0
    if isinstance(seg, Straight):
        return seg.start_speed, seg.end_speed
    return seg.speed, seg.speed


def _blend(interval_values: np.ndarray, half_width: int) -> np.ndarray:
    """Node values from per-interval values: centered moving average.

    The 2*half_width window turns profile steps into linear ramps while
    preserving their integral, so trapezoidal node integration reproduces the
    nominal speed/heading exactly outside blend windows.
    """
    padded = np.concatenate(
        [
            np.full(half_width, interval_values[0]),
            interval_values,
            np.full(half_width, interval_values[-1]),
        ]
    )
    csum = np.concatenate([[0.0], np.cumsum(padded)])
    width = 2 * half_width
    n_nodes = interval_values.shape[0] + 1
    return (csum[width : width + n_nodes] - csum[:n_nodes]) / width


def generate_truth(spec: TrajectorySpec) -> ScenarioTruth:
    if not spec.segments:
        raise ValueError("segment list must not be empty")
    rate = spec.sample_rate
    dt = 1.0 / rate

    counts = []
    for seg in spec.segments:
        if seg.duration <= 0.0:
            raise ValueError("segment durations must be positive")
        v0, v1 = _segment_speeds(seg)
        if v0 < 0.0 or v1 < 0.0:
            raise ValueError("segment speeds must be >= 0")
        n = seg.duration * rate
        if abs(n - round(n)) > 1e-6:
            raise ValueError("segment durations must be whole sample intervals")
        n = int(round(n))
        if n < 2 * _BLEND_HALF_WIDTH:
            raise ValueError(
                f"segments must span at least {2 * _BLEND_HALF_WIDTH} samples"
            )
        counts.append(n)

    # Boundary speed continuity keeps accelerations bounded.
    for prev, curr in zip(spec.segments, spec.segments[1:]):
        if abs(_segment_speeds(prev)[1] - _segment_speeds(curr)[0]) > 1e-9:
            raise ValueError("consecutive segments must agree on boundary speed")

    n_intervals = sum(counts)
    n_nodes = n_intervals + 1
    accel_int = np.zeros(n_intervals)
    rate_int = np.zeros(n_intervals)
    j = 0
    for seg, n in zip(spec.segments, counts):
        if isinstance(seg, Straight):
            accel_int[j : j + n] = (seg.end_speed - seg.start_speed) / seg.duration
        elif isinstance(seg, Turn):
            rate_int[j : j + n] = seg.heading_rate
        j += n

    accel_node = _blend(accel_int, _BLEND_HALF_WIDTH)
    rate_node = _blend(rate_int, _BLEND_HALF_WIDTH)

    def integrate(node_values: np.ndarray, start: float) -> np.ndarray:
        steps = 0.5 * dt * (node_values[:-1] + node_values[1:])
        return start + np.concatenate([[0.0], np.cumsum(steps)])

    v0 = _segment_speeds(spec.segments[0])[0]
    speed = integrate(accel_node, v0)

    exc = spec.excitation
    if exc.level > 0.0:
        rng = np.random.default_rng([exc.seed, 7])
        phase_a, phase_a2, phase_w = rng.uniform(0.0, 2.0 * math.pi, size=3)
        wheel_phase = integrate(speed / exc.wheel_radius, 0.0)
        # Taper below the knee so the jitter dies out around stops.
        knee = speed**2 / (speed**2 + exc.low_speed_knee**2)
        amp = exc.level * exc.accel_per_speed_sq * speed**2 * knee
        accel_exc = amp * (
            np.sin(wheel_phase + phase_a)
            + exc.second_harmonic * np.sin(2.0 * wheel_phase + phase_a2)
        )
        rate_node = rate_node + (
            exc.level * exc.yaw_rate_per_speed * speed * knee * np.sin(0.5 * wheel_phase + phase_w)
        )
        # A slow speed regulator (the driver) bleeds off the jitter's
        # integrated offset so the vehicle really stands still at stops.
        # Implicit trapezoidal integration keeps v_{k+1} - v_k exactly equal
        # to the trapezoid of the stored acceleration nodes.
        k_reg = exc.speed_regulator
        nominal = speed
        a_base = accel_node + accel_exc
        v_reg = np.empty(n_nodes)
        a_reg = np.empty(n_nodes)
        v_reg[0] = v0
        a_reg[0] = a_base[0]
        half = 0.5 * dt
        for k in range(n_nodes - 1):
            # Brakes hold the car at stops: a much stiffer pull when the
            # nominal profile is parked (cumsum dust keeps it near, not at, 0).
            parked = nominal[k + 1] < 1e-9
            k_eff = 12.0 * k_reg if parked else k_reg
            rhs = v_reg[k] + half * (a_reg[k] + a_base[k + 1] + k_eff * nominal[k + 1])
            v_reg[k + 1] = rhs / (1.0 + half * k_eff)
            a_reg[k + 1] = a_base[k + 1] - k_eff * (v_reg[k + 1] - nominal[k + 1])
            if parked and abs(v_reg[k + 1]) < 1e-6:
                # Snap the exponential tail (sub-um/s step, far below the
                # mechanization error budget) so stationary flags are exact.
                v_reg[k + 1] = 0.0
                a_reg[k + 1] = a_base[k + 1]
        accel_node = a_reg
        speed = v_reg

    # Transients may graze zero by a hair; floor them but reject grossly
    # unphysical profiles.
    if speed.min() < -5e-3:
        raise ValueError("speed profile went negative; reduce excitation or ramps")
    speed = np.maximum(speed, 0.0)
    heading = integrate(rate_node, spec.initial_heading)
    time = np.arange(n_nodes) * dt

    # Per-interval quadrature of v(tau) * [cos, sin](psi(tau)); v and psi are
    # quadratic on each interval because accel/rate are linear.
    tau = dt * _GL_X
    a0 = accel_node[:-1, None]
    da = (accel_node[1:] - accel_node[:-1])[:, None] / dt
    w0 = rate_node[:-1, None]
    dw = (rate_node[1:] - rate_node[:-1])[:, None] / dt
    v_q = speed[:-1, None] + a0 * tau + 0.5 * da * tau**2
    psi_q = heading[:-1, None] + w0 * tau + 0.5 * dw * tau**2
    d_north = dt * (v_q * np.cos(psi_q)) @ _GL_W
    d_east = dt * (v_q * np.sin(psi_q)) @ _GL_W
    ned = np.zeros((n_nodes, 3))
    ned[1:, 0] = np.cumsum(d_north)
    ned[1:, 1] = np.cumsum(d_east)

    cos_psi = np.cos(heading)
    sin_psi = np.sin(heading)
    vel_ned = np.column_stack([speed * cos_psi, speed * sin_psi, np.zeros(n_nodes)])
    accel_ned = np.column_stack(
        [
            accel_node * cos_psi - speed * rate_node * sin_psi,
            accel_node * sin_psi + speed * rate_node * cos_psi,
            np.zeros(n_nodes),
        ]
    )

    # Ideal v-frame-aligned IMU, including earth rotation and transport rate.
    r_m0, r_n0 = geo.curvature_radii(spec.origin.lat)
    lat = spec.origin.lat + ned[:, 0] / (r_m0 + spec.origin.height)
    h = spec.origin.height
    sin_lat = np.sin(lat)
    cos_lat = np.cos(lat)
    w_den = np.sqrt(1.0 - geo.WGS84_E2 * sin_lat**2)
    r_m = geo.WGS84_A * (1.0 - geo.WGS84_E2) / w_den**3
    r_n = geo.WGS84_A / w_den
    w_ie = np.column_stack(
        [geo.EARTH_RATE * cos_lat, np.zeros(n_nodes), -geo.EARTH_RATE * sin_lat]
    )
    w_en = np.column_stack(
        [
            vel_ned[:, 1] / (r_n + h),
            -vel_ned[:, 0] / (r_m + h),
            -vel_ned[:, 1] * np.tan(lat) / (r_n + h),
        ]
    )
    gravity = geo.GRAVITY_EQUATOR * (1.0 + geo.SOMIGLIANA_K * sin_lat**2) / w_den
    gravity = gravity * (
        1.0
        - 2.0 / geo.WGS84_A * (1.0 + geo.WGS84_F + geo.GRAVITY_M - 2.0 * geo.WGS84_F * sin_lat**2) * h
        + 3.0 * h**2 / geo.WGS84_A**2
    )

    def rotate_to_body(vec: np.ndarray) -> np.ndarray:
        # C_n^b for roll = pitch = 0 is Rz(psi)^T applied row-wise.
        return np.column_stack(
            [
                cos_psi * vec[:, 0] + sin_psi * vec[:, 1],
                -sin_psi * vec[:, 0] + cos_psi * vec[:, 1],
                vec[:, 2],
            ]
        )

    gyro_v = rotate_to_body(w_ie + w_en)
    gyro_v[:, 2] += rate_node

    f_ned = accel_ned.copy()
    f_ned[:, 2] -= gravity
    f_ned += np.cross(2.0 * w_ie + w_en, vel_ned)
    accel_v = rotate_to_body(f_ned)

    if exc.level > 0.0 and exc.vertical_per_speed_sq > 0.0:
        # Bracket buzz: sensed along body z but not motion of the wheel point.
        phase_z = np.random.default_rng([exc.seed, 9]).uniform(0.0, 2.0 * math.pi)
        knee = speed**2 / (speed**2 + exc.low_speed_knee**2)
        accel_v[:, 2] += (
            exc.level
            * exc.vertical_per_speed_sq
            * speed**2
            * knee
            * np.sin(wheel_phase + phase_z)
        )

    return ScenarioTruth(
        origin=spec.origin,
        sample_rate=rate,
        time=time,
        ned=ned,
        vel_ned=vel_ned,
        heading=heading,
        speed=speed,
        accel_fwd=accel_node,
        heading_rate=rate_node,
        gyro_v=gyro_v,
        accel_v=accel_v,
        stationary=speed < 1e-9,
    )


def wheel_speed_truth(truth: ScenarioTruth, mount: MountingConfig) -> np.ndarray:
    """Forward component of the v-frame velocity at the wheel point, >= 0."""
    c_b_v = mount.c_b_v()
    c_v_b = mount.c_v_b()
    # v-frame velocity of the vehicle reference point is [v, 0, 0]; the wheel
    # point adds the rigid-body term C_b^v (w_nb^b x l).
    w_nb_v = np.column_stack(
        [np.zeros(len(truth))] * 2 + [truth.heading_rate]
    )
    w_nb_b = w_nb_v @ c_v_b.T
    lever = np.cross(w_nb_b, mount.lever_arm) @ c_b_v.T
    return np.maximum(truth.speed + lever[:, 0], 0.0)


def vframe_wheel_velocity(truth: ScenarioTruth, mount: MountingConfig) -> np.ndarray:
    """Full v-frame velocity vector at the wheel point (before projection)."""
    c_b_v = mount.c_b_v()
    c_v_b = mount.c_v_b()
    w_nb_v = np.column_stack([np.zeros(len(truth))] * 2 + [truth.heading_rate])
    w_nb_b = w_nb_v @ c_v_b.T
    lever = np.cross(w_nb_b, mount.lever_arm) @ c_b_v.T
    out = lever.copy()
    out[:, 0] += truth.speed
    return out


def synthesize_imu(
    truth: ScenarioTruth, err: SensorErrorModel, mount: MountingConfig
) -> ImuSeries:
    """Corrupt the ideal v-frame IMU: mounting misalignment, bias, white noise."""
    c_v_b = mount.c_v_b()
    gyro = truth.gyro_v @ c_v_b.T
    accel = truth.accel_v @ c_v_b.T
    rng = np.random.default_rng([err.seed, 0])
    gyro = gyro + err.gyro_bias + err.gyro_noise_std * rng.standard_normal(gyro.shape)
    accel = accel + err.accel_bias + err.accel_noise_std * rng.standard_normal(accel.shape)
    return ImuSeries(truth.time.copy(), gyro, accel)


def synthesize_wheel(truth: ScenarioTruth, mount: MountingConfig) -> WheelSeries:
    return WheelSeries(truth.time.copy(), wheel_speed_truth(truth, mount))


def synthesize_gnss(
    truth: ScenarioTruth,
    err: SensorErrorModel,
    rate_hz: float = 1.0,
    outages=(),
) -> GnssSeries:
    """Noisy fixes at ``rate_hz``; fixes inside outage windows are invalid.

    ``outages`` is a sequence of half-open (start, end) windows in seconds.
    """
    step = truth.sample_rate / rate_hz
    if abs(step - round(step)) > 1e-9:
        raise ValueError("GNSS rate must divide the IMU rate")
    idx = np.arange(0, len(truth), int(round(step)))
    t = truth.time[idx]
    rng = np.random.default_rng([err.seed, 1])
    noise = err.gnss_noise_std * rng.standard_normal((idx.shape[0], 3))
    ned = truth.ned[idx] + noise
    r_m, r_n = geo.curvature_radii(truth.origin.lat)
    lat = truth.origin.lat + ned[:, 0] / (r_m + truth.origin.height)
    lon = truth.origin.lon + ned[:, 1] / ((r_n + truth.origin.height) * math.cos(truth.origin.lat))
    height = truth.origin.height - ned[:, 2]
    valid = np.ones(idx.shape[0], dtype=bool)
    for start, end in outages:
        valid &= ~((t >= start) & (t < end))
    std = np.tile(err.gnss_noise_std, (idx.shape[0], 1))
    return GnssSeries(t, lat, lon, height, std, valid)


def random_scenario(
    seed: int,
    duration: float = 90.0,
    max_speed: float = 20.0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    excitation_level: float = 1.0,
    initial_heading: float | None = None,
) -> TrajectorySpec:
    """Random stop-and-go urban drive: stops, ramps, cruises, and turns.

    Deterministic in ``seed``; generated segment durations land on the sample
    grid and boundary speeds always match.
    """
    rng = np.random.default_rng([seed, 3])

    def snap(x: float, lo: float = 0.6) -> float:
        return max(round(max(x, lo) * sample_rate), 2 * _BLEND_HALF_WIDTH + 1) / sample_rate

    segments: list[Segment] = [Stop(snap(rng.uniform(6.0, 12.0)))]
    speed = 0.0
    total = segments[0].duration
    while total < duration - 12.0:
        if speed == 0.0:
            if rng.random() < 0.35:
                # Parking-lot creep: surging mini-ramps below ~2.5 m/s.
                for _ in range(rng.integers(3, 6)):
                    target = float(rng.uniform(0.6, 2.4))
                    dur = snap(rng.uniform(1.2, 2.4))
                    segments.append(Straight(dur, speed, target))
                    speed = target
                    total += dur
            target = rng.uniform(0.25 * max_speed, max_speed)
            ramp = snap(abs(target - speed) / rng.uniform(1.0, 2.2))
            segments.append(Straight(ramp, speed, target))
            speed = target
            total += ramp
            continue
        choice = rng.random()
        if choice < 0.28:
            dur = snap(rng.uniform(3.0, 10.0))
            segments.append(Straight(dur, speed, speed))
        elif choice < 0.60:
            dur = snap(rng.uniform(4.0, 12.0))
            max_rate = min(0.35, 3.5 / max(speed, 1.0))
            rate = rng.uniform(0.04, max_rate) * (1 if rng.random() < 0.5 else -1)
            segments.append(Turn(dur, speed, rate))
        elif choice < 0.86:
            target = rng.uniform(0.15 * max_speed, max_speed)
            ramp = snap(abs(target - speed) / rng.uniform(0.8, 2.0))
            segments.append(Straight(ramp, speed, target))
            speed = target
        else:
            ramp = snap(speed / rng.uniform(1.4, 2.4))
            segments.append(Straight(ramp, speed, 0.0))
            segments.append(Stop(snap(rng.uniform(10.0, 22.0))))
            speed = 0.0
        total += segments[-1].duration

    if speed > 0.0:
        ramp = snap(speed / 1.8)
        segments.append(Straight(ramp, speed, 0.0))
        total += ramp
    remaining = max(duration - total, 6.0)
    segments.append(Stop(snap(remaining)))

    heading = rng.uniform(-math.pi, math.pi) if initial_heading is None else initial_heading
    return TrajectorySpec(
        segments=tuple(segments),
        initial_heading=heading,
        sample_rate=sample_rate,
        excitation=RoadExcitation(level=excitation_level, seed=seed),
    )


def random_error_model(
    seed: int,
    gyro_bias_limit: float = math.radians(2.0),
    accel_bias_limit: float = 0.2,
    gyro_noise_std: float = 6.0e-4,
    accel_noise_std: float = 8.0e-3,
    gnss_noise_std=(0.4, 0.4, 0.8),
) -> SensorErrorModel:
    """Biases drawn uniformly inside the MEMS-typical ranges, noise fixed."""
    rng = np.random.default_rng([seed, 5])
    return SensorErrorModel(
        gyro_bias=rng.uniform(-gyro_bias_limit, gyro_bias_limit, 3),
        accel_bias=rng.uniform(-accel_bias_limit, accel_bias_limit, 3),
        gyro_noise_std=gyro_noise_std,
        accel_noise_std=accel_noise_std,
        gnss_noise_std=np.asarray(gnss_noise_std, dtype=float),
        seed=seed,
    )
