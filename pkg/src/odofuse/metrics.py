"""Evaluation metrics: outage drift, speed error statistics, detection scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .streams import NavSeries

SPEED_BINS = ((0.0, 5.0), (5.0, 10.0), (10.0, 15.0), (15.0, 20.0), (20.0, 25.0))
CDF_RESOLUTION = 0.001  # m/s

# Published real-vehicle reference values (different dataset; included in
# reports for side-by-side context only, never comparable to synthetic runs).
REFERENCE_REAL_VEHICLE = {
    "speed_mae_overall": 0.315,
    "speed_rmse_overall": 0.490,
    "detection_precision": 0.9533,
    "detection_recall": 0.9905,
    "outage_rms_nhc": 12.31,
    "outage_rms_pseudo": 3.95,
    "outage_rms_wheel": 3.14,
}


@dataclass(frozen=True)
class OutageSchedule:
    """Periodic GNSS denial: ``length``-second outages every ``period`` seconds."""

    start: float
    length: float = 60.0
    period: float = 180.0

    def __post_init__(self):
        if not 0.0 < self.length < self.period:
            raise ValueError("need 0 < length < period")

    def windows(self, duration: float) -> list[tuple[float, float]]:
        """Half-open outage windows fully contained in [0, duration]."""
        out = []
        begin = self.start
        while begin + self.length <= duration:
            out.append((begin, begin + self.length))
            begin += self.period
        return out


@dataclass
class BinStats:
    count: int
    mae: float
    rmse: float


@dataclass
class SpeedMetrics:
    bins: dict = field(default_factory=dict)       # label -> BinStats
    overall: BinStats | None = None
    cdf_errors: np.ndarray | None = None           # sorted |error| grid
    cdf_fractions: np.ndarray | None = None


@dataclass
class DetectionMetrics:
    true_positive: int
    false_positive: int
    true_negative: int
    false_negative: int
    precision: float | None                        # None when no positives predicted
    recall: float


def horizontal_errors(fused: NavSeries, truth: NavSeries) -> np.ndarray:
    """Per-epoch horizontal error [m] in the NED frame anchored at truth start."""
    if fused.time.shape != truth.time.shape or np.abs(fused.time - truth.time).max() > 1e-9:
        raise ValueError("fused and truth series must be time-aligned")
    origin = geo.GeodeticPosition(float(truth.lat[0]), float(truth.lon[0]), float(truth.height[0]))
    r_m, r_n = geo.curvature_radii(origin.lat)
    dn = (fused.lat - truth.lat) * (r_m + origin.height)
    de = (fused.lon - truth.lon) * (r_n + origin.height) * math.cos(origin.lat)
    return np.hypot(dn, de)


def mimic_outage_eval(
    fused: NavSeries, truth: NavSeries, schedule: OutageSchedule
) -> tuple[list[float], float]:
    """Max horizontal error inside each outage window, and their RMS."""
    errors = horizontal_errors(fused, truth)
    duration = float(truth.time[-1] - truth.time[0])
    windows = schedule.windows(duration)
    if not windows:
        raise ValueError("no outage windows fall inside the run")
    t = truth.time - truth.time[0]
    maxima = []
    for begin, end in windows:
        mask = (t >= begin) & (t < end)
        maxima.append(float(errors[mask].max()))
    rms = math.sqrt(float(np.mean(np.square(maxima))))
    return maxima, rms


def outage_rms(maxima) -> float:
    return math.sqrt(float(np.mean(np.square(np.asarray(maxima, dtype=float)))))


def _bin_stats(errors: np.ndarray) -> BinStats:
    return BinStats(
        count=int(errors.shape[0]),
        mae=float(np.mean(np.abs(errors))),
        rmse=float(np.sqrt(np.mean(errors**2))),
    )


def speed_metrics(predicted, truth) -> SpeedMetrics:
    """Per-truth-speed-bin MAE/RMSE plus the CDF of absolute errors."""
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise ValueError("predicted/truth length mismatch")
    if predicted.size == 0:
        raise ValueError("empty series")

    errors = predicted - truth
    out = SpeedMetrics()
    for lo, hi in SPEED_BINS:
        mask = (truth >= lo) & (truth < hi)
        if mask.any():
            out.bins[f"{lo:g}-{hi:g}"] = _bin_stats(errors[mask])
    out.overall = _bin_stats(errors)

    abs_err = np.sort(np.abs(errors))
    grid = np.round(abs_err / CDF_RESOLUTION) * CDF_RESOLUTION
    values, counts = np.unique(grid, return_counts=True)
    out.cdf_errors = values
    out.cdf_fractions = np.cumsum(counts) / abs_err.shape[0]
    return out


def error_percentile(metrics: SpeedMetrics, q: float) -> float:
    """Smallest CDF grid value whose cumulative fraction reaches q (0 < q <= 1)."""
    idx = int(np.searchsorted(metrics.cdf_fractions, q - 1e-12))
    idx = min(idx, metrics.cdf_errors.shape[0] - 1)
    return float(metrics.cdf_errors[idx])


def detection_metrics(predicted_flags, truth_flags) -> DetectionMetrics:
    """Binary scores with stationary as the positive class."""
    predicted = np.asarray(predicted_flags, dtype=bool)
    truth = np.asarray(truth_flags, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError("flag series must be aligned")
    tp = int(np.sum(predicted & truth))
    fp = int(np.sum(predicted & ~truth))
    tn = int(np.sum(~predicted & ~truth))
    fn = int(np.sum(~predicted & truth))
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return DetectionMetrics(tp, fp, tn, fn, precision, recall)
