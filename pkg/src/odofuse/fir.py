"""Windowed-sinc FIR low-pass filter and the threshold zero-velocity detector.

The default design (order 64, 0.1 Hz cutoff at 50 Hz) smooths the raw
regressed speed before it feeds the EKF and the zero-velocity detector.
Application is offline: the symmetric taps run over an edge-padded copy of
the series, which compensates the group delay so filtered values align with
input time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_SPEED_THRESHOLD = 0.1  # m/s


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    sample_rate: float
    cutoff: float

    @property
    def order(self) -> int:
        return self.taps.shape[0] - 1

    def response_at(self, freq_hz: float) -> complex:
        n = np.arange(self.taps.shape[0])
        return complex(np.sum(self.taps * np.exp(-2j * np.pi * freq_hz / self.sample_rate * n)))


def design_lowpass(
    cutoff_hz: float = 0.1, sample_rate_hz: float = 50.0, order: int = 64
) -> FirFilter:
    """Hamming-windowed sinc, taps normalized to unit DC gain."""
    if order % 2 != 0:
        raise ValueError("order must be even for integer group delay")
    if not 0.0 < cutoff_hz < sample_rate_hz / 2.0:
        raise ValueError("cutoff must lie inside (0, Nyquist)")
    n = np.arange(order + 1) - order / 2.0
    fc = cutoff_hz / sample_rate_hz
    ideal = 2.0 * fc * np.sinc(2.0 * fc * n)
    window = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(order + 1) / order)
    taps = ideal * window
    taps /= taps.sum()
    return FirFilter(taps, sample_rate_hz, cutoff_hz)


def fir_apply(filt: FirFilter, series) -> np.ndarray:
    """Filter with group-delay compensation; output aligns with input time.

    Edges are handled by edge-value padding, so the output has the same
    length as the input.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if series.shape[0] <= filt.order:
        raise ValueError("series must be longer than the filter order")
    half = filt.order // 2
    padded = np.concatenate(
        [np.full(half, series[0]), series, np.full(half, series[-1])]
    )
    return np.convolve(padded, filt.taps, mode="valid")


def detect_zero_velocity(speed, threshold: float = ZERO_SPEED_THRESHOLD):
    """Stationary iff speed < threshold (strict); vectorizes over arrays."""
    speed = np.asarray(speed, dtype=float)
    result = speed < threshold
    return bool(result) if result.ndim == 0 else result
