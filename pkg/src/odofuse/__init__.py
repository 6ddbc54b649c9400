"""GNSS/INS sensor fusion with a learned IMU pseudo-odometer.

A numpy toolkit that simulates land-vehicle trajectories with corrupted IMU,
wheel-odometer and GNSS measurements, trains a small 1D CNN that regresses
forward speed from one-second IMU windows, and fuses everything in a 15-state
error-state Kalman filter with NHC, ZUPT, ZARU and GNSS position updates.
"""

__version__ = "0.1.0"
