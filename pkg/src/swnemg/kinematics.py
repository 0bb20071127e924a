"""Elbow kinematics and the rest/flexion/extension target.

Positions (metres, 500 Hz) are smoothed with a zero-phase 2nd-order 20 Hz
low-pass, converted to joint angles by two-link planar inverse kinematics,
differentiated, and coded with a +/-2 deg/s dead band.

Angle convention: the shoulder angle is measured from the +x axis to the
upper arm; the elbow angle is 0 deg for a straight arm and grows with
flexion, so flexion is a positive angular velocity.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .filters import MultiChannelSignal, design_butterworth, filter_zero_phase

VELOCITY_THRESHOLD = 2.0  # deg/s
POSITION_RATE_HZ = 500.0
POSITION_COLUMNS = ("hand_x", "hand_y", "elbow_x", "elbow_y", "shoulder_x", "shoulder_y")
_SQRT_SLACK = 1e-9


class Label(enum.IntEnum):
    REST = 0
    FLEXION = 1
    EXTENSION = 2

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


CLASS_ORDER = (Label.REST, Label.FLEXION, Label.EXTENSION)


@dataclass(frozen=True)
class ArmGeometry:
    upper_arm_m: float = 0.30
    forearm_m: float = 0.26

    def __post_init__(self):
        if not (self.upper_arm_m > 0 and self.forearm_m > 0):
            raise ValueError("segment lengths must be positive")


def smooth_positions(track, fs: float = POSITION_RATE_HZ) -> np.ndarray:
    """Zero-phase low-pass (2nd order, 20 Hz) of every coordinate column."""
    arr = np.asarray(track, dtype=float)
    squeeze = arr.ndim == 1
    filt = design_butterworth(2, 20.0, fs, "lowpass")
    out = filter_zero_phase(filt, MultiChannelSignal(arr, fs)).data
    return out[:, 0] if squeeze else out


def _sqrt_checked(v):
    v = np.asarray(v, dtype=float)
    if np.any(v < -_SQRT_SLACK):
        raise DomainError("pose is not reachable with this arm geometry")
    return np.sqrt(np.clip(v, 0.0, None))


def positions_to_angles(hand, shoulder, geom: ArmGeometry):
    """Shoulder and elbow angles in degrees from hand and shoulder positions.

    ``hand`` and ``shoulder`` are ``(..., 2)`` arrays of (x, y). With
    ``a = y_hand - y_sld``, ``b = x_hand - x_sld``, ``r2 = a**2 + b**2`` and

        c = (r2 + L_sld**2 - L_elb**2) / (2 L_sld)
        d = (r2 - L_sld**2 + L_elb**2) / (2 L_elb)

    the angles are

        shoulder = atan2(a, b) - atan2(sqrt(r2 - c**2), c)
        elbow    = atan2(sqrt(r2 - c**2), c) + atan2(sqrt(r2 - d**2), d)

    with the shoulder angle wrapped to [-180, 180).

    Raises
    ------
    DomainError
        If the hand is out of reach (too far or too close to the shoulder).
    """
    hand = np.asarray(hand, dtype=float)
    shoulder = np.asarray(shoulder, dtype=float)
    if not (np.all(np.isfinite(hand)) and np.all(np.isfinite(shoulder))):
        raise ValueError("positions must be finite")
    l1, l2 = geom.upper_arm_m, geom.forearm_m
    a = hand[..., 1] - shoulder[..., 1]
    b = hand[..., 0] - shoulder[..., 0]
    r2 = a * a + b * b
    r = np.sqrt(r2)
    if np.any(r > l1 + l2 + _SQRT_SLACK) or np.any(r < abs(l1 - l2) - _SQRT_SLACK):
        raise DomainError("hand distance outside the reachable annulus")
    c = (r2 + l1 * l1 - l2 * l2) / (2 * l1)
    d = (r2 - l1 * l1 + l2 * l2) / (2 * l2)
    alpha = np.arctan2(_sqrt_checked(r2 - c * c), c)
    beta = np.arctan2(_sqrt_checked(r2 - d * d), d)
    theta_sld = (np.degrees(np.arctan2(a, b) - alpha) + 180.0) % 360.0 - 180.0
    theta_elb = np.degrees(alpha + beta)
    return theta_sld, theta_elb


def forward_kinematics(theta_sld_deg, theta_elb_deg, geom: ArmGeometry, shoulder=(0.0, 0.0)):
    """Elbow and hand positions ``(..., 2)`` for the given joint angles."""
    ts = np.radians(np.asarray(theta_sld_deg, dtype=float))
    te = np.radians(np.asarray(theta_elb_deg, dtype=float))
    sx, sy = shoulder
    ex = sx + geom.upper_arm_m * np.cos(ts)
    ey = sy + geom.upper_arm_m * np.sin(ts)
    hx = ex + geom.forearm_m * np.cos(ts + te)
    hy = ey + geom.forearm_m * np.sin(ts + te)
    return np.stack([ex, ey], axis=-1), np.stack([hx, hy], axis=-1)


def angular_velocity(theta, fs: float) -> np.ndarray:
    """Forward difference ``(theta[t+1] - theta[t]) * fs``; last value repeated."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or len(theta) < 2:
        raise ValueError("need a 1-D angle series of at least 2 samples")
    vel = np.diff(theta) * fs
    return np.append(vel, vel[-1])


def code_target(velocity: float) -> Label:
    """Flexion at >= +2 deg/s, extension at <= -2 deg/s, otherwise rest."""
    if not math.isfinite(velocity):
        raise ValueError(f"angular velocity must be finite, got {velocity}")
    if velocity >= VELOCITY_THRESHOLD:
        return Label.FLEXION
    if velocity <= -VELOCITY_THRESHOLD:
        return Label.EXTENSION
    return Label.REST


def code_targets(velocity) -> np.ndarray:
    """Vectorised :func:`code_target`; returns integer label values."""
    v = np.asarray(velocity, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("angular velocity must be finite")
    out = np.full(v.shape, int(Label.REST), dtype=np.int64)
    out[v >= VELOCITY_THRESHOLD] = Label.FLEXION
    out[v <= -VELOCITY_THRESHOLD] = Label.EXTENSION
    return out


def targets_from_positions(positions, geom: ArmGeometry, fs: float = POSITION_RATE_HZ):
    """Full position chain for a ``(T, 6)`` array in :data:`POSITION_COLUMNS` order.

    Returns ``(elbow_angle_deg, velocity_deg_s, labels)`` at ``fs``.
    """
    pos = smooth_positions(np.asarray(positions, dtype=float), fs)
    _, theta_elb = positions_to_angles(pos[:, 0:2], pos[:, 4:6], geom)
    vel = angular_velocity(theta_elb, fs)
    return theta_elb, vel, code_targets(vel)


def align_targets(targets, source_index) -> np.ndarray:
    """Pick the 500 Hz target behind every feature row.

    ``source_index`` is the row-to-sample map of a
    :class:`~swnemg.pipeline.FeatureMatrix`, so each row takes the label at
    the sample that generated it.
    """
    targets = np.asarray(targets)
    idx = np.asarray(source_index, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= len(targets)):
        raise ValueError(
            f"feature rows reach sample {idx.max()} but only {len(targets)} targets exist")
    return targets[idx]
