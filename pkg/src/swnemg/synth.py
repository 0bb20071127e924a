"""Seeded synthetic elbow-movement sessions (EMG at 2000 Hz, positions at 500 Hz).

Each session holds 36 trials: the 12 ordered pairs of four elbow angles,
three repetitions each, in a seeded random order. A trial is a 2.0 s
pre-rest, a 2.5 s task window containing one minimum-jerk movement, and a
0.1 s post-rest.

EMG channel ``c`` is::

    scale * gain_c * session_gain_c * trial_gain * drift_c(t) * envelope_c(t) * carrier_c(t)
        + noise_floor * white(t)

with a unit-variance 20-450 Hz Gaussian carrier. The envelope is a tonic
(co-contraction) level drawn per channel and per trial, plus flexor/extensor
drives proportional to the positive and negative parts of the elbow angular
velocity (leading the movement by ``emg_lead_s``), plus an optional
gravity-dependent flexor holding term. ``drift_c`` is an optional slow
log-normal gain wander; it is off by default.

Subjects differ only in their channel gains. Within a subject, electrode
placement changes the per-channel gain from session to session, the overall
gain jitters from trial to trial and the tonic level varies per trial. None
of these carry class information, and all are roughly constant over a
feature window, which is the situation sliding-window normalisation targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .filters import MultiChannelSignal
from .kinematics import ArmGeometry, forward_kinematics

EMG_RATE_HZ = 2000.0
POSITION_RATE_HZ = 500.0
PRE_REST_S = 2.0
TASK_S = 2.5
POST_REST_S = 0.1
TRIAL_S = PRE_REST_S + TASK_S + POST_REST_S
N_CHANNELS = 12
SESSIONS = 10
REPEATS = 3
#: Elbow angles (deg) of the four start/end points.
POINT_ANGLES = (30.0, 60.0, 90.0, 120.0)
MOVEMENTS = tuple((s, e) for s in range(4) for e in range(4) if s != e)
TRIALS_PER_SESSION = len(MOVEMENTS) * REPEATS
SHOULDER_ANGLE_DEG = -80.0
VELOCITY_REF = 100.0  # deg/s giving unit drive

#: (flexor weight, extensor weight) per channel: biceps x4, brachialis,
#: brachioradialis, anconeus, triceps lateral x2, triceps long x2, ECRL.
DEFAULT_ACTIVATION = np.array([
    [1.00, 0.10], [0.95, 0.12], [0.90, 0.10], [0.85, 0.15],
    [0.80, 0.10], [0.70, 0.15],
    [0.10, 0.70],
    [0.12, 1.00], [0.10, 0.95],
    [0.15, 0.90], [0.10, 0.85],
    [0.40, 0.30],
])


@dataclass
class SyntheticSubjectSpec:
    subject_id: int
    channel_gains: np.ndarray = field(default_factory=lambda: np.ones(N_CHANNELS))
    noise_floor: float = 2e-6
    activation_map: np.ndarray = field(default_factory=lambda: DEFAULT_ACTIVATION.copy())
    seed: int = 0
    geometry: ArmGeometry = field(default_factory=ArmGeometry)
    emg_scale: float = 1e-4
    tonic_spread: tuple = (0.05, 0.8)
    posture_gain: float = 0.0
    session_gain_spread: tuple = (0.3, 3.0)
    trial_gain_spread: tuple = (0.5, 2.0)
    drift_log_std: float = 0.0
    drift_time_s: float = 1.0
    emg_lead_s: float = 0.05
    position_noise_m: float = 0.0

    def __post_init__(self):
        self.channel_gains = np.asarray(self.channel_gains, dtype=float)
        self.activation_map = np.asarray(self.activation_map, dtype=float)
        if self.channel_gains.shape != (N_CHANNELS,) or np.any(self.channel_gains <= 0):
            raise ValueError(f"need {N_CHANNELS} positive channel gains")
        if self.activation_map.shape != (N_CHANNELS, 2):
            raise ValueError(f"activation map must be ({N_CHANNELS}, 2)")
        if np.any(self.activation_map < 0) or np.any(self.activation_map > 1):
            raise ValueError("activation weights must lie in [0, 1]")
        if not (np.any(self.activation_map[:, 0] > 0) and np.any(self.activation_map[:, 1] > 0)):
            raise ValueError("need at least one flexor-weighted and one extensor-weighted channel")
        if self.noise_floor < 0 or self.emg_scale <= 0 or self.posture_gain < 0:
            raise ValueError("noise_floor and posture_gain must be >= 0, emg_scale > 0")
        if self.drift_log_std < 0 or self.drift_time_s <= 0:
            raise ValueError("drift_log_std must be >= 0 and drift_time_s > 0")
        for name in ("session_gain_spread", "trial_gain_spread", "tonic_spread"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id, "channel_gains": self.channel_gains.tolist(),
            "noise_floor": self.noise_floor, "activation_map": self.activation_map.tolist(),
            "seed": self.seed, "upper_arm_m": self.geometry.upper_arm_m,
            "forearm_m": self.geometry.forearm_m, "emg_scale": self.emg_scale,
            "tonic_spread": list(self.tonic_spread), "posture_gain": self.posture_gain,
            "session_gain_spread": list(self.session_gain_spread),
            "trial_gain_spread": list(self.trial_gain_spread),
            "drift_log_std": self.drift_log_std, "drift_time_s": self.drift_time_s,
            "emg_lead_s": self.emg_lead_s,
            "position_noise_m": self.position_noise_m,
        }


@dataclass
class TrialRecord:
    emg: MultiChannelSignal
    positions: np.ndarray  # (T, 6) hand, elbow, shoulder (x, y) at 500 Hz
    movement_id: int
    session_id: int
    trial_id: int
    subject_id: int
    start_deg: float
    end_deg: float
    geometry: ArmGeometry
    position_rate_hz: float = POSITION_RATE_HZ

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.subject_id, self.session_id, self.trial_id)


def minimum_jerk(t, start: float, end: float, onset: float, duration: float):
    """Angle and angular velocity of a minimum-jerk move sampled at times ``t``."""
    tau = np.clip((np.asarray(t, dtype=float) - onset) / duration, 0.0, 1.0)
    delta = end - start
    angle = start + delta * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
    vel = delta / duration * (30 * tau**2 - 60 * tau**3 + 30 * tau**4)
    return angle, vel


@lru_cache(maxsize=None)
def _carrier_filter(fs: float):
    sos = sps.butter(4, [20.0, 450.0], btype="bandpass", fs=fs, output="sos")
    impulse = np.zeros(8192)
    impulse[0] = 1.0
    gain = np.sqrt(np.sum(sps.sosfilt(sos, impulse) ** 2))
    return sos, gain


def band_limited_noise(rng: np.random.Generator, n: int, channels: int,
                       fs: float = EMG_RATE_HZ) -> np.ndarray:
    """Unit-variance Gaussian noise band-limited to 20-450 Hz, shape ``(n, channels)``."""
    sos, gain = _carrier_filter(fs)
    burn = 400
    white = rng.standard_normal((n + burn, channels))
    return sps.sosfilt(sos, white, axis=0)[burn:] / gain


def gain_drift(rng: np.random.Generator, n: int, channels: int, log_std: float,
               time_s: float, fs: float = EMG_RATE_HZ, step_s: float = 0.05) -> np.ndarray:
    """Slow multiplicative gain, ``exp`` of a stationary AR(1) log-gain per channel."""
    if log_std == 0:
        return np.ones((n, channels))
    coarse = int(np.ceil(n / fs / step_s)) + 2
    a = np.exp(-step_s / time_s)
    shocks = rng.standard_normal((coarse, channels)) * log_std * np.sqrt(1 - a * a)
    shocks[0] = rng.standard_normal(channels) * log_std
    log_gain = sps.lfilter([1.0], [1.0, -a], shocks, axis=0)
    t = np.arange(n) / fs
    knots = np.arange(coarse) * step_s
    return np.exp(np.column_stack([np.interp(t, knots, log_gain[:, c]) for c in range(channels)]))


class SubjectDataset:
    """Lazily generated trials of one synthetic subject.

    Trial ``i`` depends only on the spec and ``i``, so trials can be produced
    in any order and are reproducible bit for bit.
    """

    def __init__(self, spec: SyntheticSubjectSpec, sessions: int = SESSIONS):
        if sessions < 1:
            raise ValueError("need at least one session")
        self.spec = spec
        self.sessions = sessions
        root = np.random.SeedSequence([spec.seed, spec.subject_id])
        session_seq, trial_seq = root.spawn(2)
        self._session_seeds = session_seq.spawn(sessions)
        self._trial_seeds = trial_seq.spawn(sessions * TRIALS_PER_SESSION)
        self._plans = [self._plan_session(s) for s in range(sessions)]

    @property
    def subject_id(self) -> int:
        return self.spec.subject_id

    @property
    def geometry(self) -> ArmGeometry:
        return self.spec.geometry

    def __len__(self) -> int:
        return self.sessions * TRIALS_PER_SESSION

    def _plan_session(self, s: int):
        rng = np.random.default_rng(self._session_seeds[s])
        order = rng.permutation(np.repeat(np.arange(len(MOVEMENTS)), REPEATS))
        lo, hi = np.log(self.spec.session_gain_spread)
        gains = np.exp(rng.uniform(lo, hi, N_CHANNELS))
        return order, gains

    def trial(self, index: int) -> TrialRecord:
        if not 0 <= index < len(self):
            raise IndexError(index)
        spec = self.spec
        s, j = divmod(index, TRIALS_PER_SESSION)
        order, session_gains = self._plans[s]
        move = int(order[j])
        start, end = (POINT_ANGLES[k] for k in MOVEMENTS[move])
        rng = np.random.default_rng(self._trial_seeds[index])

        reaction = rng.uniform(0.15, 0.45)
        duration = rng.uniform(0.9, 1.7)
        onset = PRE_REST_S + reaction
        lo, hi = np.log(spec.trial_gain_spread)
        trial_gain = np.exp(rng.uniform(lo, hi))
        lo, hi = np.log(spec.tonic_spread)
        tonic = np.exp(rng.uniform(lo, hi, N_CHANNELS))

        n_emg = int(round(TRIAL_S * EMG_RATE_HZ))
        t_emg = np.arange(n_emg) / EMG_RATE_HZ
        angle, vel = minimum_jerk(t_emg + spec.emg_lead_s, start, end, onset, duration)
        drive = np.stack([np.maximum(vel, 0.0), np.maximum(-vel, 0.0)], axis=1) / VELOCITY_REF
        # holding the forearm against gravity loads the flexors
        forearm = np.radians(SHOULDER_ANGLE_DEG + angle)
        hold = spec.posture_gain * np.maximum(np.cos(forearm), 0.0)
        envelope = tonic + drive @ spec.activation_map.T + np.outer(hold, spec.activation_map[:, 0])
        carrier = band_limited_noise(rng, n_emg, N_CHANNELS)
        amplitude = spec.emg_scale * spec.channel_gains * session_gains * trial_gain
        drift = gain_drift(rng, n_emg, N_CHANNELS, spec.drift_log_std, spec.drift_time_s)
        emg = amplitude * drift * envelope * carrier
        emg += spec.noise_floor * rng.standard_normal(emg.shape)

        n_pos = int(round(TRIAL_S * POSITION_RATE_HZ))
        t_pos = np.arange(n_pos) / POSITION_RATE_HZ
        theta, _ = minimum_jerk(t_pos, start, end, onset, duration)
        elbow, hand = forward_kinematics(np.full(n_pos, SHOULDER_ANGLE_DEG), theta, spec.geometry)
        positions = np.hstack([hand, elbow, np.zeros((n_pos, 2))])
        if spec.position_noise_m > 0:
            positions += spec.position_noise_m * rng.standard_normal(positions.shape)

        return TrialRecord(
            emg=MultiChannelSignal(emg, EMG_RATE_HZ), positions=positions,
            movement_id=move + 1, session_id=s + 1, trial_id=j + 1,
            subject_id=spec.subject_id, start_deg=start, end_deg=end,
            geometry=spec.geometry)

    def __iter__(self):
        return (self.trial(i) for i in range(len(self)))


def generate_subject(spec: SyntheticSubjectSpec, sessions: int = SESSIONS) -> list[TrialRecord]:
    """All trials of one subject, session by session."""
    return list(SubjectDataset(spec, sessions))


def generate_cohort(n_subjects: int, gain_spread=(0.2, 5.0), master_seed: int = 0,
                    sessions: int = SESSIONS, **spec_overrides) -> list[SubjectDataset]:
    """Subjects with channel gains drawn log-uniformly from ``gain_spread``.

    Everything except the gains (and the per-subject random streams) is
    shared across subjects. Trials are generated on access.
    """
    if n_subjects < 1:
        raise ValueError("need at least one subject")
    lo, hi = gain_spread
    if not 0 < lo < hi:
        raise ValueError(f"gain spread must be a non-empty positive range, got {gain_spread}")
    seeds = np.random.SeedSequence(master_seed).spawn(n_subjects)
    cohort = []
    for i, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        gains = np.exp(rng.uniform(np.log(lo), np.log(hi), N_CHANNELS))
        subject_seed = int(rng.integers(0, 2**63 - 1))
        spec = SyntheticSubjectSpec(subject_id=i + 1, channel_gains=gains, seed=subject_seed,
                                    **spec_overrides)
        cohort.append(SubjectDataset(spec, sessions))
    return cohort
