"""EMG processing chain: preprocessing, normalisation, features, decimation.

Raw EMG at 2000 Hz is low-passed (3rd order, 500 Hz), subsampled to 500 Hz
and high-passed (3rd order, 30 Hz). The 500 Hz cutoff sits above the new
250 Hz Nyquist, so the low-pass does not anti-alias for the 500 Hz stream;
the chain is kept as published regardless.

Feature rows are produced at 500 Hz steps ``t = warmup, warmup + 25, ...``
(keep-first decimation to 20 Hz). The row at ``t`` uses the raw samples
``t - L_feature + 1 .. t`` normalised with the mean and standard deviation
of ``t - L_norm + 1 .. t``. When ``L_feature <= L_norm`` this is the tail of
the normalised sliding window; when it is longer, the current window
statistics are applied to the older samples as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import features as feat
from .errors import ConfigurationError
from .filters import (MultiChannelSignal, decimate, design_butterworth,
                      filter_causal)
from .normalization import DEGENERATE_STD
from .windows import DividingScheme, WeightingKind, weight_vectors

RAW_RATE_HZ = 2000.0
PROCESS_RATE_HZ = 500.0
FEATURE_RATE_HZ = 20.0
NORMALIZATIONS = ("SWN", "None")
#: STFT and SWT on divided windows need blocks longer than this.
MIN_DIVIDED_MS = 100.0


def preprocessing_filters(raw_rate_hz: float = RAW_RATE_HZ,
                          process_rate_hz: float = PROCESS_RATE_HZ):
    lowpass = design_butterworth(3, 500.0, raw_rate_hz, "lowpass")
    highpass = design_butterworth(3, 30.0, process_rate_hz, "highpass")
    return lowpass, highpass


def decimation_factor(rate_in: float, rate_out: float) -> int:
    factor = rate_in / rate_out
    if abs(factor - round(factor)) > 1e-9 or round(factor) < 1:
        raise ValueError(f"cannot decimate {rate_in} Hz to {rate_out} Hz by an integer factor")
    return int(round(factor))


def preprocess_emg(sig: MultiChannelSignal) -> MultiChannelSignal:
    """Low-pass 500 Hz, decimate to 500 Hz, high-pass 30 Hz (all causal)."""
    lowpass, highpass = preprocessing_filters(sig.sample_rate_hz)
    x = filter_causal(lowpass, sig)
    x = decimate(x, decimation_factor(sig.sample_rate_hz, PROCESS_RATE_HZ))
    return filter_causal(highpass, x)


@dataclass(frozen=True)
class FeatureConfig:
    """Everything that determines the feature layout and values."""

    feature: str = "MAV"
    normalization: str = "SWN"
    norm_ms: int = 500
    feature_ms: int = 500
    weighting: WeightingKind = WeightingKind.FLAT
    dividing: DividingScheme | None = None

    def __post_init__(self):
        feat.components(self.feature)
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}")
        for name in ("norm_ms", "feature_ms"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        object.__setattr__(self, "weighting", WeightingKind.parse(self.weighting))
        if isinstance(self.dividing, str):
            object.__setattr__(self, "dividing", DividingScheme.parse(self.dividing))

    def samples(self, ms: float, fs: float = PROCESS_RATE_HZ) -> int:
        return int(round(ms * fs / 1000.0))

    def norm_len(self, fs: float = PROCESS_RATE_HZ) -> int:
        return self.samples(self.norm_ms, fs)

    def feature_len(self, fs: float = PROCESS_RATE_HZ) -> int:
        return self.samples(self.feature_ms, fs)

    def default_warmup(self, fs: float = PROCESS_RATE_HZ) -> int:
        if self.normalization == "None":
            return self.feature_len(fs)
        return max(self.norm_len(fs), self.feature_len(fs))

    @property
    def label(self) -> str:
        parts = [self.feature, self.normalization, f"N{self.norm_ms}", f"F{self.feature_ms}"]
        if self.weighting is not WeightingKind.FLAT:
            parts.append(self.weighting.value)
        if self.dividing is not None:
            parts.append(self.dividing.name)
        return "-".join(parts)


def check_feature_config(config: FeatureConfig, fs: float = PROCESS_RATE_HZ) -> None:
    """Raise :class:`ConfigurationError` if the feature cannot run on this window."""
    length = config.feature_len(fs)
    if config.dividing is not None:
        block = config.dividing.block_length(length)
        if block < 2:
            raise ConfigurationError(f"{config.dividing.name} leaves {block}-sample blocks")
        if config.feature in ("STFT", "SWT") and block * 1000.0 / fs <= MIN_DIVIDED_MS:
            raise ConfigurationError(
                f"{config.feature} with {config.dividing.name} needs blocks over "
                f"{MIN_DIVIDED_MS:g} ms, got {block * 1000.0 / fs:g} ms")
    else:
        block = length
    if config.feature == "STFT" and block < feat.STFT_SEGMENT:
        raise ConfigurationError(
            f"STFT needs windows of at least {feat.STFT_SEGMENT} samples, got {block}")
    if config.feature == "SWT" and block < 2 ** feat.SWT_LEVEL:
        raise ConfigurationError(f"SWT needs at least {2 ** feat.SWT_LEVEL} samples, got {block}")
    if config.feature in ("MWL", "DRMS") and block < 2:
        raise ConfigurationError(f"{config.feature} needs at least 2 samples per window")


def feature_layout(config: FeatureConfig, channels: int) -> list[str]:
    """Column names in output order: block, weight member, component, channel."""
    blocks = [""] if config.dividing is None else [
        f"{config.dividing.name}b{i + 1}" for i in range(config.dividing.n)]
    members = [""] if config.weighting is WeightingKind.FLAT else [
        m.value for m in config.weighting.members]
    names = []
    for b in blocks:
        for m in members:
            for comp in feat.components(config.feature):
                for ch in range(channels):
                    tag = "/".join(p for p in (comp, m, b) if p)
                    names.append(f"{tag}/ch{ch + 1:02d}")
    return names


@dataclass
class FeatureMatrix:
    """Feature rows at ``sample_rate_hz`` with their source sample indices."""

    values: np.ndarray
    layout: list[str]
    sample_rate_hz: float = FEATURE_RATE_HZ
    source_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    source_rate_hz: float = PROCESS_RATE_HZ

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, len(self.layout))
        self.source_index = np.asarray(self.source_index, dtype=int)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return len(self.layout)


def row_indices(n_samples: int, warmup: int, fs: float = PROCESS_RATE_HZ,
                out_rate: float = FEATURE_RATE_HZ) -> np.ndarray:
    """500 Hz sample index of every emitted feature row."""
    step = decimation_factor(fs, out_rate)
    return np.arange(warmup, n_samples, step)


def normalized_windows(x: np.ndarray, rows: np.ndarray, config: FeatureConfig,
                       fs: float = PROCESS_RATE_HZ):
    """Feature windows ``(R, C, L_feature)`` plus the raw window std ``(R, C)``.

    ``x`` is time-major ``(T, C)``; windows come back channel-major with time
    last. The std is the one SWN divides by (over ``L_norm`` samples) and is
    reported for the passthrough variant too.
    """
    ln, lf = config.norm_len(fs), config.feature_len(fs)
    if len(rows) and rows[0] < max(ln, lf) - 1 and config.normalization == "SWN":
        raise ValueError("rows start before the windows are full")
    xt = np.ascontiguousarray(np.asarray(x, dtype=float).T)
    view = sliding_window_view(xt, lf, axis=1)
    windows = np.swapaxes(view[:, rows - lf + 1], 0, 1)
    if rows.size and rows[0] >= ln - 1:
        # statistics only at the emitted rows; same values as sliding_stats
        stats_src = windows if ln == lf else np.swapaxes(
            sliding_window_view(xt, ln, axis=1)[:, rows - ln + 1], 0, 1)
        m, s = stats_src.mean(axis=-1), stats_src.std(axis=-1)
    else:
        m = np.full((len(rows), xt.shape[0]), np.nan)
        s = m.copy()
    if config.normalization == "SWN":
        ok = s >= DEGENERATE_STD
        scale = np.where(ok, s, 1.0)[..., None]
        windows = np.where(ok[..., None], (windows - m[..., None]) / scale, 0.0)
    return np.ascontiguousarray(windows), s


def features_from_windows(windows: np.ndarray, config: FeatureConfig,
                          fs: float = PROCESS_RATE_HZ) -> np.ndarray:
    """Compute the configured feature on ``(R, C, L)`` windows, giving ``(R, D)``."""
    check_feature_config(config, fs)
    length = windows.shape[-1]
    blocks = [(0, length)] if config.dividing is None else config.dividing.blocks(length)
    parts = []
    for start, stop in blocks:
        sub = windows[..., start:stop]
        profiles = ([None] if config.weighting is WeightingKind.FLAT
                    else weight_vectors(config.weighting, stop - start))
        for w in profiles:
            vals = feat.extract(config.feature, sub, fs, axis=-1, weights=w)  # (R, C, comps)
            parts.append(np.swapaxes(vals, 1, 2).reshape(len(sub), -1))
    return np.concatenate(parts, axis=1)


def feature_stream(sig: MultiChannelSignal, config: FeatureConfig,
                   warmup: int | None = None) -> FeatureMatrix:
    """Normalise, extract and decimate features of a preprocessed 500 Hz signal.

    Parameters
    ----------
    sig : MultiChannelSignal
        Output of :func:`preprocess_emg`.
    config : FeatureConfig
    warmup : int, optional
        First emitted 500 Hz sample index. Defaults to the longer of the
        normalisation and feature windows (feature window only for
        ``None``). Must not be shorter than the windows require.
    """
    fs = sig.sample_rate_hz
    check_feature_config(config, fs)
    need = config.default_warmup(fs)
    warmup = need if warmup is None else int(warmup)
    if warmup < need:
        raise ConfigurationError(f"warm-up {warmup} shorter than the {need}-sample windows")
    rows = row_indices(len(sig), warmup, fs)
    layout = feature_layout(config, sig.channel_count)
    if rows.size == 0:
        return FeatureMatrix(np.zeros((0, len(layout))), layout, source_index=rows,
                             source_rate_hz=fs)
    windows, _ = normalized_windows(sig.data, rows, config, fs)
    values = features_from_windows(windows, config, fs)
    return FeatureMatrix(values, layout, source_index=rows, source_rate_hz=fs)
