"""Per-window EMG features.

Every extractor reduces the time axis (``axis``, default 0) of its input, so
the same call handles a single channel ``(L,)``, a multichannel window
``(L, C)`` or a stack of windows ``(R, L, C)`` with ``axis=1``.

The optional ``weights`` argument carries a weighting window of length ``L``.
Time-domain features (MAV, MWL, DRMS) multiply the signal by it before
reducing. STFT and SWT first compute their per-time coefficient sequence
and weight that sequence before averaging over time.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

STFT_SEGMENT = 64
STFT_HOP = 32
STFT_BANDS_HZ = {"Low": (1.0, 70.0), "Mid": (60.0, 100.0), "Hig": (100.0, 250.0)}

SWT_LEVEL = 3
_SQRT3 = np.sqrt(3.0)
#: db2 analysis low-pass taps.
DB2_LOW = np.array([1 - _SQRT3, 3 - _SQRT3, 3 + _SQRT3, 1 + _SQRT3]) / (4 * np.sqrt(2.0))
#: db2 analysis high-pass taps (quadrature mirror of the low-pass).
DB2_HIGH = np.array([-DB2_LOW[3], DB2_LOW[2], -DB2_LOW[1], DB2_LOW[0]])


def _time_last(x, axis):
    return np.moveaxis(np.asarray(x, dtype=float), axis, -1)


def _weighted(x, weights):
    if weights is None:
        return x
    w = np.asarray(weights, dtype=float)
    if w.shape != (x.shape[-1],):
        raise ValueError(f"weights of shape {w.shape} do not match window length {x.shape[-1]}")
    return x * w


def mav(window, axis: int = 0, weights=None) -> np.ndarray:
    """Mean absolute value ``(1/L) * sum |x|``."""
    x = _time_last(window, axis)
    if x.shape[-1] == 0:
        raise ValueError("MAV needs a non-empty window")
    return np.abs(_weighted(x, weights)).mean(axis=-1)


def _diffs(window, axis, weights, name):
    x = _time_last(window, axis)
    if x.shape[-1] < 2:
        raise ValueError(f"{name} needs at least 2 samples, got {x.shape[-1]}")
    return np.diff(_weighted(x, weights), axis=-1)


def mwl(window, axis: int = 0, weights=None) -> np.ndarray:
    """Mean waveform length ``(1/(L-1)) * sum |x[i] - x[i-1]|``."""
    return np.abs(_diffs(window, axis, weights, "MWL")).mean(axis=-1)


def drms(window, axis: int = 0, weights=None) -> np.ndarray:
    """Difference RMS ``sqrt((1/(L-1)) * sum (x[i] - x[i-1])**2)``."""
    d = _diffs(window, axis, weights, "DRMS")
    return np.sqrt(np.mean(d * d, axis=-1))


def stft_segments(length: int) -> np.ndarray:
    """Start indices of the 64-sample Hann segments inside a window."""
    if length < STFT_SEGMENT:
        raise ValueError(f"STFT needs at least {STFT_SEGMENT} samples, got {length}")
    return np.arange(0, length - STFT_SEGMENT + 1, STFT_HOP)


def band_masks(fs: float) -> dict[str, np.ndarray]:
    freqs = np.fft.rfftfreq(STFT_SEGMENT, 1.0 / fs)
    return {name: (freqs >= lo) & (freqs <= hi) for name, (lo, hi) in STFT_BANDS_HZ.items()}


def mean_spectrum(window, fs: float, axis: int = 0, weights=None) -> np.ndarray:
    """Time-averaged magnitude spectrogram, frequency on the last axis."""
    x = _time_last(window, axis)
    starts = stft_segments(x.shape[-1])
    segs = sliding_window_view(x, STFT_SEGMENT, axis=-1)[..., starts, :]
    hann = get_window("hann", STFT_SEGMENT)
    spec = np.abs(np.fft.rfft(segs * hann, axis=-1)) / hann.sum()
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (x.shape[-1],):
            raise ValueError(f"weights of shape {w.shape} do not match window length {x.shape[-1]}")
        seg_w = np.array([w[s:s + STFT_SEGMENT].mean() for s in starts])
        spec = spec * seg_w[:, None]
    return spec.mean(axis=-2)


def stft_bands(window, fs: float, axis: int = 0, weights=None) -> np.ndarray:
    """Mean spectrogram magnitude in the Low/Mid/Hig bands.

    Returns the input shape with the time axis removed and a trailing axis
    of length 3 ordered ``(Low, Mid, Hig)``. Band edges are inclusive, so
    bins between 60 and 70 Hz count towards both Low and Mid.
    """
    spec = mean_spectrum(window, fs, axis=axis, weights=weights)
    masks = band_masks(fs)
    return np.stack([spec[..., m].mean(axis=-1) for m in masks.values()], axis=-1)


def _circular(x, taps, dilation):
    # y[n] = sum_k taps[k] * x[(n - k*dilation) mod N]
    out = np.zeros_like(x)
    for k, c in enumerate(taps):
        out += c * np.roll(x, k * dilation, axis=-1)
    return out


def swt_detail(window, level: int = SWT_LEVEL, axis: int = 0) -> np.ndarray:
    """Undecimated (a trous) db2 detail coefficients at ``level``.

    The window is zero-padded at the end to a multiple of ``2**level`` and
    treated as periodic. The returned coefficients span the padded length,
    time on the last axis.
    """
    x = _time_last(window, axis)
    n = x.shape[-1]
    block = 2 ** level
    if n < block:
        raise ValueError(f"SWT level {level} needs at least {block} samples, got {n}")
    padded = -(-n // block) * block
    if padded != n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, padded - n)]
        x = np.pad(x, pad)
    approx = x
    for j in range(level - 1):
        approx = _circular(approx, DB2_LOW, 2 ** j)
    return _circular(approx, DB2_HIGH, 2 ** (level - 1))


def swt_cd3(window, axis: int = 0, weights=None) -> np.ndarray:
    """Mean ``|cD3|`` over the unpadded part of the window."""
    x = _time_last(window, axis)
    n = x.shape[-1]
    detail = np.abs(swt_detail(x, SWT_LEVEL, axis=-1)[..., :n])
    return _weighted(detail, weights).mean(axis=-1)


FEATURES = ("MAV", "MWL", "DRMS", "STFT", "SWT")
TIME_DOMAIN = ("MAV", "MWL", "DRMS")


def components(feature: str) -> tuple[str, ...]:
    if feature == "STFT":
        return tuple(STFT_BANDS_HZ)
    if feature in FEATURES:
        return (feature,)
    raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")


def extract(feature: str, window, fs: float, axis: int = 0, weights=None) -> np.ndarray:
    """Dispatch to one extractor; output always ends in a component axis."""
    if feature == "MAV":
        out = mav(window, axis, weights)
    elif feature == "MWL":
        out = mwl(window, axis, weights)
    elif feature == "DRMS":
        out = drms(window, axis, weights)
    elif feature == "STFT":
        return stft_bands(window, fs, axis, weights)
    elif feature == "SWT":
        out = swt_cd3(window, axis, weights)
    else:
        raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")
    return out[..., None]
