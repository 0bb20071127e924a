"""Butterworth IIR filters in second-order sections.

Design goes through the analog Butterworth prototype, frequency prewarping
and the bilinear transform, which gives the digital squared magnitude

.. math:: |H(e^{j\\omega})|^2 = \\frac{1}{1 + (\\Omega/\\Omega_c)^{2N}},
          \\qquad \\Omega = 2 f_s \\tan(\\omega / 2)

for the low-pass case (``Omega_c / Omega`` for high-pass). Each biquad is
normalised on its own to unit gain at DC (low-pass) or Nyquist (high-pass),
so the cascade inherits the exact passband gain.

Filtering itself runs through :func:`scipy.signal.sosfilt`, which operates on
the same ``[b0, b1, b2, 1, a1, a2]`` section layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import DesignError

FILTER_KINDS = ("lowpass", "highpass")


@dataclass
class MultiChannelSignal:
    """Time-major samples ``data[time, channel]`` at ``sample_rate_hz``."""

    data: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValueError(f"signal data must be 1-D or 2-D, got shape {data.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        self.data = data
        self.sample_rate_hz = float(self.sample_rate_hz)

    @property
    def channel_count(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass
class SosFilter:
    """Cascade of biquads plus the delay registers used for block streaming.

    ``sections`` has one row ``[b0, b1, b2, 1, a1, a2]`` per biquad. The
    ``state`` array is only touched by :meth:`process`; the functional
    helpers :func:`filter_causal` and :func:`filter_zero_phase` never read
    or modify it.
    """

    sections: np.ndarray
    order: int
    cutoff_hz: float
    sample_rate_hz: float
    kind: str
    state: np.ndarray | None = field(default=None, repr=False)

    @property
    def sos(self) -> np.ndarray:
        return self.sections

    def poles(self) -> np.ndarray:
        out = []
        for b0, b1, b2, a0, a1, a2 in self.sections:
            out.extend(np.roots([a0, a1, a2]) if a2 != 0 else np.roots([a0, a1]))
        return np.asarray(out)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at ``freqs_hz`` (direct evaluation on the unit circle)."""
        z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / self.sample_rate_hz)
        zi = 1.0 / z
        h = np.ones_like(z)
        for b0, b1, b2, a0, a1, a2 in self.sections:
            h *= (b0 + b1 * zi + b2 * zi**2) / (a0 + a1 * zi + a2 * zi**2)
        return h

    def reset(self) -> None:
        self.state = None

    def process(self, block: np.ndarray) -> np.ndarray:
        """Filter one ``(samples, channels)`` block, carrying state to the next call."""
        block = np.asarray(block, dtype=float)
        if block.ndim == 1:
            block = block[:, None]
        if self.state is None or self.state.shape[2] != block.shape[1]:
            self.state = np.zeros((len(self.sections), 2, block.shape[1]))
        out, self.state = sps.sosfilt(self.sections, block, axis=0, zi=self.state)
        return out


def _biquad_gain(b, a, z0: complex) -> float:
    num = np.polyval(b[::-1], 1.0 / z0)
    den = np.polyval(a[::-1], 1.0 / z0)
    return abs(num / den)


def design_butterworth(order: int, cutoff_hz: float, sample_rate_hz: float,
                       kind: str = "lowpass") -> SosFilter:
    """Design a digital Butterworth filter as second-order sections.

    Parameters
    ----------
    order : int
        Filter order, at least 1. The cascade has ``ceil(order / 2)`` sections.
    cutoff_hz : float
        -3 dB frequency in Hz, strictly between 0 and Nyquist.
    sample_rate_hz : float
        Sampling rate in Hz.
    kind : {"lowpass", "highpass"}

    Raises
    ------
    ValueError
        For a non-integer or non-positive order, or an unknown kind.
    DesignError
        When the cutoff is not inside ``(0, sample_rate_hz / 2)``.
    """
    if int(order) != order or order < 1:
        raise ValueError(f"order must be an integer >= 1, got {order}")
    order = int(order)
    if kind not in FILTER_KINDS:
        raise ValueError(f"kind must be one of {FILTER_KINDS}, got {kind!r}")
    if not sample_rate_hz > 0:
        raise ValueError(f"sample_rate_hz must be positive, got {sample_rate_hz}")
    nyquist = sample_rate_hz / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise DesignError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")

    fs2 = 2.0 * sample_rate_hz
    warped = fs2 * math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k = np.arange(1, order + 1)
    prototype = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    analog = warped * prototype if kind == "lowpass" else warped / prototype
    digital = (fs2 + analog) / (fs2 - analog)

    # zeros of the bilinear image sit at z=-1 (lowpass) or z=+1 (highpass)
    zero_sign = 1.0 if kind == "lowpass" else -1.0
    ref_point = 1.0 if kind == "lowpass" else -1.0

    sections = []
    upper = digital[digital.imag > 1e-12]
    for p in sorted(upper, key=lambda c: abs(c)):
        b = np.array([1.0, 2.0 * zero_sign, 1.0])
        a = np.array([1.0, -2.0 * p.real, abs(p) ** 2])
        sections.append((b, a))
    if order % 2:
        real_pole = digital[np.argmin(np.abs(digital.imag))].real
        b = np.array([1.0, zero_sign, 0.0])
        a = np.array([1.0, -real_pole, 0.0])
        sections.append((b, a))

    rows = []
    for b, a in sections:
        b = b / _biquad_gain(b, a, ref_point)
        rows.append(np.concatenate([b, a]))
    sos = np.array(rows)
    if len(sos) != math.ceil(order / 2):
        raise DesignError("pole pairing failed; section count does not match order")
    return SosFilter(sections=sos, order=order, cutoff_hz=float(cutoff_hz),
                     sample_rate_hz=float(sample_rate_hz), kind=kind)


def analytic_magnitude(filt: SosFilter, freqs_hz) -> np.ndarray:
    """Prewarped analog Butterworth magnitude the design is meant to reproduce."""
    f = np.asarray(freqs_hz, dtype=float)
    fs = filt.sample_rate_hz
    omega = np.tan(np.pi * f / fs)
    omega_c = math.tan(math.pi * filt.cutoff_hz / fs)
    with np.errstate(divide="ignore"):
        ratio = omega / omega_c if filt.kind == "lowpass" else omega_c / omega
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * filt.order))


def _check_rate(filt: SosFilter, sig: MultiChannelSignal) -> None:
    if not math.isclose(filt.sample_rate_hz, sig.sample_rate_hz, rel_tol=1e-12):
        raise ValueError(
            f"filter designed for {filt.sample_rate_hz} Hz, signal is {sig.sample_rate_hz} Hz")


def filter_causal(filt: SosFilter, sig: MultiChannelSignal) -> MultiChannelSignal:
    """Causal filtering of every channel from zero initial state."""
    _check_rate(filt, sig)
    if len(sig) == 0:
        raise ValueError("cannot filter an empty signal")
    out = sps.sosfilt(filt.sections, sig.data, axis=0)
    return MultiChannelSignal(out, sig.sample_rate_hz)


def zero_phase_padlen(filt: SosFilter) -> int:
    return 3 * (2 * filt.order)


def filter_zero_phase(filt: SosFilter, sig: MultiChannelSignal) -> MultiChannelSignal:
    """Forward-backward filtering with odd-reflection edge padding.

    The effective magnitude response is ``|H|**2`` with zero phase. Both
    passes start from the steady-state section state scaled by the edge
    sample, so constant inputs come through unchanged.
    """
    _check_rate(filt, sig)
    padlen = zero_phase_padlen(filt)
    if len(sig) <= padlen:
        raise ValueError(
            f"zero-phase filtering needs more than {padlen} samples, got {len(sig)}")
    out = sps.sosfiltfilt(filt.sections, sig.data, axis=0, padtype="odd", padlen=padlen)
    return MultiChannelSignal(out, sig.sample_rate_hz)


def decimate(sig: MultiChannelSignal, factor: int) -> MultiChannelSignal:
    """Keep samples ``0, factor, 2*factor, ...``. No anti-alias filtering."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    return MultiChannelSignal(sig.data[::factor], sig.sample_rate_hz / factor)
