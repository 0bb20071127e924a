"""Sliding-window z-score normalisation (SWN).

At discrete time ``t`` the most recent ``L`` samples are centred on their
own mean and divided by their own population standard deviation::

    swn[t, n - t + L] = (x[n] - m_t) / s_t,    t - L < n <= t

so every emitted window has mean 0 and standard deviation 1. A window whose
standard deviation is below :data:`DEGENERATE_STD` is mapped to zeros.

:class:`SlidingWindowBuffer` is the streaming form (one ring per channel,
stored side by side); :func:`sliding_stats` and :func:`swn_batch` are the
vectorised forms used for offline feature extraction. Both recompute the
statistics over the whole window on every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NotReadyError

DEGENERATE_STD = 1e-12

#: Normalisation window lengths explored by the experiments, in milliseconds.
WINDOW_LENGTHS_MS = (100, 200, 300, 400, 500)


@dataclass
class NormalizedWindow:
    """Window values plus the statistics they were normalised with.

    ``mean`` and ``std`` always describe the raw window, also for the
    passthrough variant where ``values`` are left untouched.
    """

    values: np.ndarray
    mean: np.ndarray | float
    std: np.ndarray | float


def zscore(window, axis: int = 0):
    """Z-score ``window`` along ``axis`` with population statistics.

    Returns ``(values, mean, std)``. Slices with ``std < DEGENERATE_STD``
    come back as zeros.
    """
    x = np.asarray(window, dtype=float)
    m = x.mean(axis=axis, keepdims=True)
    z = x - m
    # same arithmetic as ndarray.std, reusing the centred values
    s = np.sqrt(np.mean(z * z, axis=axis, keepdims=True))
    ok = s >= DEGENERATE_STD
    if ok.all():
        z /= s
    else:
        z = np.where(ok, z / np.where(ok, s, 1.0), 0.0)
    return z, np.squeeze(m, axis=axis), np.squeeze(s, axis=axis)


def swn(window, axis: int = 0) -> np.ndarray:
    return zscore(window, axis=axis)[0]


class SlidingWindowBuffer:
    """Fixed-capacity ring of the last ``capacity`` samples for each channel.

    >>> buf = SlidingWindowBuffer(3)
    >>> for v in (1, 2, 3, 4):
    ...     buf.push_sample(v)
    >>> buf.contents().ravel().tolist()
    [2.0, 3.0, 4.0]
    """

    def __init__(self, capacity: int, channels: int = 1):
        if int(capacity) != capacity or capacity < 1:
            raise ValueError(f"capacity must be a positive integer, got {capacity}")
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        self.capacity = int(capacity)
        self.channels = int(channels)
        self._ring = np.zeros((self.capacity, self.channels))
        self._head = 0  # slot the next sample goes into
        self.fill_count = 0
        self.t = -1  # index of the latest sample; -1 before the first push

    @property
    def ready(self) -> bool:
        return self.fill_count == self.capacity

    def push_sample(self, x) -> None:
        """Append one sample (scalar, or one value per channel), evicting the oldest."""
        self._ring[self._head] = x
        self._head = (self._head + 1) % self.capacity
        if self.fill_count < self.capacity:
            self.fill_count += 1
        self.t += 1

    def push_block(self, block) -> None:
        """Append ``(samples, channels)`` in order; equivalent to repeated pushes."""
        block = np.asarray(block, dtype=float).reshape(-1, self.channels)
        n = len(block)
        if n >= self.capacity:
            self._ring[:] = block[-self.capacity:]
            self._head = 0
        else:
            end = self._head + n
            if end <= self.capacity:
                self._ring[self._head:end] = block
            else:
                split = self.capacity - self._head
                self._ring[self._head:] = block[:split]
                self._ring[:end - self.capacity] = block[split:]
            self._head = end % self.capacity
        self.fill_count = min(self.capacity, self.fill_count + n)
        self.t += n

    def contents(self) -> np.ndarray:
        """Samples currently held, oldest first, shape ``(fill_count, channels)``."""
        if self.fill_count < self.capacity:
            return self._ring[:self.fill_count].copy()
        return np.concatenate([self._ring[self._head:], self._ring[:self._head]])

    def _full_window(self) -> np.ndarray:
        if not self.ready:
            raise NotReadyError(
                f"window holds {self.fill_count} of {self.capacity} samples")
        return self.contents()

    def swn_window(self) -> NormalizedWindow:
        values, m, s = zscore(self._full_window(), axis=0)
        return NormalizedWindow(values, m, s)

    def passthrough_window(self) -> NormalizedWindow:
        raw = self._full_window()
        return NormalizedWindow(raw, raw.mean(axis=0), raw.std(axis=0))


def sliding_stats(x, length: int):
    """Population mean and std of every full window of ``length`` samples.

    ``x`` is ``(time, ...)``; row ``i`` of the outputs describes the window
    ending at sample ``i + length - 1``.
    """
    x = np.asarray(x, dtype=float)
    if length < 1 or length > len(x):
        raise ValueError(f"window length {length} invalid for {len(x)} samples")
    view = sliding_window_view(x, length, axis=0)
    return view.mean(axis=-1), view.std(axis=-1)


def swn_batch(x, length: int) -> np.ndarray:
    """All normalised windows at once, shape ``(time - length + 1, length, ...)``."""
    x = np.asarray(x, dtype=float)
    view = np.moveaxis(sliding_window_view(x, length, axis=0), -1, 1)
    return zscore(view, axis=1)[0]
