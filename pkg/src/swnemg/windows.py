"""Weighting and dividing window functions for feature extraction.

Weighting windows scale the samples of a feature window along time (index
0 is the oldest sample). Seven single shapes are defined, and three paired
kinds (``UpDown*``) apply both members of a rising/falling pair so the
feature components double.

The single shapes are a committed interpretation of profiles that are only
named, not tabulated, in the source method:

=============== ==========================================================
Flat            all ones
UpLinear        ramp 0 -> 1
DownLinear      ramp 1 -> 0
UpLinearCut     zeros on the first half, ramp 0 -> 1 on the second half
DownLinearCut   ramp 1 -> 0 on the first half, zeros on the second half
UpLinearStep    0.5 on the first half, ramp 0.5 -> 1 on the second half
DownLinearStep  ramp 1 -> 0.5 on the first half, 0.5 on the second half
=============== ==========================================================

Each ``Down*`` profile is the time reverse of its ``Up*`` counterpart.

Dividing windows split a feature window into ``N`` blocks, either equal and
contiguous (``ED``) or half-overlapping (``OD``); features are computed per
block and concatenated.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


class WeightingKind(str, enum.Enum):
    FLAT = "Flat"
    UP_LINEAR = "UpLinear"
    DOWN_LINEAR = "DownLinear"
    UP_LINEAR_CUT = "UpLinearCut"
    DOWN_LINEAR_CUT = "DownLinearCut"
    UP_LINEAR_STEP = "UpLinearStep"
    DOWN_LINEAR_STEP = "DownLinearStep"
    UP_DOWN_LINEAR = "UpDownLinear"
    UP_DOWN_LINEAR_CUT = "UpDownLinearCut"
    UP_DOWN_LINEAR_STEP = "UpDownLinearStep"

    @classmethod
    def parse(cls, value) -> "WeightingKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown weighting window {value!r}; expected one of {names}") from None

    @property
    def members(self) -> tuple["WeightingKind", ...]:
        return _PAIRS.get(self, (self,))

    @property
    def is_paired(self) -> bool:
        return self in _PAIRS


_PAIRS = {
    WeightingKind.UP_DOWN_LINEAR: (WeightingKind.UP_LINEAR, WeightingKind.DOWN_LINEAR),
    WeightingKind.UP_DOWN_LINEAR_CUT: (WeightingKind.UP_LINEAR_CUT, WeightingKind.DOWN_LINEAR_CUT),
    WeightingKind.UP_DOWN_LINEAR_STEP: (WeightingKind.UP_LINEAR_STEP, WeightingKind.DOWN_LINEAR_STEP),
}


def _single_profile(kind: WeightingKind, length: int) -> np.ndarray:
    half = length // 2
    if kind is WeightingKind.FLAT:
        return np.ones(length)
    if kind is WeightingKind.UP_LINEAR:
        return np.linspace(0.0, 1.0, length)
    if kind is WeightingKind.UP_LINEAR_CUT:
        return np.concatenate([np.zeros(half), np.linspace(0.0, 1.0, length - half)])
    if kind is WeightingKind.UP_LINEAR_STEP:
        return np.concatenate([np.full(half, 0.5), np.linspace(0.5, 1.0, length - half)])
    rising = {
        WeightingKind.DOWN_LINEAR: WeightingKind.UP_LINEAR,
        WeightingKind.DOWN_LINEAR_CUT: WeightingKind.UP_LINEAR_CUT,
        WeightingKind.DOWN_LINEAR_STEP: WeightingKind.UP_LINEAR_STEP,
    }[kind]
    return _single_profile(rising, length)[::-1].copy()


def weight_vectors(kind, length: int) -> list[np.ndarray]:
    """Weight profile(s) of ``length`` samples; two for paired kinds."""
    kind = WeightingKind.parse(kind)
    if length < 1:
        raise ValueError(f"window length must be positive, got {length}")
    return [_single_profile(k, length) for k in kind.members]


def apply_weighting(window, kind, axis: int = 0) -> list[np.ndarray]:
    """Multiply ``window`` along ``axis`` by each weight profile of ``kind``."""
    x = np.asarray(window, dtype=float)
    if x.shape[axis] == 0:
        raise ValueError("cannot weight an empty window")
    shape = [1] * x.ndim
    shape[axis] = x.shape[axis]
    return [x * w.reshape(shape) for w in weight_vectors(kind, x.shape[axis])]


@dataclass(frozen=True)
class DividingScheme:
    """``kind`` is ``"ED"`` (equal division) or ``"OD"`` (overlap division)."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("ED", "OD"):
            raise ValueError(f"dividing kind must be 'ED' or 'OD', got {self.kind!r}")
        if self.n not in (2, 3, 4):
            raise ValueError(f"number of divisions must be 2, 3 or 4, got {self.n}")

    @classmethod
    def parse(cls, text: str) -> "DividingScheme":
        text = str(text).strip().upper()
        if len(text) != 3 or not text[2].isdigit():
            raise ValueError(f"cannot parse dividing scheme {text!r}; use e.g. 'ED2' or 'OD3'")
        return cls(text[:2], int(text[2]))

    @property
    def name(self) -> str:
        return f"{self.kind}{self.n}"

    def block_length(self, length: int) -> int:
        if self.kind == "ED":
            return length // self.n
        return (2 * length) // (self.n + 1)

    def blocks(self, length: int) -> list[tuple[int, int]]:
        """``(start, stop)`` of every block inside a window of ``length`` samples."""
        dl = self.block_length(length)
        if dl < 2:
            raise ConfigurationError(
                f"{self.name} on {length} samples gives blocks of {dl} samples (need >= 2)")
        hop = dl if self.kind == "ED" else dl // 2
        return [(i * hop, i * hop + dl) for i in range(self.n)]


ALL_DIVIDING = tuple(DividingScheme(k, n) for k in ("ED", "OD") for n in (2, 3, 4))


def apply_dividing(window, scheme: DividingScheme, axis: int = 0) -> list[np.ndarray]:
    x = np.asarray(window, dtype=float)
    index = [slice(None)] * x.ndim
    out = []
    for start, stop in scheme.blocks(x.shape[axis]):
        index[axis] = slice(start, stop)
        out.append(x[tuple(index)])
    return out
