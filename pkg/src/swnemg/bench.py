"""Per-tick latency of the streaming preprocessing and normalisation path.

Each tick delivers 20 ms of raw 12-channel EMG at 2000 Hz (40 samples).
The tick runs the causal 500 Hz low-pass, keep-first decimation to 500 Hz,
the causal 30 Hz high-pass and a ring-buffer push, then either z-scores the
window (SWN) or hands it on untouched (None). Both variants are fed the same
blocks in alternating order so slow drifts of the machine hit them equally.
MAV on the resulting window is timed separately and is not part of the
per-tick total.
"""
from __future__ import annotations

import os
import time

import numpy as np

from .features import mav
from .normalization import SlidingWindowBuffer, zscore
from .pipeline import PROCESS_RATE_HZ, RAW_RATE_HZ, decimation_factor, preprocessing_filters
from .report import RunReport

TICK_S = 0.020
MIN_TICKS = 100


class StreamingFrontEnd:
    """Stateful preprocessing plus ring buffer for one normalisation mode."""

    def __init__(self, normalization: str, channels: int, norm_len: int):
        self.normalization = normalization
        self.lowpass, self.highpass = preprocessing_filters()
        self.factor = decimation_factor(RAW_RATE_HZ, PROCESS_RATE_HZ)
        self.phase = 0  # raw samples until the next kept one
        self.buffer = SlidingWindowBuffer(norm_len, channels)

    def preprocess(self, block: np.ndarray) -> np.ndarray:
        y = self.lowpass.process(block)
        kept = y[self.phase::self.factor]
        self.phase = (self.phase - len(block)) % self.factor
        return self.highpass.process(kept)

    def normalize(self) -> np.ndarray | None:
        if not self.buffer.ready:
            return None
        window = self.buffer.contents()
        if self.normalization == "SWN":
            return zscore(window, axis=0)[0]
        return window

    def tick(self, block: np.ndarray):
        """Returns ``(window, preprocess_ns, normalize_ns)``."""
        t0 = time.perf_counter_ns()
        self.buffer.push_block(self.preprocess(block))
        t1 = time.perf_counter_ns()
        window = self.normalize()
        t2 = time.perf_counter_ns()
        return window, t1 - t0, t2 - t1


def _stats(ns) -> dict:
    us = np.asarray(ns, dtype=float) / 1e3
    return {"mean_us": float(us.mean()), "p95_us": float(np.percentile(us, 95)),
            "max_us": float(us.max()), "n": int(us.size)}


def _pin_single_cpu() -> None:
    if hasattr(os, "sched_setaffinity"):
        try:
            cpus = sorted(os.sched_getaffinity(0))
            os.sched_setaffinity(0, {cpus[0]})
        except OSError:
            pass


def latency_bench(ticks: int = 1000, channels: int = 12, norm_ms: int = 500, seed: int = 0,
                  warm_ticks: int | None = None, pin: bool = True) -> RunReport:
    """Time ``ticks`` ticks for SWN and None after the window has filled.

    Raises
    ------
    ValueError
        If ``ticks`` is below 100.
    """
    if ticks < MIN_TICKS:
        raise ValueError(f"need at least {MIN_TICKS} ticks, got {ticks}")
    if pin:
        _pin_single_cpu()
    norm_len = int(round(norm_ms * PROCESS_RATE_HZ / 1000.0))
    block_len = int(round(TICK_S * RAW_RATE_HZ))
    if warm_ticks is None:
        warm_ticks = int(np.ceil(norm_len / (block_len / 4))) + 5
    rng = np.random.default_rng(seed)
    front = {m: StreamingFrontEnd(m, channels, norm_len) for m in ("SWN", "None")}
    timings = {m: {"pre": [], "norm": [], "total": [], "feature": []} for m in front}
    for k in range(warm_ticks + ticks):
        block = 1e-4 * rng.standard_normal((block_len, channels))
        order = ("SWN", "None") if k % 2 == 0 else ("None", "SWN")
        for mode in order:
            window, pre, norm = front[mode].tick(block)
            t0 = time.perf_counter_ns()
            if window is not None:
                mav(window, axis=0)
            feat = time.perf_counter_ns() - t0
            if k >= warm_ticks:
                rec = timings[mode]
                rec["pre"].append(pre)
                rec["norm"].append(norm)
                rec["total"].append(pre + norm)
                rec["feature"].append(feat)
    timing = {m: {part: _stats(v) for part, v in rec.items()} for m, rec in timings.items()}
    swn_mean = timing["SWN"]["total"]["mean_us"]
    none_mean = timing["None"]["total"]["mean_us"]
    overhead = swn_mean - none_mean
    summary = {
        "budget_us": TICK_S * 1e6,
        "ticks": ticks,
        "channels": channels,
        "swn_mean_us": swn_mean,
        "none_mean_us": none_mean,
        "swn_overhead_us": overhead,
        "normalization_share": overhead / swn_mean,
        "max_total_us": max(timing[m]["total"]["max_us"] for m in timing),
        "within_budget": bool(all(timing[m]["total"]["max_us"] < TICK_S * 1e6 for m in timing)),
    }
    rows = [{"config": mode, "normalization": mode, "tick": i, "total_us": t / 1e3,
             "preprocess_us": p / 1e3, "normalize_us": n / 1e3}
            for mode, rec in timings.items()
            for i, (t, p, n) in enumerate(zip(rec["total"], rec["pre"], rec["norm"]))]
    return RunReport("bench", rows, summary, timing=timing,
                     provenance={"ticks": ticks, "channels": channels, "norm_ms": norm_ms,
                                 "seed": seed})
