"""Wilcoxon rank-sum test with Bonferroni correction and star rendering."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

EXACT_MAX_N = 12
STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


@dataclass
class StatTestResult:
    statistic: float
    p_value: float
    method: str
    corrected_p: float | None = None

    @property
    def significance_stars(self) -> str:
        p = self.p_value if self.corrected_p is None else self.corrected_p
        return stars(p)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "method": self.method,
                "corrected_p": self.corrected_p, "stars": self.significance_stars}


def stars(p: float) -> str:
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return "ns"


def rank_sum_counts(n_a: int, n_total: int) -> np.ndarray:
    """``counts[s]`` = number of ``n_a``-subsets of ranks ``1..n_total`` summing to ``s``."""
    max_sum = sum(range(n_total - n_a + 1, n_total + 1))
    # table[k][s]: subsets of size k with sum s, built one rank at a time
    table = np.zeros((n_a + 1, max_sum + 1), dtype=object)
    table[0, 0] = 1
    for r in range(1, n_total + 1):
        for k in range(min(r, n_a), 0, -1):
            table[k, r:] = table[k, r:] + table[k - 1, :max_sum + 1 - r]
    return table[n_a]


def wilcoxon_rank_sum(a, b) -> StatTestResult:
    """Two-sided Wilcoxon rank-sum test; the statistic is the rank sum of ``a``.

    Uses the exact null distribution when ``len(a) + len(b) <= 12`` and there
    are no ties, otherwise the normal approximation with tie-corrected
    variance and a 0.5 continuity correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    w = float(ranks[:n_a].sum())
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))

    if n <= EXACT_MAX_N and not has_ties:
        counts = rank_sum_counts(n_a, n)
        total = math.comb(n, n_a)
        s = int(round(w))
        lower = sum(counts[:s + 1]) / total
        upper = sum(counts[s:]) / total
        p = min(1.0, 2.0 * min(lower, upper))
        return StatTestResult(w, float(p), "exact")

    mean = n_a * (n + 1) / 2.0
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return StatTestResult(w, 1.0, "normal")
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * float(norm.sf(z)))
    return StatTestResult(w, p, "normal")


def bonferroni(p_values, m: int | None = None) -> list[float]:
    """``min(1, p * m)`` for every p-value; ``m`` defaults to the list length."""
    p_values = [float(p) for p in p_values]
    m = len(p_values) if m is None else m
    if m < 1:
        raise ValueError(f"family size must be >= 1, got {m}")
    if m < len(p_values):
        raise ValueError(f"family size {m} smaller than the {len(p_values)} p-values given")
    return [min(1.0, p * m) for p in p_values]


def compare_groups(groups: dict, pairs, m: int | None = None) -> dict:
    """Rank-sum tests for ``pairs`` of group names, one Bonferroni family.

    Returns ``{(name_a, name_b): StatTestResult}`` with ``corrected_p`` set.
    """
    results = {pair: wilcoxon_rank_sum(groups[pair[0]], groups[pair[1]]) for pair in pairs}
    corrected = bonferroni([r.p_value for r in results.values()], m or len(results))
    for res, cp in zip(results.values(), corrected):
        res.corrected_p = cp
    return results
