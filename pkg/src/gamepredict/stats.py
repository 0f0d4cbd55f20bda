"""Exact statistics: Pearson r, one-sided binomial and Wilcoxon tests, bootstrap CIs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

# Up to this many nonzero differences the Wilcoxon null distribution is computed exactly.
WILCOXON_EXACT_MAX_N = 25


@dataclass(frozen=True)
class CorrelationResult:
    r: float | None
    n: int

    @property
    def defined(self) -> bool:
        return self.r is not None


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    direction: str  # "base" or "aligned"
    n_effective: int

    __test__ = False  # not a pytest class


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation; ``r`` is None when n < 2 or either input is constant."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    n = xa.size
    if n < 2 or not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        return CorrelationResult(None, n)
    if xa.min() == xa.max() or ya.min() == ya.max():
        return CorrelationResult(None, n)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return CorrelationResult(None, n)
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return CorrelationResult(min(1.0, max(-1.0, r)), n)


def binomial_one_sided(k_majority: int, n: int, direction: str = "base") -> TestResult:
    """P(X >= k) for X ~ Binomial(n, 1/2), computed with exact integer arithmetic.

    ``k_majority`` must be the larger side's count; ``direction`` names that side.
    """
    if n < 0 or not 0 <= k_majority <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k_majority}, n={n}")
    if k_majority < n - k_majority:
        raise ValueError(f"k={k_majority} is the minority of n={n}; pass the majority count")
    tail = sum(math.comb(n, j) for j in range(k_majority, n + 1))
    p = float(Fraction(tail, 2**n))
    return TestResult(statistic=float(k_majority), p_value=p, direction=direction, n_effective=n)


def binomial_for_wins(wins_base: int, wins_aligned: int) -> TestResult | None:
    """Binomial test in the direction of whichever side won more. None when nothing was compared.

    An even split is reported in the base direction.
    """
    n = wins_base + wins_aligned
    if n == 0:
        return None
    if wins_base >= wins_aligned:
        return binomial_one_sided(wins_base, n, "base")
    return binomial_one_sided(wins_aligned, n, "aligned")


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _signed_rank_upper_tail(doubled_ranks: Sequence[int], threshold: int) -> Fraction:
    """P(sum of randomly signed ranks >= threshold) under fair sign flips.

    Ranks are doubled so midranks stay integral; the count polynomial is built by
    dynamic programming, which is exact and equals full 2^n enumeration.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        reach += r
        for s in range(reach, r - 1, -1):
            counts[s] += counts[s - r]
    hits = sum(counts[max(threshold, 0):])
    return Fraction(hits, 2 ** len(doubled_ranks))


def wilcoxon_signed_rank_one_sided(diffs: Sequence[float]) -> TestResult:
    """One-sided signed-rank test on (base_r - aligned_r) differences.

    The direction is whichever sign carries the larger rank sum (positive -> "base"),
    and the p-value is the upper tail of that side's rank sum. Zeros are dropped and
    tied magnitudes get midranks. Exact for n <= 25, normal approximation with tie and
    continuity corrections above.
    """
    d = np.asarray(diffs, dtype=float)
    if d.size == 0:
        raise ValueError("wilcoxon needs at least one difference")
    d = d[d != 0.0]
    n = int(d.size)
    if n == 0:
        return TestResult(statistic=0.0, p_value=1.0, direction="base", n_effective=0)
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    direction = "base" if w_plus >= w_minus else "aligned"
    w = max(w_plus, w_minus)

    if n <= WILCOXON_EXACT_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        p = float(_signed_rank_upper_tail(doubled, int(round(2 * w))))
    else:
        p = _wilcoxon_normal_tail(ranks, w)
    return TestResult(statistic=w, p_value=min(1.0, p), direction=direction, n_effective=n)


def _wilcoxon_normal_tail(ranks: np.ndarray, w: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w - mean - 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def bootstrap_median_ci(
    values: Sequence[float],
    resamples: int = 5000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the median.

    Resampling uses numpy's Philox counter-based generator so intervals are stable
    across platforms for a given seed.
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("bootstrap needs a nonempty vector")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    rng = np.random.Generator(np.random.Philox(seed))
    medians = np.empty(resamples, dtype=float)
    chunk = 1000
    for start in range(0, resamples, chunk):
        stop = min(start + chunk, resamples)
        idx = rng.integers(0, data.size, size=(stop - start, data.size))
        medians[start:stop] = np.median(data[idx], axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(medians, [alpha, 1.0 - alpha])
    # clamp quantile interpolation noise to the observed range
    lo = float(min(max(lo, data.min()), data.max()))
    hi = float(min(max(hi, data.min()), data.max()))
    return lo, hi
