"""Two-sided Wilcoxon rank-sum test.

Exact enumeration of the rank-sum distribution when both samples have at
most 10 values, normal approximation with tie correction (no continuity
correction) otherwise. Ties get fractional (midrank) ranks; all midranks
are multiples of 0.5 and therefore exact in binary floating point, so the
enumeration can compare sums directly.
"""
from __future__ import annotations

import itertools
import math


def _fractional_ranks(values: list) -> list:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def rank_sum_test(a, b) -> float:
    """p-value for the hypothesis that samples a and b share a distribution."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if not a or not b:
        raise ValueError("rank_sum_test: both samples must be non-empty")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    ranks = _fractional_ranks(a + b)
    w = sum(ranks[:n1])

    if max(n1, n2) <= 10:
        total = math.comb(n, n1)
        count_le = count_ge = 0
        for combo in itertools.combinations(range(n), n1):
            s = sum(ranks[i] for i in combo)
            if s <= w:
                count_le += 1
            if s >= w:
                count_ge += 1
        return min(1.0, 2.0 * min(count_le, count_ge) / total)

    tie_term = 0.0
    i = 0
    sorted_ranks = sorted(ranks)
    while i < n:
        j = i
        while j + 1 < n and sorted_ranks[j + 1] == sorted_ranks[i]:
            j += 1
        t = j - i + 1
        tie_term += t ** 3 - t
        i = j + 1
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0  # every pooled value tied
    z = (w - n1 * (n + 1) / 2.0) / math.sqrt(var)
    return min(1.0, 2.0 * _normal_sf(abs(z)))
