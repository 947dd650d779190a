"""Rank and paired-sample statistics.

Crossover points between exact and approximate p-values:

* Spearman: exact permutation distribution for n <= 10, Student t
  approximation with n - 2 degrees of freedom above.
* Wilcoxon signed-rank: exact null distribution (ties handled through
  doubled mid-ranks) for n <= 25 non-zero differences, normal
  approximation with tie and continuity correction above.
* Shapiro-Wilk: Royston's approximation (Applied Statistics algorithm
  AS R94, 1995) for 3 <= n <= 5000.
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import t as t_dist

from ..errors import (AllZeroDifferencesError, ConstantInputError, LengthError, SampleSizeError,
                      ZeroVarianceError)

SPEARMAN_EXACT_MAX_N = 10
WILCOXON_EXACT_MAX_N = 25
STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


@dataclass
class StatResult:
    test_name: str
    statistic: float
    p_value: float
    n: int
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p_value = float(min(1.0, max(0.0, self.p_value)))


def stars(p):
    """Significance marker on the uncorrected p-value."""
    if p is None or not np.isfinite(p):
        return ""
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


def midranks(x):
    """Ranks 1..n with tied values sharing the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _two_sided_t(t, dof):
    return float(2.0 * t_dist.sf(abs(t), dof))


# ---------------------------------------------------------------- Spearman

@lru_cache(maxsize=None)
def _permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int8)


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(a @ b / math.sqrt((a @ a) * (b @ b)))


def spearman_rho(x, y):
    """Rank correlation and two-sided p-value; returns ``(rho, p)``."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthError("spearman_rho needs two vectors of equal length")
    n = x.size
    if n < 3:
        raise LengthError("spearman_rho needs at least 3 pairs")
    rx, ry = midranks(x), midranks(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise ConstantInputError("rank correlation is undefined for a constant input")
    rho = max(-1.0, min(1.0, _pearson(rx, ry)))
    if n <= SPEARMAN_EXACT_MAX_N:
        cx = rx - rx.mean()
        cy = ry - ry.mean()
        perms = _permutations(n)
        scale = math.sqrt((cx @ cx) * (cy @ cy))
        hits = 0
        for start in range(0, len(perms), 200_000):
            null = (cy[perms[start:start + 200_000]] @ cx) / scale
            hits += int(np.count_nonzero(np.abs(null) >= abs(rho) - 1e-12))
        p = hits / len(perms)
    elif abs(rho) >= 1.0:
        p = 0.0
    else:
        p = _two_sided_t(rho * math.sqrt((n - 2) / (1.0 - rho * rho)), n - 2)
    return rho, p


# ---------------------------------------------------------------- Wilcoxon

def _signed_rank_null_counts(doubled_ranks):
    """Number of sign assignments reaching each doubled positive-rank sum."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[int(r):] = counts[: counts.size - int(r)]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b):
    """Two-sided signed-rank test on paired samples.

    The statistic is W+, the rank sum of the positive differences
    ``a - b``; swapping the samples maps it to n(n+1)/2 - W+.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthError("wilcoxon_signed_rank needs paired samples of equal length")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise AllZeroDifferencesError("every paired difference is zero")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    notes = {"n_zero_dropped": int(a.size - n)}
    if n <= WILCOXON_EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        counts = _signed_rank_null_counts(doubled)
        probs = counts / counts.sum()
        k = int(round(2 * w_plus))
        p = 2.0 * min(probs[: k + 1].sum(), probs[k:].sum())
        notes["method"] = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
        p = 2.0 * (1.0 - ndtr(z))
        notes["method"] = "normal"
        notes["z"] = float(z)
    return StatResult("wilcoxon_signed_rank", w_plus, p, n, notes)


# ---------------------------------------------------------------- Shapiro-Wilk

def _poly(coef, x):
    return sum(c * x**i for i, c in enumerate(coef))


_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def shapiro_wilk_coefficients(n):
    """Weights a_1..a_n (antisymmetric, a_n > 0) for sorted samples."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    i = np.arange(1, n + 1)
    m = ndtri((i - 0.375) / (n + 0.25))
    summ2 = float(m @ m)
    u = 1.0 / math.sqrt(n)
    c_n = m[-1] / math.sqrt(summ2)
    a_n = c_n + _poly(_C1, u)
    a = m.copy()
    if n > 5:
        c_n1 = m[-2] / math.sqrt(summ2)
        a_n1 = c_n1 + _poly(_C2, u)
        phi = (summ2 - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * a_n**2 - 2 * a_n1**2)
        a = m / math.sqrt(phi)
        a[[0, 1, -2, -1]] = (-a_n, -a_n1, a_n1, a_n)
    else:
        phi = (summ2 - 2 * m[-1] ** 2) / (1 - 2 * a_n**2)
        a = m / math.sqrt(phi)
        a[[0, -1]] = (-a_n, a_n)
    return a


def shapiro_wilk(x):
    """W statistic and p-value for the hypothesis that ``x`` is normal."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    if not 3 <= n <= 5000:
        raise SampleSizeError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    ss = float(np.sum((x - x.mean()) ** 2))
    if ss <= 0.0 or np.ptp(x) <= 1e-12 * max(1.0, abs(x).max()):
        raise ConstantInputError("Shapiro-Wilk W is undefined for a constant sample")
    a = shapiro_wilk_coefficients(n)
    w = min(1.0, float((a @ x) ** 2 / ss))

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return StatResult("shapiro_wilk", w, max(p, 0.0), n)
    if n <= 11:
        gamma = _poly(_G, n)
        y = math.log(1.0 - w) if w < 1.0 else -math.inf
        if y >= gamma:
            return StatResult("shapiro_wilk", w, 1e-99, n)
        y = -math.log(gamma - y)
        mu, sigma = _poly(_C3, n), math.exp(_poly(_C4, n))
    else:
        ln_n = math.log(n)
        y = math.log(1.0 - w) if w < 1.0 else -math.inf
        mu, sigma = _poly(_C5, ln_n), math.exp(_poly(_C6, ln_n))
    z = (y - mu) / sigma
    return StatResult("shapiro_wilk", w, float(1.0 - ndtr(z)), n)


# ---------------------------------------------------------------- paired t

def paired_t(a, b):
    """Student's paired t-test, two-sided, n - 1 degrees of freedom."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise LengthError("paired_t needs two paired samples of length >= 2")
    d = a - b
    n = d.size
    if np.all(d == 0):
        return StatResult("paired_t", 0.0, 1.0, n, {"note": "all differences are zero"})
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("paired differences are constant and non-zero")
    t = float(d.mean() / (sd / math.sqrt(n)))
    return StatResult("paired_t", t, _two_sided_t(t, n - 1), n)


# ---------------------------------------------------------------- gate

def compare_paired(a, b, alpha=0.05):
    """Paired t-test when both samples pass Shapiro-Wilk at ``alpha``,
    otherwise the Wilcoxon signed-rank test."""
    normal = {}
    for name, sample in (("a", a), ("b", b)):
        try:
            normal[name] = shapiro_wilk(sample).p_value >= alpha
        except ConstantInputError:
            normal[name] = False
    if all(normal.values()):
        result = paired_t(a, b)
    else:
        result = wilcoxon_signed_rank(a, b)
    result.notes["normality"] = normal
    result.notes["gate"] = "paired_t" if all(normal.values()) else "wilcoxon_signed_rank"
    return result


# ---------------------------------------------------------------- correlation matrix

@dataclass
class CorrelationMatrix:
    rho: np.ndarray  # (n_rows, n_cols), NaN where undefined
    p: np.ndarray
    stars: list  # nested lists of strings
    row_names: tuple
    col_names: tuple
    n: int

    @property
    def undefined(self):
        return np.isnan(self.rho)


def correlation_matrix(row_values, col_values, row_names, col_names):
    """Spearman rho and p for every (row variable, column variable) pair."""
    rv, cv = np.asarray(row_values, dtype=np.float64), np.asarray(col_values, dtype=np.float64)
    if rv.ndim != 2 or cv.ndim != 2 or rv.shape[0] != cv.shape[0]:
        raise LengthError("both inputs must be matrices with one row per clip")
    n = rv.shape[0]
    if n < 3:
        raise LengthError("correlation needs at least 3 clips")
    rho = np.full((rv.shape[1], cv.shape[1]), np.nan)
    p = np.full_like(rho, np.nan)
    for i in range(rv.shape[1]):
        for j in range(cv.shape[1]):
            try:
                rho[i, j], p[i, j] = spearman_rho(rv[:, i], cv[:, j])
            except ConstantInputError:
                pass
    marks = [[stars(p[i, j]) for j in range(p.shape[1])] for i in range(p.shape[0])]
    return CorrelationMatrix(rho, p, marks, tuple(row_names), tuple(col_names), n)
