"""Hypothesis tests used by the model-comparison and validity analyses.

All statistics are computed here from first principles; scipy supplies
only the distribution tail functions (erfc, regularized incomplete beta
and gamma, normal quantiles). Two-sided alternatives throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaincc, ndtri

from .errors import StatsError

# Combined sample size at or below which the Mann-Whitney null
# distribution is fully enumerated (when there are no ties).
EXACT_ENUMERATION_LIMIT = 12


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: tuple
    df: float = None
    p_raw: float = None

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise StatsError(f"non-finite statistic {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0:
            raise StatsError(f"p-value {self.p_value} outside [0, 1]")


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _chi2_sf(x: float, df: float) -> float:
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def friedman(matrix) -> TestResult:
    """Friedman rank test over n blocks x k treatments.

    Tie-corrected chi-square statistic with df = k - 1. A matrix whose
    blocks are all fully tied carries no ranking information and returns
    statistic 0, p = 1.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise StatsError(f"expected a 2-D block matrix, got shape {matrix.shape}")
    n, k = matrix.shape
    if n < 2 or k < 2:
        raise StatsError(f"need >= 2 blocks and >= 2 treatments, got {n} x {k}")
    if not np.all(np.isfinite(matrix)):
        raise StatsError("matrix has missing or non-finite cells")
    ranks = np.vstack([rank_with_ties(row) for row in matrix])
    rank_sums = ranks.sum(axis=0)
    ssbn = float((rank_sums**2).sum())
    uncorrected = 12.0 / (n * k * (k + 1)) * ssbn - 3.0 * n * (k + 1)
    tie_sum = 0.0
    for row in matrix:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float((counts**3 - counts).sum())
    correction = 1.0 - tie_sum / (n * k * (k * k - 1))
    df = k - 1
    if correction <= 0.0:
        return TestResult(
            statistic=0.0, p_value=1.0, method="friedman", n=(n, k), df=df
        )
    statistic = uncorrected / correction
    statistic = max(statistic, 0.0)
    return TestResult(
        statistic=statistic,
        p_value=_chi2_sf(statistic, df),
        method="friedman",
        n=(n, k),
        df=df,
    )


def _mann_whitney_exact_p(pooled_ranks_n: int, n1: int, u_obs: float) -> float:
    """Two-sided p by enumerating all rank assignments (no ties)."""
    at_or_below = 0
    at_or_above = 0
    total = 0
    base = n1 * (n1 + 1) / 2.0
    for combo in itertools.combinations(range(1, pooled_ranks_n + 1), n1):
        u = sum(combo) - base
        total += 1
        if u <= u_obs:
            at_or_below += 1
        if u >= u_obs:
            at_or_above += 1
    p = 2.0 * min(at_or_below, at_or_above) / total
    return min(1.0, p)


def mann_whitney_u(x, y, correction: float = 1.0) -> TestResult:
    """Two-sided Mann-Whitney U with optional Bonferroni factor.

    The reported U is the first sample's. Exact enumeration when the
    pooled size is <= EXACT_ENUMERATION_LIMIT and tie-free; otherwise a
    tie-corrected normal approximation with continuity correction.
    p_value is min(1, p_raw * correction).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise StatsError("both samples must be non-empty")
    if correction < 1.0:
        raise StatsError(f"Bonferroni factor must be >= 1, got {correction}")
    n1, n2 = len(x), len(y)
    pooled = np.concatenate([x, y])
    ranks = rank_with_ties(pooled)
    u1 = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    has_ties = len(np.unique(pooled)) != len(pooled)
    if n1 + n2 <= EXACT_ENUMERATION_LIMIT and not has_ties:
        p = _mann_whitney_exact_p(n1 + n2, n1, u1)
        method = "mann-whitney-exact"
    else:
        n = n1 + n2
        mu = n1 * n2 / 2.0
        _, counts = np.unique(pooled, return_counts=True)
        tie_term = float((counts**3 - counts).sum()) / (n * (n - 1))
        var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
        if var <= 0:
            p = 1.0
        else:
            z = max(0.0, abs(u1 - mu) - 0.5) / math.sqrt(var)
            p = min(1.0, 2.0 * _normal_sf(z))
        method = "mann-whitney-normal"
    return TestResult(
        statistic=u1,
        p_value=min(1.0, p * correction),
        method=method,
        n=(n1, n2),
        p_raw=p,
    )


# Royston (1995) AS R94 polynomial coefficients.
_SW_C1 = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_SW_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_SW_SMALL_MU = (-0.0006714, 0.025054, -0.39978, 0.5440)
_SW_SMALL_SIGMA = (-0.0020322, 0.062767, -0.77857, 1.3822)
_SW_LARGE_MU = (0.0038915, -0.083751, -0.31082, -1.5861)
_SW_LARGE_SIGMA = (0.0030302, -0.082676, -0.4803)


def shapiro_wilk(x) -> TestResult:
    """Shapiro-Wilk normality test (Royston AS R94 approximation).

    Valid for 3 <= n <= 5000 with positive variance. W lies in (0, 1];
    values near 1 are consistent with normality.
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = len(x)
    if n < 3:
        raise StatsError(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > 5000:
        raise StatsError(f"Shapiro-Wilk approximation invalid for n > 5000 ({n})")
    ss = float(((x - x.mean()) ** 2).sum())
    if ss <= 0.0:
        raise StatsError("sample has zero variance")
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ssq_m = float((m**2).sum())
    u = 1.0 / math.sqrt(n)
    a = m / math.sqrt(ssq_m)
    if n > 5:
        a_n = a[-1] + np.polyval(_SW_C1, u)
        a_n1 = a[-2] + np.polyval(_SW_C2, u)
        phi = (ssq_m - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
        )
        a = m / math.sqrt(phi)
        a[-1] = a_n
        a[-2] = a_n1
        a[0] = -a_n
        a[1] = -a_n1
    elif n > 3:
        a_n = a[-1] + np.polyval(_SW_C1, u)
        phi = (ssq_m - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
        a = m / math.sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n
    w = float((a @ x) ** 2) / ss
    w = min(w, 1.0)
    if n == 3:
        p = (
            6.0
            / math.pi
            * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        )
        p = min(1.0, max(0.0, p))
    elif n <= 11:
        gamma = -2.273 + 0.459 * n
        inner = gamma - math.log1p(-w)
        if inner <= 0.0:  # W below the transform's domain: decisive rejection
            p = 0.0
        else:
            transformed = -math.log(inner)
            mu = np.polyval(_SW_SMALL_MU, n)
            sigma = math.exp(np.polyval(_SW_SMALL_SIGMA, n))
            p = _normal_sf((transformed - mu) / sigma)
    else:
        ln_n = math.log(n)
        transformed = math.log1p(-w)
        mu = np.polyval(_SW_LARGE_MU, ln_n)
        sigma = math.exp(np.polyval(_SW_LARGE_SIGMA, ln_n))
        p = _normal_sf((transformed - mu) / sigma)
    return TestResult(statistic=w, p_value=p, method="shapiro-wilk", n=(n,))


def t_test_two_sample(x, y) -> TestResult:
    """Pooled-variance two-sided Student's t with df = n1 + n2 - 2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise StatsError(f"both samples need n >= 2, got {n1} and {n2}")
    df = n1 + n2 - 2
    pooled_var = (
        ((x - x.mean()) ** 2).sum() + ((y - y.mean()) ** 2).sum()
    ) / df
    if pooled_var <= 0.0:
        raise StatsError("pooled variance is zero")
    se = math.sqrt(pooled_var * (1.0 / n1 + 1.0 / n2))
    t = (x.mean() - y.mean()) / se
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TestResult(statistic=t, p_value=p, method="student-t", n=(n1, n2), df=df)


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_exact_2x2(table) -> TestResult:
    """Two-sided Fisher's exact test on a 2x2 count table.

    Sums the hypergeometric probabilities (margins fixed) of every table
    whose point probability does not exceed the observed one, with 1e-7
    relative slack against round-off.
    """
    table = np.asarray(table, dtype=np.int64)
    if table.shape != (2, 2) or table.min() < 0:
        raise StatsError(f"need a non-negative 2x2 table, got {table!r}")
    a, b = int(table[0, 0]), int(table[0, 1])
    c, d = int(table[1, 0]), int(table[1, 1])
    r1, r2 = a + b, c + d
    c1, c2 = a + c, b + d
    n = r1 + r2
    if min(r1, r2, c1, c2) < 1:
        raise StatsError("every margin must be >= 1")
    log_total = _log_binom(n, c1)
    lo = max(0, c1 - r2)
    hi = min(r1, c1)
    log_probs = {
        k: _log_binom(r1, k) + _log_binom(r2, c1 - k) - log_total
        for k in range(lo, hi + 1)
    }
    observed = log_probs[a]
    threshold = observed + math.log1p(1e-7)
    p = sum(math.exp(lp) for lp in log_probs.values() if lp <= threshold)
    p = min(1.0, p)
    odds = (a * d) / (b * c) if b * c > 0 else math.inf
    statistic = odds if math.isfinite(odds) else float(a)
    return TestResult(
        statistic=statistic,
        p_value=p,
        method="fisher-exact",
        n=(r1, r2),
    )


def chi_square_independence(table) -> TestResult:
    """Pearson chi-square for an r x c contingency table (no correction)."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or min(table.shape) < 2:
        raise StatsError(f"need at least a 2x2 table, got shape {table.shape}")
    if table.min() < 0:
        raise StatsError("counts must be non-negative")
    total = table.sum()
    if total <= 0:
        raise StatsError("table is empty")
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    if np.any(expected <= 0):
        raise StatsError("a zero marginal makes an expected count zero")
    statistic = float(((table - expected) ** 2 / expected).sum())
    rows, cols = table.shape
    df = (rows - 1) * (cols - 1)
    return TestResult(
        statistic=statistic,
        p_value=_chi2_sf(statistic, df),
        method="chi-square",
        n=(int(total),),
        df=df,
    )


def bonferroni(p: float, factor: float) -> float:
    if factor < 1:
        raise StatsError(f"Bonferroni factor must be >= 1, got {factor}")
    return min(1.0, p * factor)
