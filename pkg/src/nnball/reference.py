"""Reference laws, distances and closed-form bounds used by the verifiers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "EULER_GAMMA",
    "gumbel_cdf",
    "PoissonReference",
    "EmpiricalDistribution",
    "ks_distance",
    "tv_distance",
    "theorem1_bound",
    "theorem3_bound",
    "mean_bound",
    "single_exceedance",
    "stirling2",
    "descending_factorial",
    "factorial_moment",
    "clamp01",
]

EULER_GAMMA = 0.5772156649015329


def gumbel_cdf(y):
    """Standard Gumbel distribution function ``exp(-exp(-y))``."""
    with np.errstate(over="ignore"):
        out = np.exp(-np.exp(-np.asarray(y, dtype=np.float64)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PoissonReference:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Poisson rate must be positive")

    @classmethod
    def for_threshold(cls, y: float) -> "PoissonReference":
        return cls(math.exp(-y))

    def pmf(self, k):
        k = np.asarray(k, dtype=np.float64)
        out = np.exp(k * math.log(self.rate) - self.rate - special.gammaln(k + 1.0))
        return float(out) if np.ndim(out) == 0 else out

    def truncated_pmf(self, top: int = 30) -> np.ndarray:
        """Probabilities of ``0 .. top-1`` followed by the folded tail ``P(Y >= top)``."""
        head = self.pmf(np.arange(top))
        tail = special.pdtrc(top - 1, self.rate)
        return np.append(head, tail)

    def factorial_moment(self, k: int) -> float:
        return self.rate ** k


@dataclass(frozen=True)
class EmpiricalDistribution:
    sorted_values: np.ndarray

    @classmethod
    def from_values(cls, values) -> "EmpiricalDistribution":
        return cls(np.sort(np.asarray(values, dtype=np.float64)))

    @property
    def m(self) -> int:
        return len(self.sorted_values)

    def ecdf(self, x):
        return np.searchsorted(self.sorted_values, x, side="right") / self.m


def ks_distance(emp: EmpiricalDistribution, cdf: Callable) -> float:
    """Sup-norm distance between an ECDF and a reference CDF.

    Both one-sided gaps are taken at every jump point; the lower gap uses the
    reference's left limit, so step references (another ECDF) are handled too.
    """
    m = emp.m
    if m < 1:
        raise ValueError("empty empirical distribution")
    v = emp.sorted_values
    ref = np.asarray(cdf(v), dtype=np.float64)
    ref_left = np.asarray(cdf(np.nextafter(v, -np.inf)), dtype=np.float64)
    i = np.arange(1, m + 1)
    above = np.max(i / m - ref)
    below = np.max(ref_left - (i - 1) / m)
    return float(max(above, below))


def tv_distance(counts: Sequence[int], reference: PoissonReference, top: int = 30) -> float:
    """Total variation between the empirical law of ``counts`` and a Poisson law.

    Counts at or above ``top`` share one bucket with the folded Poisson tail.
    """
    counts = np.asarray(counts, dtype=np.int64)
    emp = np.bincount(np.minimum(counts, top), minlength=top + 1) / len(counts)
    return float(0.5 * np.abs(emp - reference.truncated_pmf(top)).sum())


def theorem1_bound(n: int, y: float) -> float:
    """Universal tail bound for ``P(n P_n - ln n >= y)`` (unclamped)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if y > n - math.log(n):
        return 0.0
    return math.exp(-(n - 1) / n * y + math.log(n) / n)


def theorem3_bound(n: float, y: float) -> float:
    """Tail bound for the Poisson-size sample (unclamped)."""
    if not n > 0:
        raise ValueError("intensity must be positive")
    return math.exp(-y + (y + math.log(n)) ** 2 / n)


def mean_bound(n: int) -> float:
    """Upper bound on ``E[(n P_n - ln n)^+]``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return n / (n - 1) * math.exp(math.log(n) / n)


def single_exceedance(n: int, y: float) -> float:
    """``n * P(n mu(S(X_1, R_1)) >= y + ln n) = n (1 - (y + ln n)/n)^(n-1)``."""
    q = (y + math.log(n)) / n
    if q >= 1.0:
        return 0.0
    if q <= 0.0:
        return float(n)
    return n * math.exp((n - 1) * math.log1p(-q))


def clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


_STIRLING_MAX = 20


def stirling2(k: int, j: int) -> int:
    """Stirling number of the second kind ``S(k, j)`` for ``0 <= j <= k <= 20``."""
    if k > _STIRLING_MAX:
        raise ValueError(f"k must be <= {_STIRLING_MAX}")
    if not 0 <= j <= k:
        raise ValueError("need 0 <= j <= k")
    row = [1]  # S(0, 0)
    for kk in range(1, k + 1):
        nxt = [0] * (kk + 1)
        for jj in range(1, kk + 1):
            left = row[jj] if jj < kk else 0
            nxt[jj] = jj * left + row[jj - 1]
        row = nxt
    return row[j]


def descending_factorial(c, k: int):
    """``c (c - 1) ... (c - k + 1)`` elementwise, as exact integers."""
    c = np.asarray(c, dtype=np.int64)
    out = np.ones_like(c)
    for i in range(k):
        out = out * (c - i)
    return out


def factorial_moment(counts: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(np.mean(descending_factorial(counts, k)))
