import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnball.reference import (
    EULER_GAMMA,
    EmpiricalDistribution,
    PoissonReference,
    clamp01,
    descending_factorial,
    factorial_moment,
    gumbel_cdf,
    ks_distance,
    mean_bound,
    single_exceedance,
    stirling2,
    theorem1_bound,
    theorem3_bound,
    tv_distance,
)


def test_gumbel_values():
    assert gumbel_cdf(0.0) == pytest.approx(math.exp(-1))
    assert gumbel_cdf(np.array([-50.0, 50.0])).tolist() == pytest.approx([0.0, 1.0])
    assert EULER_GAMMA == pytest.approx(0.5772156649015329, abs=1e-16)


def _ks_oracle(values, cdf):
    """Sup over a dense grid of |ECDF - F|, with left limits at the jumps."""
    v = np.sort(values)
    grid = np.concatenate([v, np.linspace(v[0] - 1, v[-1] + 1, 20001)])
    right = np.searchsorted(v, grid, side="right") / len(v)
    left = np.searchsorted(v, grid, side="left") / len(v)
    f = cdf(grid)
    return max(np.max(np.abs(right - f)), np.max(np.abs(left - f)))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=40))
def test_ks_matches_bruteforce_oracle(values):
    values = np.array(values)
    got = ks_distance(EmpiricalDistribution.from_values(values), gumbel_cdf)
    assert got == pytest.approx(_ks_oracle(values, gumbel_cdf), abs=1e-12)


def test_ks_two_quantile_points():
    # F(v) = 1/3, 2/3: the left limit at 1/3 gives 1/3, the right limit at 2/3 gives 1/3
    v = np.array([-math.log(-math.log(1 / 3)), -math.log(-math.log(2 / 3))])
    assert ks_distance(EmpiricalDistribution.from_values(v), gumbel_cdf) == pytest.approx(1 / 3)


def test_ks_single_point_at_median():
    med = -math.log(math.log(2))
    assert ks_distance(EmpiricalDistribution.from_values([med]), gumbel_cdf) == pytest.approx(0.5)


def test_ks_rejects_empty():
    with pytest.raises(ValueError):
        ks_distance(EmpiricalDistribution.from_values([]), gumbel_cdf)


def test_poisson_reference():
    ref = PoissonReference.for_threshold(0.0)
    assert ref.rate == pytest.approx(1.0)
    assert ref.pmf(0) == pytest.approx(math.exp(-1))
    assert ref.pmf(3) == pytest.approx(math.exp(-1) / 6)
    assert ref.truncated_pmf(30).sum() == pytest.approx(1.0, abs=1e-15)
    assert ref.factorial_moment(3) == 1.0
    with pytest.raises(ValueError):
        PoissonReference(0.0)


def test_tv_distance_cases():
    ref = PoissonReference(0.5)
    assert tv_distance(np.zeros(100, dtype=int), ref) == pytest.approx(1 - math.exp(-0.5))
    # exact frequencies on a grid of counts
    probs = ref.truncated_pmf(30)
    weights = np.round(probs[:8] * 1_000_000).astype(int)
    counts = np.repeat(np.arange(8), weights)
    assert tv_distance(counts, ref) < 1e-5
    # a count far in the tail lands in the folded bucket
    assert tv_distance(np.array([1000]), ref) == pytest.approx(1 - probs[-1])


@pytest.mark.parametrize("n", [2, 64, 4096])
def test_fixed_n_tail_bound(n):
    assert theorem1_bound(n, 0.0) == pytest.approx(n ** (1 / n))
    y = 0.5
    assert theorem1_bound(n, y) == pytest.approx(math.exp(-(n - 1) / n * y + math.log(n) / n))
    assert theorem1_bound(n, n - math.log(n) + 1e-9) == 0.0
    with pytest.raises(ValueError):
        theorem1_bound(1, 0.0)


def test_poissonized_bound_and_mean_bound():
    n = 256
    assert theorem3_bound(n, 2.0) == pytest.approx(math.exp(-2) * math.exp((2 + math.log(n)) ** 2 / n))
    assert mean_bound(n) == pytest.approx(n / (n - 1) * n ** (1 / n))
    with pytest.raises(ValueError):
        theorem3_bound(0.0, 1.0)


def test_single_exceedance():
    n = 1024
    assert single_exceedance(n, 0.0) == pytest.approx(n * (1 - math.log(n) / n) ** (n - 1), rel=1e-12)
    assert single_exceedance(4, 10.0) == 0.0
    # tends to exp(-y)
    assert single_exceedance(10 ** 7, 1.0) == pytest.approx(math.exp(-1), rel=1e-4)


def test_clamp():
    assert clamp01(-1) == 0.0 and clamp01(2) == 1.0 and clamp01(0.3) == 0.3


def _partitions(k, j):
    """Count surjections onto j labelled blocks, divided by j!."""
    if k == 0:
        return int(j == 0)
    surj = sum(1 for f in itertools.product(range(j), repeat=k) if len(set(f)) == j)
    return surj // math.factorial(j)


def test_stirling_against_enumeration():
    for k in range(0, 8):
        for j in range(0, k + 1):
            assert stirling2(k, j) == _partitions(k, j)


def test_stirling_bell_number_20():
    assert sum(stirling2(20, j) for j in range(21)) == 51724158235372
    with pytest.raises(ValueError):
        stirling2(21, 3)
    with pytest.raises(ValueError):
        stirling2(3, 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=50), st.integers(1, 6))
def test_raw_moment_identity(counts, k):
    counts = np.array(counts)
    raw = sum(int(c) ** k for c in counts)
    via = sum(stirling2(k, j) * int(descending_factorial(counts, j).sum()) for j in range(1, k + 1))
    assert raw == via


def test_factorial_moment_values():
    c = np.array([0, 1, 2, 3])
    assert descending_factorial(c, 2).tolist() == [0, 0, 2, 6]
    assert factorial_moment(c, 2) == 2.0
    with pytest.raises(ValueError):
        factorial_moment(c, 0)


def test_poisson_factorial_moments_by_simulation():
    rng = np.random.default_rng(0)
    counts = rng.poisson(0.7, 200_000)
    for k in (1, 2, 3):
        assert factorial_moment(counts, k) == pytest.approx(0.7 ** k, rel=0.03)
