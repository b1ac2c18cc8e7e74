"""Nearest-neighbor radii and the ball-probability statistics built on them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import DistributionModel, SampleSet

__all__ = [
    "SampleSet",
    "NNBallStats",
    "ExceedanceCount",
    "nn_radii",
    "nn_ball_stats",
    "exceedance_count",
    "approx_max_stat",
    "unit_ball_volume",
    "poissonized_sample",
    "poissonized_stat",
    "batch_ball_probs",
]

log = logging.getLogger(__name__)

NN_METHODS = ("auto", "brute", "grid", "sort")


@dataclass(frozen=True)
class NNBallStats:
    radii: np.ndarray
    probs: np.ndarray
    max_prob: float
    centered_stat: float
    coincident: int = 0

    @property
    def n(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class ExceedanceCount:
    y: float
    count: int


def _auto_method(dim: int) -> str:
    if dim == 1:
        return "sort"
    if dim == 2:
        return "grid"
    return "brute"


def nn_radii(sample: SampleSet, method: str = "auto") -> np.ndarray:
    """Distance from every point to its nearest other point.

    ``brute`` is the O(n^2) reference; ``grid`` buckets the sample's bounding
    box (d <= 2) and ``sort`` uses adjacency in sorted order (d = 1).  All
    return identical floats.
    """
    if sample.n < 2:
        raise ValueError("nearest-neighbor radii need n >= 2")
    if method not in NN_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {NN_METHODS}")
    if method == "auto":
        method = _auto_method(sample.dim)
    pts = sample.points
    if method == "brute":
        radii = kernels.nn_brute(pts)
    elif method == "grid":
        if sample.dim > 2:
            radii = kernels.nn_brute(pts)
        else:
            radii = kernels.nn_grid(pts)
    else:
        if sample.dim != 1:
            raise ValueError("sort method requires d = 1")
        radii = kernels.nn_sorted_1d(pts[:, 0])
    zeros = int(np.count_nonzero(radii == 0.0))
    if zeros:
        log.warning("%d coincident points (zero nearest-neighbor radius)", zeros)
    return radii


def nn_ball_stats(model: DistributionModel, sample: SampleSet, method: str = "auto") -> NNBallStats:
    if sample.dim != model.dim:
        raise ValueError("sample dimension does not match the model")
    radii = nn_radii(sample, method)
    probs = np.clip(model.ball_prob_array(sample.points, radii), 0.0, 1.0)
    probs = np.where(radii == 0.0, 0.0, probs)
    n = sample.n
    pmax = float(probs.max())
    return NNBallStats(
        radii=radii,
        probs=probs,
        max_prob=pmax,
        centered_stat=n * pmax - math.log(n),
        coincident=int(np.count_nonzero(radii == 0.0)),
    )


def exceedance_count(stats: NNBallStats, y: float) -> ExceedanceCount:
    """Number of points with ``n * mu(S(X_i, R_i)) > y + ln n``.

    Evaluated as ``n * p - ln n > y`` so that the count is zero exactly when
    ``centered_stat <= y`` (rounding is monotone in ``p``).
    """
    n = stats.n
    count = int(np.count_nonzero(n * stats.probs - math.log(n) > y))
    return ExceedanceCount(y=float(y), count=count)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(1.0 + d / 2.0)


def approx_max_stat(model: DistributionModel, sample: SampleSet) -> float:
    """``n * max_i f(X_i) v_d R_i^d - ln n`` with the density evaluated at each point."""
    try:
        f = model.density(sample.points)
    except NotImplementedError:
        raise ValueError(f"model {model.name!r} has no closed-form density") from None
    radii = nn_radii(sample)
    n = sample.n
    d = sample.dim
    return float(n * np.max(f * unit_ball_volume(d) * radii ** d) - math.log(n))


def poissonized_sample(model: DistributionModel, rng: np.random.Generator, n: float) -> SampleSet:
    """Draw ``N ~ Poisson(n)`` and then ``N`` i.i.d. points."""
    if not n > 0:
        raise ValueError("intensity must be positive")
    size = int(rng.poisson(n))
    if size == 0:
        return SampleSet(np.empty((0, model.dim)))
    return SampleSet(model.sample_array(rng, size))


def poissonized_stat(model: DistributionModel, sample: SampleSet, n: float) -> float:
    """``n * max_i mu(S(X_i, R_i)) - ln n`` over a Poisson-size sample.

    A single point has an empty neighbor set, so its radius is infinite and
    its ball carries probability one.  An empty sample returns ``-inf``.
    """
    size = sample.n
    if size == 0:
        return -math.inf
    if size == 1:
        pmax = 1.0
    else:
        pmax = nn_ball_stats(model, sample).max_prob
    return n * pmax - math.log(n)


def batch_ball_probs(model: DistributionModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """NN radii and ball probabilities for a stack of equal-size samples.

    ``X`` has shape ``(T, n, d)``; returns ``(radii, probs)`` of shape ``(T, n)``.
    """
    T, n, d = X.shape
    if d == 1:
        radii = kernels.nn_batch_sorted_1d(X[:, :, 0])
    elif d == 2:
        radii = kernels.nn_batch_grid_2d(X)
    else:
        radii = np.stack([kernels.nn_brute(X[t]) for t in range(T)])
    flat = X.reshape(T * n, d)
    probs = model.ball_prob_array(flat, radii.reshape(-1)).reshape(T, n)
    probs = np.where(radii == 0.0, 0.0, np.clip(probs, 0.0, 1.0))
    return radii, probs
