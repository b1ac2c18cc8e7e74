"""Nearest-neighbor-ball probability statistics for i.i.d. samples."""
from ._accel import backend
from .geometry import (
    NNBallStats,
    approx_max_stat,
    exceedance_count,
    nn_ball_stats,
    nn_radii,
    poissonized_sample,
    poissonized_stat,
)
from .model import (
    BallProbResult,
    DistributionModel,
    IsotropicGaussian,
    MirrorPowerCdf1D,
    PowerCdf1D,
    SampleSet,
    Uniform1D,
    UniformSquare2D,
    ball_prob,
    ball_radius,
    cdf_1d,
    pit_samples,
    sample,
)
from .simulate import ExperimentConfig, Thresholds, run_trials

__version__ = "0.1.0"

__all__ = [
    "backend",
    "NNBallStats",
    "approx_max_stat",
    "exceedance_count",
    "nn_ball_stats",
    "nn_radii",
    "poissonized_sample",
    "poissonized_stat",
    "BallProbResult",
    "DistributionModel",
    "IsotropicGaussian",
    "MirrorPowerCdf1D",
    "PowerCdf1D",
    "SampleSet",
    "Uniform1D",
    "UniformSquare2D",
    "ball_prob",
    "ball_radius",
    "cdf_1d",
    "pit_samples",
    "sample",
    "ExperimentConfig",
    "Thresholds",
    "run_trials",
    "__version__",
]
