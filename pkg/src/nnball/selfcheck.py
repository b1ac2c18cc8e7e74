"""Kernel self-checks: exact NN agreement, radius inversion and a QMC area oracle."""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import qmc

from . import kernels
from ._accel import backend
from .model import DistributionModel, UniformSquare2D, ball_radii
from .report import VerifierReport
from .simulate import ExperimentConfig, substream_seed

__all__ = ["grid_brute_mismatches", "roundtrip_error", "qmc_disk_errors", "verify_kernels"]

NN_SAMPLES = 100
NN_SIZE = 1000
ROUNDTRIP_POINTS = 2000
ROUNDTRIP_TOL = 1e-9
QMC_LOG2_NODES = 20
QMC_CONFIGS = 200
QMC_TOL = 1e-4


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def grid_brute_mismatches(model: DistributionModel, seed: int, samples: int = NN_SAMPLES,
                          size: int = NN_SIZE) -> int:
    """Number of seeded samples where any fast NN path differs from brute force."""
    bad = 0
    for t in range(samples):
        pts = model.sample_array(_rng(substream_seed(seed, size, t, f"kernels/nn/{model.label}")), size)
        ref = kernels.nn_brute(pts)
        fast = [kernels.nn_grid(pts)] if model.dim <= 2 else []
        if model.dim == 1:
            fast.append(kernels.nn_sorted_1d(pts[:, 0]))
        if any(not np.array_equal(f, ref) for f in fast):
            bad += 1
    return bad


def roundtrip_error(model: DistributionModel, seed: int, points: int = ROUNDTRIP_POINTS) -> float:
    """Worst ``|mu(S(x, r(x, p))) - p|`` over random centers and log-uniform ``p``."""
    rng = _rng(substream_seed(seed, points, 0, f"kernels/roundtrip/{model.label}"))
    x = model.sample_array(rng, points)
    p = 10.0 ** rng.uniform(-6.0, math.log10(0.99), points)
    r = ball_radii(model, x, p)
    return float(np.max(np.abs(model.ball_prob_array(x, r) - p)))


def qmc_disk_errors(seed: int, configs: int = QMC_CONFIGS, log2_nodes: int = QMC_LOG2_NODES) -> np.ndarray:
    """Exact disk-square areas minus scrambled-Sobol estimates."""
    rng = _rng(substream_seed(seed, configs, 0, "kernels/qmc"))
    nodes = qmc.Sobol(2, scramble=True, seed=rng).random_base2(log2_nodes)
    u, v = nodes[:, 0], nodes[:, 1]
    cx, cy = rng.uniform(-0.25, 1.25, (2, configs))
    r = rng.uniform(0.01, 0.8, configs)
    exact = UniformSquare2D().ball_prob_array(np.column_stack([cx, cy]), r)
    est = np.empty(configs)
    for i in range(configs):
        du = u - cx[i]
        dv = v - cy[i]
        est[i] = np.count_nonzero(du * du + dv * dv <= r[i] * r[i]) / len(u)
    return exact - est


def verify_kernels(config: ExperimentConfig, qmc_configs: int = QMC_CONFIGS) -> VerifierReport:
    model = config.model
    rep = VerifierReport("kernels", model.label)
    rep.extra["backend"] = backend()
    bad = grid_brute_mismatches(model, config.seed)
    rep.add(experiment="kernels.grid_vs_brute", n=NN_SAMPLES, y=None, estimate=bad,
            reference=0, stderr=0.0, margin=0.0, passed=bad == 0)
    err = roundtrip_error(model, config.seed)
    rep.add(experiment="kernels.roundtrip", n=ROUNDTRIP_POINTS, y=None, estimate=err,
            reference=0, stderr=0.0, margin=ROUNDTRIP_TOL, passed=err <= ROUNDTRIP_TOL)
    if isinstance(model, UniformSquare2D) and qmc_configs > 0:
        diff = qmc_disk_errors(config.seed, qmc_configs)
        worst = float(np.max(np.abs(diff)))
        rep.add(experiment="kernels.qmc", n=qmc_configs, y=None, estimate=worst,
                reference=0, stderr=0.0, margin=QMC_TOL, passed=worst <= QMC_TOL)
    return rep
