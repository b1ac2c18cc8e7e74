"""Numerical probes of the density conditions behind the Gumbel limit.

A probe can refute a condition or fail to find a violation; it never proves
one.  Results are phrased accordingly ("no violation found among N
configurations").

Configurations are drawn by random search plus a deterministic adversarial
grid (centers at and next to the support edges, touching and nested balls),
because random search alone rarely lands on boundary extremes.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .model import (
    DistributionModel,
    IsotropicGaussian,
    MirrorPowerCdf1D,
    PowerCdf1D,
    Uniform1D,
    UniformSquare2D,
    ball_radii,
)
from .report import VerifierReport

__all__ = [
    "DensityBounds",
    "ConditionEstimate",
    "remark1_constants",
    "intersection_measure",
    "intersection_ratio",
    "check_intersection_ratio",
    "check_doubling",
    "check_cone_cover",
    "check_convexity_half",
    "DEFAULT_GAMMA",
    "CONDITION_CHECKS",
    "verify_conditions",
]

# cones of half-angle pi/6 needed to cover R^d: two half-lines in 1-d, six sectors in 2-d
DEFAULT_GAMMA = {1: 2.0, 2: 6.0}
LENS_TOL = 1e-6
N_WITNESSES = 10


@dataclass(frozen=True)
class DensityBounds:
    f_min: float
    f_max: float
    dim: int

    def __post_init__(self):
        if self.f_min > self.f_max:
            raise ValueError("f_min must not exceed f_max")

    @classmethod
    def of(cls, model: DistributionModel) -> Optional["DensityBounds"]:
        b = model.density_bounds
        if b is None:
            return None
        return cls(b[0], b[1], model.dim)


def remark1_constants(bounds: DensityBounds) -> tuple[float, float]:
    """``(beta, c_max)`` implied by density bounds ``0 < f_min <= f_max``."""
    if not bounds.f_min > 0:
        raise ValueError("f_min must be positive for these constants")
    beta = 1.0 - 0.5 * bounds.f_min / bounds.f_max
    c_max = 2.0 ** bounds.dim * bounds.f_max / bounds.f_min
    return beta, c_max


@dataclass
class ConditionEstimate:
    condition: str
    delta: float
    worst_ratio: float
    bound: float
    samples_checked: int
    witnesses: list = field(default_factory=list)
    tolerance: float = 0.0
    attempted: int = 0
    passed: Optional[bool] = None
    details: dict = field(default_factory=dict)

    @property
    def statement(self) -> str:
        if self.passed is False:
            return f"violation found among {self.samples_checked} configurations"
        return f"no violation found among {self.samples_checked} configurations"


class _Worst:
    """Running maximum plus the N_WITNESSES largest entries."""

    def __init__(self):
        self.heap = []
        self.count = 0
        self.best = -math.inf

    def push(self, values, payloads):
        for v, p in zip(values, payloads):
            self.count += 1
            v = float(v)
            self.best = max(self.best, v)
            item = (v, self.count, p)
            if len(self.heap) < N_WITNESSES:
                heapq.heappush(self.heap, item)
            elif v > self.heap[0][0]:
                heapq.heapreplace(self.heap, item)

    def witnesses(self):
        return [p for _, _, p in sorted(self.heap, key=lambda t: (-t[0], t[1]))]


def _as_tuple(v):
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    return float(v[0]) if v.size == 1 else tuple(float(c) for c in v)


def _in_support(model, pts):
    box = model.support_box
    if box is None:
        return np.ones(pts.shape[0], dtype=bool)
    lo, hi = box
    return np.all((pts >= lo) & (pts <= hi), axis=1)


def _log_uniform_p(rng, delta, size):
    return delta * 10.0 ** (-2.0 * rng.random(size))


# ---------------------------------------------------------------------------
# intersection measure
# ---------------------------------------------------------------------------

def _axis_parts(model):
    if isinstance(model, UniformSquare2D):
        return (lambda v: np.clip(v, 0.0, 1.0)), (lambda u: 1.0 if 0.0 <= u <= 1.0 else 0.0), (0.0, 1.0)
    if isinstance(model, IsotropicGaussian) and model.dim == 2:
        sig = model.sigma
        return (
            (lambda v: special.ndtr(np.asarray(v) / sig)),
            (lambda u: math.exp(-0.5 * (u / sig) ** 2) / (sig * math.sqrt(2 * math.pi))),
            (-math.inf, math.inf),
        )
    raise ValueError(f"no lens integrator for model {model.label!r}")


def _lens_2d(model, x, r, z, s):
    """Probability of ``S(x, r) & S(z, s)`` for a 2-d product density, with error estimate."""
    cdf_v, dens_u, (u_lo, u_hi) = _axis_parts(model)
    lo = max(x[0] - r, z[0] - s, u_lo)
    hi = min(x[0] + r, z[0] + s, u_hi)
    if not lo < hi:
        return 0.0, 0.0

    def inner(u):
        hx = math.sqrt(max(r * r - (u - x[0]) ** 2, 0.0))
        hz = math.sqrt(max(s * s - (u - z[0]) ** 2, 0.0))
        a = max(x[1] - hx, z[1] - hz)
        b = min(x[1] + hx, z[1] + hz)
        if not a < b:
            return 0.0
        return dens_u(u) * float(cdf_v(b) - cdf_v(a))

    # kinks: circle-circle crossings and support edges
    pts = []
    dx, dy = z[0] - x[0], z[1] - x[1]
    dd = math.hypot(dx, dy)
    if 0 < dd <= r + s and dd >= abs(r - s):
        a = (r * r - s * s + dd * dd) / (2 * dd)
        h = math.sqrt(max(r * r - a * a, 0.0))
        mx = x[0] + a * dx / dd
        pts += [mx - h * dy / dd, mx + h * dy / dd]
    pts += [x[0], z[0], 0.0, 1.0]
    pts = sorted({p for p in pts if lo < p < hi})
    with warnings.catch_warnings():
        # the returned error estimate is checked by the caller
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(inner, lo, hi, points=pts or None, epsabs=1e-10,
                                  epsrel=1e-10, limit=400)
    return float(val), float(err)


def intersection_measure(model: DistributionModel, x, r, z, s):
    """``mu(S(x, r) & S(z, s))``.  Exact through the CDF in 1-d, quadrature in 2-d."""
    if model.dim == 1:
        x, r, z, s = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, r, z, s)))
        a = np.maximum(x - r, z - s)
        b = np.minimum(x + r, z + s)
        val = np.where(a <= b, model.cdf(b) - model.cdf(a), 0.0)
        return float(val) if np.ndim(val) == 0 else val
    if model.dim == 2:
        val, err = _lens_2d(model, np.asarray(x, float), float(r), np.asarray(z, float), float(s))
        if err > LENS_TOL:
            raise ArithmeticError(f"lens quadrature error {err:.2e} exceeds {LENS_TOL}")
        return val
    raise ValueError("intersection measure supports d <= 2")


def intersection_ratio(model: DistributionModel, x, z, r, s):
    """``mu(S(x, r) & S(z, s)) / mu(S(z, s))``."""
    num = intersection_measure(model, x, r, z, s)
    den = model.ball_prob_array(model.as_points(z), s)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.asarray(num) / np.asarray(den)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# configuration generation
# ---------------------------------------------------------------------------

def _edge_centers(model, rng, k=16):
    box = model.support_box
    d = model.dim
    if box is None:
        return np.vstack([np.zeros((1, d)), model.sample_array(rng, k)])
    lo, hi = box
    span = hi - lo
    fr = np.array([0.0, 1e-9, 1e-4, 1e-3, 0.01, 0.02, 0.05, 0.25, 0.5])
    fr = np.concatenate([fr, 1.0 - fr])
    if d == 1:
        return (lo + fr[:, None] * span).reshape(-1, 1)
    fr = np.array([0.0, 1e-3, 0.05, 0.5, 0.95, 0.999, 1.0])
    g = np.array(np.meshgrid(fr, fr)).reshape(2, -1).T
    return lo + g * span


def _directions(rng, d, size):
    if d == 1:
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)[:, None]
    v = rng.normal(size=(size, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_EPS_1D = (0.0, 1e-12, 1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.3)
_EPS_2D = (0.0, 1e-9, 0.01, 0.1)


def _pair_configs(model, delta, trials, rng):
    """Random and adversarial ``(x, z, p, r, s)`` with equal-probability balls."""
    d = model.dim
    z = model.sample_array(rng, trials)
    p = _log_uniform_p(rng, delta, trials)
    s = ball_radii(model, z, p)
    t = s * (0.5 + 2.0 * rng.random(trials))
    x = z + _directions(rng, d, trials) * t[:, None]

    centers = _edge_centers(model, rng)
    ps = delta * np.array([1.0, 0.3, 0.1, 0.03, 0.01])
    zg = np.repeat(centers, len(ps), axis=0)
    pg = np.tile(ps, len(centers))
    sg = ball_radii(model, zg, pg)
    dirs = [np.ones(d), -np.ones(d)] if d == 1 else [np.array([1.0, 0.0]), np.array([-1.0, 0.0]),
                                                      np.array([0.0, 1.0]), np.array([0.0, -1.0]),
                                                      np.array([1.0, 1.0]) / math.sqrt(2.0)]
    xs, zs, pp = [x], [z], [p]
    for u in dirs:
        # fixed-point for the touching constraint |x - z| = max(r, s)
        tg = sg.copy()
        for _ in range(40):
            xg = zg + u * tg[:, None]
            inside = _in_support(model, xg)
            rg = np.where(inside, ball_radii(model, np.where(inside[:, None], xg, zg), pg), tg)
            tg = np.maximum(rg, sg)
        for eps in (_EPS_1D if d == 1 else _EPS_2D):
            xs.append(zg + u * (tg * (1 + eps))[:, None])
            zs.append(zg)
            pp.append(pg)
        xg = zg + u * tg[:, None]
        inside = _in_support(model, xg)
        rg = np.where(inside, ball_radii(model, np.where(inside[:, None], xg, zg), pg), tg)
        xs.append(zg + u * (rg + sg)[:, None])  # touching balls
        zs.append(zg)
        pp.append(pg)
    x = np.vstack(xs)
    z = np.vstack(zs)
    p = np.concatenate(pp)
    keep = _in_support(model, x)
    x, z, p = x[keep], z[keep], p[keep]
    s = ball_radii(model, z, p)
    r = ball_radii(model, x, p)
    return x, z, p, r, s


def _evaluate_pairs(model, x, z, r, s, valid):
    ratios = np.zeros(len(r))
    idx = np.flatnonzero(valid)
    if model.dim == 1:
        ratios[idx] = intersection_ratio(model, x[idx, 0], z[idx, 0], r[idx], s[idx])
    else:
        for i in idx:
            ratios[i] = intersection_ratio(model, x[i], z[i], r[i], s[i])
    return ratios


def check_intersection_ratio(model: DistributionModel, delta: float, trials: int,
                             rng: np.random.Generator, tol: float = 1e-6) -> ConditionEstimate:
    """Worst overlap ratio of equal-probability small balls with separated centers."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    x, z, p, r, s = _pair_configs(model, delta, trials, rng)
    dist = np.linalg.norm(x - z, axis=1)
    separated = dist >= np.maximum(r, s)
    overlapping = dist <= r + s
    valid = separated & overlapping
    ratios = _evaluate_pairs(model, x, z, r, s, valid)
    worst = _Worst()
    worst.push(ratios[valid], [
        (_as_tuple(x[i]), _as_tuple(z[i]), float(r[i]), float(s[i]), float(ratios[i]))
        for i in np.flatnonzero(valid)
    ])
    bounds = DensityBounds.of(model)
    if bounds is not None and bounds.f_min > 0:
        beta, _ = remark1_constants(bounds)
        passed = worst.best <= beta + tol
    else:
        beta, passed = math.nan, None
    pmax = np.abs(model.ball_prob_array(x[valid], r[valid]) - model.ball_prob_array(z[valid], s[valid]))
    return ConditionEstimate(
        condition="INT", delta=delta, worst_ratio=max(worst.best, 0.0), bound=beta,
        samples_checked=int(valid.sum()), witnesses=worst.witnesses(), tolerance=tol,
        attempted=len(r), passed=passed,
        details={"disjoint_skipped": int((separated & ~overlapping).sum()),
                 "max_prob_mismatch": float(pmax.max()) if pmax.size else 0.0},
    )


def check_doubling(model: DistributionModel, delta: float, trials: int,
                   rng: np.random.Generator, tol: float = 1e-9) -> ConditionEstimate:
    """Worst ``mu(S(z, 2s)) / mu(S(z, s))`` over small balls."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    z = model.sample_array(rng, trials)
    p = _log_uniform_p(rng, delta, trials)
    centers = _edge_centers(model, rng)
    ps = delta * np.array([1.0, 0.3, 0.1, 0.03, 0.01])
    z = np.vstack([z, np.repeat(centers, len(ps), axis=0)])
    p = np.concatenate([p, np.tile(ps, len(centers))])
    s = ball_radii(model, z, p)
    small = model.ball_prob_array(z, s)
    big = model.ball_prob_array(z, 2.0 * s)
    ratios = big / small
    worst = _Worst()
    worst.push(ratios, [(_as_tuple(z[i]), float(s[i]), float(ratios[i])) for i in range(len(s))])
    bounds = DensityBounds.of(model)
    if bounds is not None and bounds.f_min > 0:
        _, c_max = remark1_constants(bounds)
        passed = worst.best <= c_max + tol
    else:
        c_max, passed = math.nan, None
    return ConditionEstimate(
        condition="DOUBLING", delta=delta, worst_ratio=worst.best, bound=c_max,
        samples_checked=len(s), witnesses=worst.witnesses(), tolerance=tol,
        attempted=len(s), passed=passed, details={"min_ratio": float(ratios.min())},
    )


def check_cone_cover(model: DistributionModel, a, trials: int, rng: np.random.Generator,
                     gamma_d: Optional[float] = None, centers: int = 8) -> ConditionEstimate:
    """Monte Carlo estimate of ``mu{x2 : mu(S(x2, |x2 - x1|)) <= a}`` against ``gamma_d * a``.

    ``a`` may be a scalar or a sequence; one estimate per ``(x1, a)`` pair.
    The same ``x2`` draws serve every ``a``, so estimates are nondecreasing in ``a``.
    """
    a_values = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if np.any((a_values <= 0) | (a_values > 1)):
        raise ValueError("a must lie in (0, 1]")
    if gamma_d is None:
        if model.dim not in DEFAULT_GAMMA:
            raise ValueError(f"no default cone-covering constant for d={model.dim}; pass gamma_d")
        gamma_d = DEFAULT_GAMMA[model.dim]
    edges = _edge_centers(model, rng)
    x1s = np.vstack([edges[:: max(1, len(edges) // centers)], model.sample_array(rng, centers)])
    x2 = model.sample_array(rng, trials)
    rows = []
    worst = _Worst()
    all_pass = True
    for x1 in x1s:
        dist = np.linalg.norm(x2 - x1, axis=1)
        h = model.ball_prob_array(x2, dist)
        for av in a_values:
            est = float(np.mean(h <= av))
            se = math.sqrt(est * (1 - est) / trials)
            ok = est <= gamma_d * av + 3 * se
            all_pass &= ok
            rows.append((_as_tuple(x1), float(av), est, se, ok))
            worst.push([est / av], [(_as_tuple(x1), float(av), est, se)])
    return ConditionEstimate(
        condition="CONE", delta=float(a_values.max()), worst_ratio=worst.best, bound=float(gamma_d),
        samples_checked=len(rows), witnesses=worst.witnesses(), tolerance=math.nan,
        attempted=len(rows) * trials, passed=bool(all_pass), details={"estimates": rows},
    )


def _convexity_regions(model):
    """Intervals on which F is convex or concave, or raise if there is none."""
    if isinstance(model, Uniform1D):
        return [(-math.inf, model.b), (model.a, math.inf)]
    if isinstance(model, PowerCdf1D) and model.theta >= 1:
        return [(-math.inf, 1.0)]
    if isinstance(model, MirrorPowerCdf1D) and model.theta >= 1:
        return [(0.0, math.inf)]
    raise ValueError(f"{model.label}: distribution function is neither convex nor concave")


def check_convexity_half(model: DistributionModel, delta: float, trials: int,
                         rng: np.random.Generator, tol: float = 1e-9) -> ConditionEstimate:
    """Overlap ratio of equal-probability intervals where F is convex or concave.

    Only configurations with ``max(r, s) <= |x - z| <= r + s`` whose union of
    intervals lies in one convexity region are checked; the ratio there is at
    most one half.
    """
    regions = _convexity_regions(model)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    x, z, p, r, s = _pair_configs(model, delta, trials, rng)
    xv, zv = x[:, 0], z[:, 0]
    dist = np.abs(xv - zv)
    valid = (dist >= np.maximum(r, s)) & (dist <= r + s)
    lo = np.minimum(xv - r, zv - s)
    hi = np.maximum(xv + r, zv + s)
    in_region = np.zeros(len(r), dtype=bool)
    for a, b in regions:
        in_region |= (lo >= a) & (hi <= b)
    valid &= in_region
    ratios = _evaluate_pairs(model, x, z, r, s, valid)
    worst = _Worst()
    worst.push(ratios[valid], [
        (float(xv[i]), float(zv[i]), float(r[i]), float(s[i]), float(ratios[i]))
        for i in np.flatnonzero(valid)
    ])
    best = max(worst.best, 0.0)
    return ConditionEstimate(
        condition="CONVEX_HALF", delta=delta, worst_ratio=best, bound=0.5,
        samples_checked=int(valid.sum()), witnesses=worst.witnesses(), tolerance=tol,
        attempted=len(r), passed=best <= 0.5 + tol,
        details={"outside_region": int((~in_region).sum())},
    )


# ---------------------------------------------------------------------------
# verifier
# ---------------------------------------------------------------------------

CONDITION_CHECKS = ("int", "doubling", "cone", "convex_half")


def _check_rng(config, name: str) -> np.random.Generator:
    from .simulate import substream_seed

    seed = substream_seed(config.seed, config.condition_trials, 0, f"conditions/{name}/{config.model.label}")
    return np.random.Generator(np.random.PCG64(seed))


def verify_conditions(config, checks: Optional[Sequence[str]] = None) -> VerifierReport:
    """Run the condition probes for ``config.model`` and collect them as report rows.

    ``checks`` defaults to every probe that applies to the model.  Rows whose
    reference constant is undefined (no positive lower density bound) are
    reported but not asserted.
    """
    model = config.model
    rep = VerifierReport("conditions", model.label)
    if checks is None:
        checks = ["int", "doubling", "cone"]
        try:
            _convexity_regions(model)
            checks.append("convex_half")
        except ValueError:
            pass
    unknown = set(checks) - set(CONDITION_CHECKS)
    if unknown:
        raise ValueError(f"unknown condition checks: {sorted(unknown)}")
    m = config.condition_trials
    delta = config.delta
    bounds = DensityBounds.of(model)
    if bounds is None or not bounds.f_min > 0:
        rep.notes.append(f"{model.label}: no positive lower density bound; probes are exploratory")

    def add(name, est: ConditionEstimate, margin):
        rep.add(experiment=f"conditions.{name}", n=est.samples_checked, y=delta,
                estimate=est.worst_ratio, reference=est.bound, stderr=0.0, margin=margin,
                passed=est.passed)
        rep.extra[name] = {"statement": est.statement, "witnesses": est.witnesses[:3],
                           "attempted": est.attempted}

    for name in checks:
        rng = _check_rng(config, name)
        if name == "int":
            est = check_intersection_ratio(model, delta, m, rng)
            add("int", est, est.tolerance)
            if isinstance(model, Uniform1D):
                low = config.thresholds.int_lower
                rep.add(experiment="conditions.int_lower", n=est.samples_checked, y=delta,
                        estimate=est.worst_ratio, reference=low, stderr=0.0, margin=0.0,
                        passed=est.worst_ratio >= low)
        elif name == "doubling":
            est = check_doubling(model, delta, m, rng)
            add("doubling", est, est.tolerance)
        elif name == "convex_half":
            est = check_convexity_half(model, delta, m, rng)
            add("convex_half", est, est.tolerance)
        else:
            gamma = config.gamma_d
            if gamma is None and model.dim not in DEFAULT_GAMMA:
                rep.notes.append(f"cone probe skipped: no covering constant for d={model.dim}")
                continue
            est = check_cone_cover(model, config.cone_a, m, rng, gamma_d=gamma)
            for a in config.cone_a:
                rows = [r for r in est.details["estimates"] if r[1] == a]
                x1, _, p_hat, se, _ = max(rows, key=lambda r: r[2] - est.bound * a - 3 * r[3])
                rep.add(experiment="conditions.cone", n=m, y=a, estimate=p_hat,
                        reference=est.bound * a, stderr=se, margin=3 * se,
                        passed=all(r[4] for r in rows))
            rep.extra["cone"] = {"statement": est.statement, "gamma_d": est.bound}
    return rep
