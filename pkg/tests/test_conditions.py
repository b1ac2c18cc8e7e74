import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import ndtr

from nnball import ExperimentConfig, IsotropicGaussian, MirrorPowerCdf1D, PowerCdf1D, Uniform1D, UniformSquare2D
from nnball.conditions import (
    DensityBounds,
    check_convexity_half,
    check_cone_cover,
    check_doubling,
    check_intersection_ratio,
    intersection_measure,
    intersection_ratio,
    remark1_constants,
    verify_conditions,
)
from nnball.model import ball_radius


@pytest.mark.parametrize("f_min, f_max, d, expected", [
    (1.0, 1.0, 1, (0.5, 2.0)),
    (1.0, 1.0, 2, (0.5, 4.0)),
    (1.0, 2.0, 1, (0.75, 4.0)),
])
def test_density_bound_constants(f_min, f_max, d, expected):
    assert remark1_constants(DensityBounds(f_min, f_max, d)) == pytest.approx(expected)


def test_density_bound_constants_reject_zero_floor():
    with pytest.raises(ValueError):
        remark1_constants(DensityBounds(0.0, 1.0, 1))
    with pytest.raises(ValueError):
        DensityBounds(2.0, 1.0, 1)


def _lens_area(r, dist):
    if dist >= 2 * r:
        return 0.0
    return 2 * r * r * math.acos(dist / (2 * r)) - 0.5 * dist * math.sqrt(4 * r * r - dist * dist)


def test_interior_lens_matches_geometry():
    m = UniformSquare2D()
    for dist in (0.0, 0.05, 0.1, 0.15, 0.19):
        x, z = np.array([0.4, 0.5]), np.array([0.4 + dist, 0.5])
        assert intersection_measure(m, x, 0.1, z, 0.1) == pytest.approx(_lens_area(0.1, dist), abs=1e-9)


def _chord_oracle(x, r, z, s, lo, hi, inner):
    """Integrate inner(u, v0, v1) over u with the v-range cut out analytically by both disks."""
    u0, u1 = max(x[0] - r, z[0] - s, lo), min(x[0] + r, z[0] + s, hi)
    if u1 <= u0:
        return 0.0

    def slab(u):
        hx = math.sqrt(max(r * r - (u - x[0]) ** 2, 0.0))
        hz = math.sqrt(max(s * s - (u - z[0]) ** 2, 0.0))
        v0, v1 = max(x[1] - hx, z[1] - hz, lo), min(x[1] + hx, z[1] + hz, hi)
        return inner(u, v0, v1) if v1 > v0 else 0.0

    pts = [c for c in (x[0] - r, x[0] + r, z[0] - s, z[0] + s) if u0 < c < u1]
    val, err = integrate.quad(slab, u0, u1, points=pts or None, epsabs=1e-11, epsrel=1e-10, limit=500)
    return val


def test_lens_near_corner_against_chord_oracle():
    m = UniformSquare2D()
    x, r = np.array([0.0404, 0.9904]), 0.0529
    z, s = np.array([0.0, 0.95]), 0.0572
    ref = _chord_oracle(x, r, z, s, 0.0, 1.0, lambda u, v0, v1: v1 - v0)
    assert intersection_measure(m, x, r, z, s) == pytest.approx(ref, abs=1e-9)


def test_gaussian_lens_against_chord_oracle():
    m = IsotropicGaussian(2, 1.0)
    x, r, z, s = np.array([0.3, -0.2]), 0.6, np.array([0.9, 0.1]), 0.5

    def inner(u, v0, v1):
        return math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) * (ndtr(v1) - ndtr(v0))

    ref = _chord_oracle(x, r, z, s, -math.inf, math.inf, inner)
    assert intersection_measure(m, x, r, z, s) == pytest.approx(ref, abs=1e-7)


def test_1d_overlap_and_disjoint():
    m = Uniform1D()
    assert intersection_measure(m, 0.3, 0.1, 0.45, 0.1) == pytest.approx(0.05)
    assert intersection_measure(m, 0.3, 0.1, 0.6, 0.1) == 0.0
    assert intersection_ratio(m, 0.3, 0.5, 0.1, 0.1) == 0.0  # touching balls


def test_intersection_ratio_uniform1d():
    est = check_intersection_ratio(Uniform1D(), 0.05, 20_000, np.random.default_rng(0))
    assert 0.45 <= est.worst_ratio <= 0.5 + 1e-9
    assert est.passed and est.bound == 0.5
    assert est.details["max_prob_mismatch"] <= 1e-9
    assert est.statement.startswith("no violation found among")
    assert len(est.witnesses) == 10


def test_witnesses_roundtrip():
    m = PowerCdf1D(2.0)
    est = check_intersection_ratio(m, 0.05, 5000, np.random.default_rng(1))
    for x, z, r, s, ratio in est.witnesses:
        assert intersection_ratio(m, x, z, r, s) == pytest.approx(ratio, abs=1e-12)
        assert 0.0 <= ratio <= 1.0


def test_power_law_kink_exceeds_half():
    # F = x^2 is convex only up to the support edge at 1; balls straddling it overlap more
    est = check_intersection_ratio(PowerCdf1D(2.0), 0.05, 5000, np.random.default_rng(1))
    assert est.passed is None  # no positive density floor, so no reference constant
    x, z, r, s, ratio = est.witnesses[0]
    assert ratio > 0.5
    assert max(x + r, z + s) > 1.0


def test_square_corner_overlap_exceeds_half():
    # equal-probability balls near a corner: the support clips z's ball harder than x's
    m = UniformSquare2D()
    p = 0.005
    z = np.array([0.0, 0.95])
    s = ball_radius(m, z, p)
    x = z + np.array([1.0, 1.0]) / math.sqrt(2.0) * s
    r = ball_radius(m, x, p)
    assert np.linalg.norm(x - z) >= max(r, s) - 1e-15
    ratio = intersection_ratio(m, x, z, r, s)
    g = np.linspace(0.0, 0.25, 2001) * 1.0
    u, v = np.meshgrid(g, 0.75 + g)
    both = ((u - x[0]) ** 2 + (v - x[1]) ** 2 <= r * r) & ((u - z[0]) ** 2 + (v - z[1]) ** 2 <= s * s)
    only_z = (u - z[0]) ** 2 + (v - z[1]) ** 2 <= s * s
    assert ratio == pytest.approx(both.sum() / only_z.sum(), abs=2e-3)
    assert ratio > 0.55


def test_square_intersection_probe_reports_violation():
    est = check_intersection_ratio(UniformSquare2D(), 0.05, 200, np.random.default_rng(2))
    assert est.passed is False
    assert est.worst_ratio > 0.5
    assert est.statement.startswith("violation found")


def test_doubling_uniform1d_exact():
    m = Uniform1D()
    for z in (0.5, 0.3, 0.0, 1.0):
        s = 0.01
        assert m.ball_prob_array(z, 2 * s) / m.ball_prob_array(z, s) == pytest.approx(2.0, abs=1e-12)
    est = check_doubling(m, 0.05, 20_000, np.random.default_rng(3))
    assert est.passed and est.worst_ratio <= 2 + 1e-9
    assert est.details["min_ratio"] >= 1.0


def test_doubling_square():
    est = check_doubling(UniformSquare2D(), 0.05, 5000, np.random.default_rng(4))
    assert est.passed and 3.9 <= est.worst_ratio <= 4 + 1e-6


def test_doubling_gaussian_is_exploratory():
    est = check_doubling(IsotropicGaussian(1, 1.0), 0.05, 2000, np.random.default_rng(5))
    assert est.passed is None and est.worst_ratio >= 1.0


def test_convexity_half():
    for m in (PowerCdf1D(3.0), PowerCdf1D(2.0), MirrorPowerCdf1D(2.0), Uniform1D()):
        est = check_convexity_half(m, 0.05, 5000, np.random.default_rng(6))
        assert est.passed, m.label
        assert est.worst_ratio <= 0.5 + 1e-9
    with pytest.raises(ValueError):
        check_convexity_half(IsotropicGaussian(1, 1.0), 0.05, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        check_convexity_half(PowerCdf1D(0.5), 0.05, 10, np.random.default_rng(0))


def test_cone_cover():
    rng = np.random.default_rng(7)
    est = check_cone_cover(Uniform1D(), [0.01, 0.1, 1.0], 20_000, rng)
    assert est.passed and est.bound == 2.0
    by_x1 = {}
    for x1, a, p_hat, se, ok in est.details["estimates"]:
        by_x1.setdefault(x1, []).append(p_hat)
    for seq in by_x1.values():
        assert seq == sorted(seq)  # nondecreasing in a
        assert seq[-1] <= 1.0
    with pytest.raises(ValueError):
        check_cone_cover(Uniform1D(), 0.0, 10, rng)
    with pytest.raises(ValueError):
        check_cone_cover(IsotropicGaussian(3, 1.0), 0.1, 10, rng)
    assert check_cone_cover(IsotropicGaussian(3, 1.0), 0.1, 500, rng, gamma_d=20.0).passed


def test_cone_uniform_center():
    # x1 = 0.5, a = 0.1: points within distance 0.05 of x1, so about 0.1 of the mass
    est = check_cone_cover(Uniform1D(), 0.1, 50_000, np.random.default_rng(8))
    center = [e for e in est.details["estimates"] if e[0] == 0.5]
    assert center and all(e[2] <= 0.2 + 3 * e[3] for e in center)


def test_delta_validation():
    with pytest.raises(ValueError):
        check_intersection_ratio(Uniform1D(), 1.5, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        check_doubling(Uniform1D(), 0.0, 10, np.random.default_rng(0))


def test_verify_conditions_rows():
    c = ExperimentConfig(model=Uniform1D(), n_values=(2,), experiment="conditions",
                         condition_trials=5000, seed=1)
    rep = verify_conditions(c)
    names = [r.experiment for r in rep.rows]
    assert names == ["conditions.int", "conditions.int_lower", "conditions.doubling",
                     "conditions.cone", "conditions.cone", "conditions.convex_half"]
    assert rep.passed
    assert rep.extra["int"]["statement"].startswith("no violation found")
    again = verify_conditions(c)
    assert [r.estimate for r in rep.rows] == [r.estimate for r in again.rows]
    with pytest.raises(ValueError):
        verify_conditions(c, ["bogus"])


def test_verify_conditions_gaussian_exploratory():
    c = ExperimentConfig(model=IsotropicGaussian(1, 1.0), n_values=(2,), experiment="conditions",
                         condition_trials=2000)
    rep = verify_conditions(c, ["int", "doubling"])
    assert all(r.passed is None for r in rep.rows)
    assert rep.notes
