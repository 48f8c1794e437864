import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasidecay.decay import (
    ProbePlan, counterexample_search, cover_sublevel, decay_profile, default_quasi_delta, federer_ratio,
    fit_decay, local_dimension, mean_local_dimension, quasi_federer_check, simplex_cover_sum,
    support_probes, worst_hyperplane,
)
from quasidecay.exact import Surd
from quasidecay.geometry import EUCLIDEAN, Ball, Point
from quasidecay.measures import (
    CounterexampleSpec, PointMass, cantor_measure, lebesgue_cube, product_oracle, pushforward_oracle,
)
from quasidecay.poly import Polynomial

CANTOR_DIM = math.log(2) / math.log(3)
THIRDS = [3.0 ** -k for k in range(2, 12)]


def _shifted(value):
    return Polynomial.variable(1, 0) + Polynomial.constant(1, F(value))


def test_local_dimension_lebesgue_square():
    est = local_dimension(lebesgue_cube(2), (0.5, 0.5), [2.0 ** -k for k in range(2, 10)])
    assert abs(est.slope - 2) <= 0.05
    assert est.interval[0] <= est.slope <= est.interval[1]


def test_local_dimension_cantor():
    mean, slopes = mean_local_dimension(cantor_measure(), THIRDS, n_points=16, seed=5)
    assert abs(mean - CANTOR_DIM) <= 0.02


def test_local_dimension_cantor_square():
    mu = product_oracle(cantor_measure(), cantor_measure())
    mean, _ = mean_local_dimension(mu, [3.0 ** -k for k in range(2, 9)], n_points=8, seed=5)
    assert abs(mean - 2 * CANTOR_DIM) <= 0.03


def test_local_dimension_drops_empty_scales():
    # 0.35 sits 1/60 from the nearest Cantor point, so the four smallest balls are empty
    est = local_dimension(cantor_measure(), (0.35,), [3.0 ** -k for k in range(2, 8)] + [0.9])
    assert len(est.dropped) == 4
    assert est.dropped and len(est.rhos) + len(est.dropped) == 7


def test_local_dimension_needs_four_scales():
    with pytest.raises(ValueError):
        local_dimension(lebesgue_cube(1), (0.5,), [0.1, 0.01, 0.001])


def test_federer_examples():
    assert abs(federer_ratio(lebesgue_cube(1), 2, [((0.5,), 0.1), ((0.3,), 0.01)]).worst - 2) <= 0.01
    assert abs(federer_ratio(lebesgue_cube(3), 2, [((0.5, 0.5, 0.5), 0.1), ((0.4, 0.6, 0.5), 0.05)]).worst - 8) <= 0.1
    probes = support_probes(cantor_measure(), 12, THIRDS, seed=2)
    res = federer_ratio(cantor_measure(), 3, probes)
    assert res.worst <= 2 + 1e-9
    with pytest.raises(ValueError):
        federer_ratio(lebesgue_cube(1), 1, probes)


def test_quasi_federer_examples():
    probes = [((x,), 10.0 ** -k) for x in (0.5, 0.37) for k in range(1, 7)]
    res = quasi_federer_check(lebesgue_cube(1), 0.1, probes)
    assert res.holds and res.c2_hat <= 1 + 1e-6
    cantor = cantor_measure()
    res = quasi_federer_check(cantor, 0.5, support_probes(cantor, 8, [3.0 ** -k for k in range(2, 13)], seed=1))
    assert res.holds
    # a probe at rho = 1 compares a ball with itself
    assert math.isclose(quasi_federer_check(lebesgue_cube(1), 0.1, [((0.5,), 1.0)]).c2_hat, 1.0)
    assert math.isclose(default_quasi_delta(0.1, 1), 0.1 / (2 * math.log2(6)))


def test_worst_hyperplane_finds_the_tangent():
    u = _shifted(F(-1, 2))
    curve = pushforward_oracle(lebesgue_cube(1), [u, u * u])
    wit = worst_hyperplane(curve, Ball(Point.of(0.0, 0.0), 0.05, EUCLIDEAN), 0.01, np.random.default_rng(1))
    n = np.array(wit.plane.normal, float)
    assert math.acos(abs(n[1]) / np.linalg.norm(n)) <= 0.1


@pytest.mark.parametrize("beta", [0.1, 0.01])
def test_worst_hyperplane_lebesgue_ratio(beta):
    ball = Ball(Point.of(0.5, 0.5), 0.2, EUCLIDEAN)
    wit = worst_hyperplane(lebesgue_cube(2), ball, beta, np.random.default_rng(2))
    assert float(wit.slab.hi) / (math.pi * 0.04) <= 3 * beta


def test_worst_hyperplane_flat_support():
    line = pushforward_oracle(lebesgue_cube(1), [Polynomial.constant(1, 0), Polynomial.variable(1, 0)])
    wit = worst_hyperplane(line, Ball(Point.of(0.0, 0.5), 0.2, EUCLIDEAN), 0.01, np.random.default_rng(3))
    n = np.array(wit.plane.normal, float)
    assert abs(n[0]) / np.linalg.norm(n) > 0.999 and abs(float(wit.plane.offset)) < 1e-9
    assert wit.sample_fraction == 1.0


def test_fit_decay_synthetic():
    betas = [3.0 ** -k for k in range(1, 9)]
    alpha, c1, r2 = fit_decay([(b, b) for b in betas])
    assert abs(alpha - 1) <= 1e-4 and abs(c1 - 1) <= 1e-9 and r2 > 0.9999
    alpha, c1, _ = fit_decay([(b, 5 * b ** 0.5) for b in betas] + [(b, b) for b in betas])
    assert abs(alpha - 0.5) <= 1e-9 and abs(c1 - 5) <= 1e-9


def test_decay_profile_lebesgue_absolute():
    plan = ProbePlan(n_centers=2, rho_grid=(1 / 3,), beta_grid=(1 / 9, 1 / 27, 1 / 81))
    fit = decay_profile(lebesgue_cube(2), mode="absolute", plan=plan)
    assert abs(fit.alpha_hat - 1) <= 0.1
    assert all(0 <= r <= 1 for _, r in fit.probes)


def test_decay_profile_quasi_respects_beta_cap():
    plan = ProbePlan(n_centers=2, rho_grid=(1 / 3, 1 / 9), beta_grid=(1 / 3, 1 / 9, 1 / 27))
    fit = decay_profile(lebesgue_cube(2), mode="quasi", gamma=1.5, plan=plan)
    assert all(p["beta"] <= p["rho"] ** 1.5 + 1e-12 for p in fit.log)
    assert fit.log and "not a certificate" in fit.verdict


def test_decay_profile_segment_does_not_decay():
    segment = pushforward_oracle(lebesgue_cube(1), [Polynomial.variable(1, 0), Polynomial.constant(1, 0)])
    plan = ProbePlan(n_centers=3, rho_grid=(0.1,), beta_grid=(1 / 3, 1 / 9, 1 / 27, 1 / 81))
    fit = decay_profile(segment, mode="absolute", plan=plan)
    assert all(r >= 0.95 for _, r in fit.probes)
    assert abs(fit.alpha_hat) <= 0.05


def test_decay_profile_rejects_bad_modes():
    with pytest.raises(ValueError):
        decay_profile(lebesgue_cube(1), mode="strong")
    with pytest.raises(ValueError):
        decay_profile(lebesgue_cube(1), mode="quasi", gamma=0)


def test_cover_sublevel_linear_is_exact():
    cov = cover_sublevel(Polynomial.variable(1, 0), 1, beta=F(1, 1000))
    pieces = [p for c in cov.collections for p in c]
    assert len(pieces) == 1
    piece = pieces[0]
    assert piece.thickness == F(1, 1000) and piece.plane.offset == 0
    assert cov.verified and cov.z_points > 0


def test_cover_sublevel_product():
    xy = Polynomial.variable(2, 0) * Polynomial.variable(2, 1)
    cov = cover_sublevel(xy, 2, beta=F(1, 10 ** 4))
    assert cov.verified and not cov.uncovered
    centres = np.array([p.centre for c in cov.collections for p in c], float)
    # pieces hug the coordinate axes
    assert np.all(np.min(np.abs(centres), axis=1) <= 0.05)


def test_cover_sublevel_constant_is_empty():
    cov = cover_sublevel(Polynomial.constant(2, 1), 0, beta=F(1, 3))
    assert cov.z_points == 0 and all(not c for c in cov.collections)
    with pytest.raises(ValueError):
        cover_sublevel(Polynomial.variable(1, 0) * Polynomial.variable(1, 0), 1)


def test_simplex_sum_terms_fit_in_balls():
    for n in (2, 3, 4):
        s = simplex_cover_sum(lebesgue_cube(1), 1.0, 2, n, seed=1)
        assert s.containment_ok and s.total <= s.ball_total
    with pytest.raises(ValueError):
        simplex_cover_sum(lebesgue_cube(1), 1.0, 1, 1)


def test_simplex_sum_lebesgue_geometric_rate():
    # beyond n = 5 the sampled net no longer covers [0,1], so each sum is normalised by its ball total
    ns = list(range(2, 9))
    sums = [simplex_cover_sum(lebesgue_cube(1), 1.0, 2, n, seed=1) for n in ns]
    logs = [math.log(s.total / s.ball_total) for s in sums]
    slope = np.polyfit(ns, logs, 1)[0]
    assert abs(slope + 2 * math.log(2)) <= 0.2


def test_simplex_sum_cantor_decays():
    totals = [simplex_cover_sum(cantor_measure(), 1.0, 3, n, seed=1).total for n in (1, 2, 3)]
    assert totals[0] > totals[1] > totals[2] > 0


def test_counterexample_examples():
    spec = CounterexampleSpec(4)
    wit = counterexample_search(spec, 1, 1, 1)
    assert wit.found and wit.ratio > 1
    miss = counterexample_search(spec, 10 ** 9, 1, 1)
    assert not miss.found and miss.best is not None and miss.best[1] < 10 ** 9
    tiny_alpha = counterexample_search(spec, 2, F(1, 100), 1, scan_all=True)
    assert not tiny_alpha.found
    assert all(r <= 1 for _, r in tiny_alpha.ratios)


def test_counterexample_ratios_grow():
    wit = counterexample_search(CounterexampleSpec(5), 1, 1, 1, scan_all=True)
    vals = [r for _, r in wit.ratios]
    assert all(b > a for a, b in zip(vals[1:], vals[2:]))


@given(st.fractions(min_value=F(1, 4), max_value=3, max_denominator=6), st.integers(1, 50))
def test_counterexample_witness_is_strict(alpha, c):
    wit = counterexample_search(CounterexampleSpec(4), c, alpha, 1)
    if wit.found:
        # ratio > C in exact surd arithmetic
        assert wit.ratio > Surd(F(c)) and wit.beta <= 1


@given(st.floats(0.05, 0.95), st.integers(1, 6))
def test_point_mass_federer_is_one(x, k):
    res = federer_ratio(PointMass([F(x)]), 2, [((x,), 2.0 ** -k)])
    assert res.worst == 1.0
