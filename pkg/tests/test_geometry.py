import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasidecay.geometry import (
    EUCLIDEAN, SUP, Ball, DimensionMismatchError, Hyperplane, Point, TrackMismatchError, balls_disjoint,
    dist_sq_to_hyperplane, dist_to_hyperplane, four_r_select, greedy_maximal_net, greedy_net_array,
    in_thickening, sup_dist_on_support,
)
from quasidecay.measures import lebesgue_cube, segment_in_plane

rationals = st.fractions(min_value=-10, max_value=10, max_denominator=50)


def axis_plane(d=2):
    return Hyperplane.of([1] + [0] * (d - 1), 0)


def test_distance_examples():
    assert dist_to_hyperplane(Point.of(0, 0), axis_plane()) == 0
    assert dist_to_hyperplane(Point.of(3, 4), axis_plane()) == 3
    # |3 + 4| / 5, rational because the normal has rational length
    assert dist_to_hyperplane(Point.of(1, 1), Hyperplane.of([3, 4], 0)) == F(7, 5)


def test_thickening_examples():
    on = Point.of(0, 5)
    assert in_thickening(on, axis_plane(), 0, open_flag=False)
    assert not in_thickening(on, axis_plane(), 0, open_flag=True)
    assert in_thickening(Point.of(3, 4), axis_plane(), 3)
    with pytest.raises(ValueError):
        in_thickening(on, axis_plane(), -1)


def test_track_and_dimension_errors():
    with pytest.raises(TrackMismatchError):
        dist_sq_to_hyperplane(Point.of(0.5, 0.5), axis_plane())
    with pytest.raises(DimensionMismatchError):
        dist_sq_to_hyperplane(Point.of(1, 2, 3), axis_plane())
    with pytest.raises(ValueError):
        Hyperplane.of([0, 0], 1)


def test_sup_dist_examples():
    rng = np.random.default_rng(0)
    ball = Ball(Point.of(0.5, 0.5), 0.5, SUP)
    sd = sup_dist_on_support(lebesgue_cube(2), axis_plane().to_float(), ball, 20000, rng)
    assert abs(sd.value - 1) < 0.02
    flat = Hyperplane.of([0, 1], 0).to_float()
    sd = sup_dist_on_support(segment_in_plane(), flat, Ball(Point.of(0.3, 0.0), 0.2), 500, rng)
    assert sd.value == 0
    sd = sup_dist_on_support(lebesgue_cube(1), Hyperplane.of([1], 0.5), Ball(Point.of(0.5), 0.25), 5000, rng)
    assert abs(sd.value - 0.25) < 0.01


def test_sup_dist_monotone_in_n():
    mu, plane, ball = lebesgue_cube(2), Hyperplane.of([1.0, 1.0], 1.0), Ball(Point.of(0.5, 0.5), 0.3)
    small = sup_dist_on_support(mu, plane, ball, 100, np.random.default_rng(5))
    big = sup_dist_on_support(mu, plane, ball, 3000, np.random.default_rng(5))
    assert big.value >= small.value


def test_greedy_net_examples():
    pts = [Point.of(F(k, 4)) for k in range(5)]
    net = greedy_maximal_net(pts, F(1, 2))
    assert [p.coords[0] for p in net.points] == [0, F(1, 2), 1]
    assert len(greedy_maximal_net([Point.of(1)], 1)) == 1
    assert len(greedy_maximal_net(pts, 5)) == 1


def test_four_r_examples():
    b = Ball(Point.of(0.0), 1.0)
    assert four_r_select([b]) == [b]
    assert len(four_r_select([b, b])) == 1
    picked = four_r_select([Ball(Point.of(0.0), 1.0), Ball(Point.of(0.1), 0.5), Ball(Point.of(3.0), 1.0)])
    assert [(p.center.coords[0], p.radius) for p in picked] == [(0.0, 1.0), (3.0, 1.0)]


@given(st.lists(rationals, min_size=2, max_size=2), rationals, st.lists(rationals, min_size=2, max_size=2),
       st.fractions(min_value=F(1, 10), max_value=10, max_denominator=20))
def test_distance_scale_invariant(normal, offset, y, c):
    if not any(normal):
        return
    p1 = Hyperplane.of(normal, offset)
    p2 = Hyperplane.of([c * v for v in normal], c * offset)
    p3 = Hyperplane.of([-c * v for v in normal], -c * offset)
    pt = Point.of(*y)
    assert dist_sq_to_hyperplane(pt, p1) == dist_sq_to_hyperplane(pt, p2) == dist_sq_to_hyperplane(pt, p3)
    assert p1.same_plane(p3)


@given(st.lists(rationals, min_size=3, max_size=3), rationals, st.lists(rationals, min_size=3, max_size=3))
def test_exact_and_float_tracks_agree(normal, offset, y):
    if not any(normal):
        return
    plane = Hyperplane.of(normal, offset)
    exact = dist_sq_to_hyperplane(Point.of(*y), plane)
    approx = dist_sq_to_hyperplane(Point.of(*y).to_float(), plane.to_float())
    assert math.isclose(float(exact), approx, rel_tol=1e-12, abs_tol=1e-12)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=60),
       st.floats(0.05, 0.5), st.sampled_from([EUCLIDEAN, SUP]))
def test_net_separated_and_covering(raw, rho, norm):
    pts = [Point.of(x, y) for x, y in raw]
    net = greedy_maximal_net(pts, rho, norm)
    assert net.pairwise_ok()
    for p in pts:
        assert any(Ball(q, rho, norm).contains(p) for q in net.points)
    idx = greedy_net_array(np.array(raw), rho, norm)
    assert [tuple(pts[i].coords) for i in idx] == [q.coords for q in net.points]


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 2)), min_size=1, max_size=25))
def test_four_r_quarter_disjoint_and_covers_centres(raw):
    balls = [Ball(Point.of(x, y), r) for x, y, r in raw]
    picked = four_r_select(balls)
    quarters = [Ball(b.center, b.radius / 4) for b in picked]
    for i in range(len(quarters)):
        for j in range(i):
            assert balls_disjoint(quarters[i], quarters[j])
    for b in balls:
        assert any(p.contains(b.center) for p in picked)
