import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from quasidecay.dynamics import RationalFlowPoint, s0_chain
from quasidecay.plucker import (
    AffineMapOnE, AffineSubspaceOfE, RationalSubspace, VertexBudgetError, build_F_tV,
    check_subspace_exponent_bound, covolume_sq, e_coordinates, enumerate_vertices, f_tV_sq,
    identity_suite, norm_F_restricted, omega_affine, plucker_embed, random_vertex,
    verify_FtV_identity, wedge,
)

GOLDEN = "0.61803398874989484820458683436563811772030917980576286213545"


def test_wedge_examples():
    assert wedge([[1, 0, 0], [0, 1, 0]]).as_dict() == {(1, 2): 1}
    assert wedge([[1, 2, 3], [1, 2, 3]]).is_zero()
    w = wedge([[1, 0, 1, 0], [0, 1, 0, 1]])
    assert w.as_dict() == {(1, 2): 1, (1, 4): 1, (2, 3): -1, (3, 4): 1}


def test_plucker_embed_examples():
    a = F(5, 7)
    assert plucker_embed([[a]]) == {(1,): a}
    assert plucker_embed([[F(1, 3)], [F(-2, 5)]]) == {(1,): F(1, 3), (2,): F(-2, 5)}
    psi = plucker_embed([[1, 0], [0, 1]])
    assert {k: v for k, v in psi.items() if v} == {(1, 2): 1, (1, 4): 1, (2, 3): -1}


def test_covolume_examples():
    assert covolume_sq([[1, 0, 0], [0, 1, 0], [0, 0, 1]]) == 1
    assert covolume_sq([[3, 4]]) == 25
    assert covolume_sq([[1, 0, 0], [1, 1, 0]]) == 1
    assert covolume_sq([[1, 2], [2, 4]]) == 0


def test_f_tV_examples():
    t0 = RationalFlowPoint((F(1), F(1), F(1)))
    assert f_tV_sq([[F(2, 3), F(1, 5)]], t0, RationalSubspace.whole(3)) == 1
    axis = RationalSubspace.coordinate([2], 2)
    for k in (0, 1, 4):
        t = RationalFlowPoint.powers_of_two([-k, k])
        a = F(3, 4)
        # g_t u_A (0,1) = (2^-k a, 2^k)
        assert f_tV_sq([[a]], t, axis) == F(1, 4 ** k) * a * a + 4 ** k
        assert f_tV_sq([[0]], t, axis) == 4 ** k


@pytest.mark.parametrize("ks", [[0, 0, 0, 0], [3, -1, 2, -4], [-5, 5, 1, -1]])
def test_whole_space_map_is_the_determinant(ks):
    t = RationalFlowPoint.powers_of_two(ks)
    F_map = build_F_tV(t, RationalSubspace.whole(4), 2, 2)
    for a in ([[0, 0], [0, 0]], [[F(1, 2), 3], [F(-2, 7), F(5, 3)]]):
        assert F_map(plucker_embed(a)).norm_sq() == 1


def test_axis_map_coordinates():
    F_map = build_F_tV(RationalFlowPoint((F(1), F(1))), RationalSubspace.coordinate([2], 2), 1, 1)
    a = F(-4, 9)
    out = F_map(plucker_embed([[a]]))
    assert out.as_dict() == {(1,): a, (2,): 1}
    assert out.norm_sq() == a * a + 1


def test_identity_examples():
    t0 = RationalFlowPoint((F(1), F(1)))
    assert verify_FtV_identity([[0]], t0, RationalSubspace.coordinate([1], 2))
    assert verify_FtV_identity([[F(3, 4)]], RationalFlowPoint.powers_of_two([-2, 2]), RationalSubspace.coordinate([2], 2))
    assert verify_FtV_identity([[F(1, 2), F(1, 3)], [1, F(-1, 5)]],
                               RationalFlowPoint.powers_of_two([1, 2, -1, -2]), RationalSubspace.whole(4))


def test_identity_suite_fifty():
    rep = identity_suite(50, seed=11)
    assert rep.passed == rep.trials == 50 and not rep.failures


def test_enumerate_vertices_examples():
    verts = enumerate_vertices(1, 1, 1)
    assert sorted(v.rows for v in verts) == sorted([((0, 1),), ((1, 0),), ((1, 1),), ((1, -1),)])
    for m, n, h in [(1, 2, 1), (2, 1, 2)]:
        verts = enumerate_vertices(m, n, h)
        rows = {v.rows for v in verts}
        for i in range(1, m + n + 1):
            assert RationalSubspace.coordinate([i], m + n).rows in rows
        # canonical form is idempotent
        assert all(RationalSubspace.span(v.rows, m + n) == v for v in verts)
        assert len(rows) == len(verts)
    assert RationalSubspace.span([[-1, -1]]) == RationalSubspace.span([[1, 1]])
    with pytest.raises(ValueError):
        enumerate_vertices(1, 1, 0)
    with pytest.raises(VertexBudgetError):
        enumerate_vertices(2, 2, 3, budget=1000)


def test_norm_restricted_examples():
    const = AffineMapOnE(1, 1, 1, {(2,): F(3)}, {})
    assert norm_F_restricted(const, AffineSubspaceOfE.whole(1, 1)) == 3.0
    proj = AffineMapOnE(1, 1, 1, {(2,): F(1, 2)}, {(1,): {(1,): F(1)}})
    assert math.isclose(norm_F_restricted(proj, AffineSubspaceOfE.whole(1, 1)), 1.0)
    proj_big = AffineMapOnE(1, 1, 1, {(2,): F(5, 2)}, {(1,): {(1,): F(1)}})
    assert math.isclose(norm_F_restricted(proj_big, AffineSubspaceOfE.whole(1, 1)), 2.5)
    pt = AffineSubspaceOfE.point({(1,): F(2)}, 1, 1)
    assert math.isclose(norm_F_restricted(proj, pt), math.hypot(2, 0.5))


def test_affine_subspace_origin_is_orthogonal():
    coords = e_coordinates(2, 2)
    base = {I: F(i + 1, 3) for i, I in enumerate(coords)}
    dirs = [{coords[0]: F(1), coords[2]: F(2)}, {coords[1]: F(1), coords[4]: F(-1)}]
    asub = AffineSubspaceOfE(2, 2, base, dirs)
    origin = [float(asub.origin[I]) for I in coords]
    for row in asub.orthonormal:
        assert abs(sum(o * r for o, r in zip(origin, row))) <= 1e-10
    assert asub.contains(base)


def test_omega_affine_examples():
    pool = enumerate_vertices(1, 1, 2)
    chain = s0_chain(1, 1, 25.0)
    assert omega_affine(AffineSubspaceOfE.whole(1, 1), chain, pool).value <= 0.1
    rational = AffineSubspaceOfE.point(plucker_embed([[F(1, 2)]]), 1, 1)
    est = omega_affine(rational, chain, pool)
    vals = [p["value"] for p in est.per_t]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert est.value > 0.9
    one = omega_affine(rational, chain.prefix(1), pool)
    assert one.value == one.overall_max == vals[0]


def test_omega_affine_monotone_in_height_and_length():
    chain = s0_chain(1, 2, 12.0)
    asub = AffineSubspaceOfE.point(plucker_embed([[F(1, 3), F(2, 5)]]), 1, 2)
    small, big = enumerate_vertices(1, 2, 1), enumerate_vertices(1, 2, 2)
    assert {v.rows for v in small} <= {v.rows for v in big}
    a, b = omega_affine(asub, chain, small), omega_affine(asub, chain, big)
    assert all(y["value"] >= x["value"] for x, y in zip(a.per_t, b.per_t))
    assert b.overall_max >= a.overall_max and b.value >= a.value
    maxes = [omega_affine(asub, chain.prefix(k), small).overall_max for k in range(1, len(chain) + 1)]
    assert all(y >= x for x, y in zip(maxes, maxes[1:]))


def test_subspace_bound_examples():
    pool = enumerate_vertices(1, 1, 2)
    chain = s0_chain(1, 1, 25.0)
    rep = check_subspace_exponent_bound([[GOLDEN]], AffineSubspaceOfE.whole(1, 1), chain, pool)
    assert rep.holds and not rep.pointwise_failures
    assert abs(rep.lhs) <= 0.1
    a = [[F(2, 7)]]
    rep = check_subspace_exponent_bound(a, AffineSubspaceOfE.point(plucker_embed(a), 1, 1), chain, pool)
    assert rep.holds
    with pytest.raises(ValueError):
        check_subspace_exponent_bound([[F(1, 3)]], AffineSubspaceOfE.point(plucker_embed(a), 1, 1), chain, pool)


small_rational = st.fractions(min_value=-4, max_value=4, max_denominator=9)
shapes = st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)])


@st.composite
def identity_setups(draw):
    m, n = draw(shapes)
    a = [[draw(small_rational) for _ in range(n)] for _ in range(m)]
    ks = [draw(st.integers(-4, 4)) for _ in range(m + n - 1)]
    t = RationalFlowPoint.powers_of_two(ks + [-sum(ks)])
    v = random_vertex(m + n, draw(st.integers(1, m + n - 1)), 2, random.Random(draw(st.integers(0, 10 ** 6))))
    return a, t, v


@given(identity_setups())
def test_covolume_identity_property(setup):
    assert verify_FtV_identity(*setup)


@given(shapes, st.data())
def test_embedding_stays_in_E(shape, data):
    m, n = shape
    a = [[data.draw(small_rational) for _ in range(n)] for _ in range(m)]
    psi = plucker_embed(a)
    assert set(psi) == set(e_coordinates(m, n))
    assert tuple(range(m + 1, m + n + 1)) not in psi


@settings(max_examples=40)
@given(st.sampled_from([(1, 1), (1, 2), (2, 1), (3, 1), (1, 3)]), st.data())
def test_embedding_linear_when_one_side_is_one(shape, data):
    m, n = shape
    a = [[data.draw(small_rational) for _ in range(n)] for _ in range(m)]
    b = [[data.draw(small_rational) for _ in range(n)] for _ in range(m)]
    s = [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]
    pa, pb, ps = plucker_embed(a), plucker_embed(b), plucker_embed(s)
    assert all(ps[I] == pa[I] + pb[I] for I in ps)
