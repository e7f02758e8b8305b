import itertools
import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from toricheights.polytope import (
    LinearMapQ,
    Polytope,
    box,
    convex_hull,
    minkowski_sum,
    mixed_volume,
    newton_polytope,
    project,
    simplex,
    volume,
)
from toricheights.ronkin import LaurentPolynomial

from _gen import rand_polytope


def seg(n, i, length=1):
    return convex_hull([tuple(F(0) for _ in range(n)), tuple(F(length if j == i else 0) for j in range(n))], n)


def verts(*pts):
    return tuple(tuple(F(c) for c in p) for p in pts)


# -- hull


def test_hull_drops_interior_point():
    P = convex_hull([(0, 0), (1, 0), (0, 1), (F(1, 2), F(1, 4))], 2)
    assert P.vertices == verts((0, 0), (0, 1), (1, 0))


def test_hull_single_point():
    P = convex_hull([(0, 0)], 2)
    assert P.vertices == verts((0, 0))
    assert P.dim == 0


def test_hull_collinear_midpoint():
    P = convex_hull([(0, 0), (2, 0), (1, 0)], 2)
    assert P.vertices == verts((0, 0), (2, 0))
    assert P.dim == 1


def test_hull_rejects_bad_input():
    with pytest.raises(ValueError):
        convex_hull([], 2)
    with pytest.raises(ValueError):
        convex_hull([(0, 0, 0)], 2)


def test_hull_of_cube_with_interior_and_face_points():
    pts = list(itertools.product((0, 1), repeat=3)) + [(F(1, 2),) * 3, (F(1, 2), F(1, 2), 0)]
    P = convex_hull(pts, 3)
    assert len(P.vertices) == 8
    assert volume(P) == 1


def test_json_roundtrip():
    P = convex_hull([(0, 0), (F(3, 2), 0), (0, 1)], 2)
    assert Polytope.from_json(P.to_json()) == P


# -- Minkowski sums


def test_minkowski_segments_give_square():
    assert minkowski_sum(seg(2, 0), seg(2, 1)) == box((0, 0), (1, 1))


def test_minkowski_identity_point():
    P = convex_hull([(0, 0), (2, 1), (1, 3)], 2)
    assert minkowski_sum(P, convex_hull([(0, 0)], 2)) == P


def test_minkowski_simplex_dilation():
    assert minkowski_sum(simplex(2), simplex(2)).vertices == verts((0, 0), (0, 2), (2, 0))


# -- volumes


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_simplex_volume(n):
    assert volume(simplex(n)) == F(1, math.factorial(n))


def test_cube_and_segment_volumes():
    assert volume(box((0, 0, 0), (1, 1, 1))) == 1
    assert volume(seg(2, 0)) == 0


# -- mixed volumes


def test_mixed_volume_examples():
    assert mixed_volume([seg(2, 0), seg(2, 1)]) == 1
    assert mixed_volume([simplex(2), simplex(2)]) == 1
    assert mixed_volume([seg(2, 0), box((0, 0), (1, 1))]) == 1


def test_mixed_volume_empty_tuple_is_one():
    assert mixed_volume([]) == 1


def test_mixed_volume_wrong_count():
    with pytest.raises(ValueError):
        mixed_volume([simplex(2)])


def test_bkk_count_for_generic_box():
    # BKK: two generic polynomials with Newton polytope [0,2]×[0,1] have MV = 4 common roots
    B = box((0, 0), (2, 1))
    assert mixed_volume([B, B]) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_mixed_volume_symmetry_and_diagonal(seed, n):
    rng = random.Random(seed)
    Ps = [rand_polytope(rng, n) for _ in range(n)]
    base = mixed_volume(Ps)
    for perm in itertools.permutations(range(n)):
        assert mixed_volume([Ps[i] for i in perm]) == base
    assert mixed_volume([Ps[0]] * n) == math.factorial(n) * volume(Ps[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.fractions(F(1, 3), 3, max_denominator=4))
def test_mixed_volume_multilinear_and_translation(seed, n, lam):
    rng = random.Random(seed)
    P, Q = rand_polytope(rng, n), rand_polytope(rng, n)
    rest = [rand_polytope(rng, n) for _ in range(n - 1)]
    assert mixed_volume([minkowski_sum(P, Q)] + rest) == mixed_volume([P] + rest) + mixed_volume([Q] + rest)
    assert mixed_volume([P.scale(lam)] + rest) == lam * mixed_volume([P] + rest)
    t = tuple(F(rng.randint(-5, 5), 3) for _ in range(n))
    assert mixed_volume([P.translate(t)] + rest) == mixed_volume([P] + rest)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_mixed_volume_is_monotone(seed):
    rng = random.Random(seed)
    P, Q, R = (rand_polytope(rng, 2) for _ in range(3))
    big = convex_hull(P.vertices + R.vertices, 2)
    assert mixed_volume([P, Q]) <= mixed_volume([big, Q])


def test_mixed_volume_under_unimodular_map():
    rng = random.Random(5)
    A = LinearMapQ.from_rows([[1, 2, 0], [0, 1, 0], [1, 1, 1]])
    for _ in range(5):
        Ps = [rand_polytope(rng, 3) for _ in range(3)]
        assert mixed_volume([project(P, A) for P in Ps]) == mixed_volume(Ps)


# -- projections


def test_projection_examples():
    assert project(box((0, 0), (1, 1)), LinearMapQ.coordinate_projection(2, [0])) == convex_hull([(0,), (1,)], 1)
    P = convex_hull([(0, 0), (2, 1), (1, 3)], 2)
    assert project(P, LinearMapQ.identity(2)) == P
    assert project(simplex(2), LinearMapQ.from_rows([[1, 1]])) == convex_hull([(0,), (1,)], 1)


def test_projection_dimension_mismatch():
    with pytest.raises(ValueError):
        project(simplex(2), LinearMapQ.identity(3))


# -- Newton polytopes


def test_newton_polytopes():
    assert newton_polytope(LaurentPolynomial(2, {(0, 0): 1, (1, 0): 1, (0, 1): 1})) == simplex(2)
    mono = newton_polytope(LaurentPolynomial(2, {(2, -1): 5}))
    assert mono.vertices == verts((2, -1))
    assert newton_polytope(LaurentPolynomial(1, {(0,): 1, (1,): 2})) == convex_hull([(0,), (1,)], 1)


def test_contains_and_facets():
    P = simplex(2)
    assert P.contains((F(1, 3), F(1, 3)))
    assert not P.contains((1, 1))
    assert len(P.facets()) == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]), st.booleans())
def test_minkowski_matches_hull_of_pairwise_sums(seed, n, full):
    rng = random.Random(seed)
    P, Q = rand_polytope(rng, n), rand_polytope(rng, n, full=full)
    S = minkowski_sum(P, Q)
    direct = convex_hull([tuple(a + b for a, b in zip(p, q)) for p in P.vertices for q in Q.vertices], n)
    assert S == direct
    assert volume(S) == volume(direct)
    assert sorted(S.facets()) == sorted(direct.facets())
