import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from toricheights.concave import PAConcave, indicator, log_scale, sup_convolution
from toricheights.heights import ProjectivePoint, projective_height
from toricheights.polytope import box, convex_hull, mixed_volume, simplex
from toricheights.ronkin import ARCHIMEDEAN, LaurentPolynomial, QuadratureConfig, prime_place
from toricheights.toric import (
    FLAGSHIP_VALUE,
    ToricDivisorData,
    experiment_csv,
    flagship_value,
    gualdi_limit,
    hypersurface_height,
    mv_projection_check,
    pushforward_reduction_check,
    toric_height,
    torsion_experiment,
)

from _gen import rand_pa, rand_polytope

UNIT = convex_hull([(0,), (1,)], 1)
P1 = ToricDivisorData(UNIT)
CFG = QuadratureConfig(budget=256, batches=4)


def lin(*coefs):
    """c_0 + c_1 x_1 + … + c_n x_n."""
    n = len(coefs) - 1
    terms = {tuple([0] * n): coefs[0]}
    for i, c in enumerate(coefs[1:]):
        if c:
            terms[tuple(int(j == i) for j in range(n))] = c
    return LaurentPolynomial(n, {e: c for e, c in terms.items() if c})


def test_flagship_constant():
    assert FLAGSHIP_VALUE == pytest.approx(0.48717531293429234, abs=1e-15)
    assert flagship_value() == pytest.approx(FLAGSHIP_VALUE, abs=1e-5)


# -- toric heights


def test_canonical_projective_plane():
    rep = toric_height([ToricDivisorData(simplex(2))] * 3)
    assert rep.total == 0 and rep.exact == "0"


def test_p1_with_linear_roof():
    theta = PAConcave.from_points([((0,), 0), ((1,), 1)], unit=log_scale(2))
    D = ToricDivisorData(UNIT, {ARCHIMEDEAN: theta})
    rep = toric_height([D, D])
    assert rep.total == pytest.approx(math.log(2), abs=1e-14)
    assert rep.exact == "1*log(2)"


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_additive_in_one_slot(seed):
    # D ↦ h(D, E, F) turns sup-convolution of roofs into a sum
    rng = random.Random(seed)
    f, g, h = (rand_pa(rng, 2) for _ in range(3))
    place = prime_place(3)

    def D(k):
        return ToricDivisorData(k.domain, {place: PAConcave.from_points(k.points, 2, log_scale(3))})

    lhs = toric_height([D(sup_convolution(f, g)), D(g), D(h)]).total
    rhs = toric_height([D(f), D(g), D(h)]).total + toric_height([D(g), D(g), D(h)]).total
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_constant_shift_scales_with_mixed_volume():
    # adding a constant c to one roof adds c·MV of the other two polytopes
    P, Q = simplex(2), box((0, 0), (1, 2))
    place = prime_place(2)
    c = F(5, 2)
    shifted = PAConcave.from_points([(v, c) for v in P.vertices], 2, log_scale(2))
    rep = toric_height([ToricDivisorData(P, {place: shifted}), ToricDivisorData(Q), ToricDivisorData(P)])

    assert rep.total == pytest.approx(float(c * mixed_volume([Q, P])) * math.log(2), abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_slot_symmetry_and_place_locality(seed):
    rng = random.Random(seed)
    fs = [rand_pa(rng, 2) for _ in range(3)]
    Ds = [ToricDivisorData(f.domain, {prime_place(5): PAConcave.from_points(f.points, 2, log_scale(5))}) for f in fs]
    a = toric_height(Ds)
    b = toric_height(Ds[::-1])
    assert a.total == b.total and a.exact == b.exact
    # a second place adds its own contribution independently
    Es = [ToricDivisorData(D.polytope, {**D.roofs, prime_place(7): PAConcave.from_points(f.points, 2, log_scale(7))}) for D, f in zip(Ds, fs)]
    c = toric_height(Es)
    by_place = {p.place: p.value for p in c.contributions}
    assert by_place["5"] == pytest.approx(a.total, abs=1e-12)
    assert by_place["7"] == pytest.approx(a.total / math.log(5) * math.log(7), abs=1e-9)


def test_divisor_json_roundtrip():
    theta = PAConcave.from_points([((0,), 0), ((1,), 1)], unit=log_scale(2))
    D = ToricDivisorData(UNIT, {ARCHIMEDEAN: theta})
    assert ToricDivisorData.from_json(D.to_json()) == D
    assert ToricDivisorData.from_json({"simplex": 2, "scale": 3}).polytope == simplex(2, 3)


def test_roof_must_live_on_polytope():
    with pytest.raises(ValueError):
        ToricDivisorData(UNIT, {ARCHIMEDEAN: indicator(convex_hull([(0,), (2,)], 1))})


def test_wrong_slot_count():
    with pytest.raises(ValueError):
        toric_height([ToricDivisorData(simplex(2))] * 2)


# -- hypersurfaces


def test_hypersurface_one_plus_2x():
    rep = hypersurface_height([P1], lin(1, 2), CFG)
    assert abs(rep.total - math.log(2)) <= rep.error
    parts = {c.place: c for c in rep.contributions}
    assert parts["2"].value == 0 and parts["2"].exact is not None


def test_hypersurface_x_minus_1():
    rep = hypersurface_height([P1], lin(-1, 1), CFG)
    assert abs(rep.total) <= rep.error + 1e-9


def test_hypersurface_monomial():
    rep = hypersurface_height([P1], LaurentPolynomial(1, {(1,): F(3, 2)}), CFG)
    assert rep.total == 0 and rep.error == 0


@settings(max_examples=6, deadline=None)
@given(st.integers(-50, 50).filter(bool), st.integers(-50, 50).filter(bool))
def test_hypersurface_matches_projective_height(a, b):
    rep = hypersurface_height([P1], lin(a, b), CFG)
    # the zero x = −a/b is the point [b : −a]
    ref = projective_height(ProjectivePoint.from_rationals([b, -a])).total
    assert rep.error <= 1e-2
    assert abs(rep.total - ref) <= rep.error


# -- the limit formula


def test_gualdi_without_polynomials_is_toric_height():
    theta = PAConcave.from_points([((0,), 0), ((1,), 1)], unit=log_scale(2))
    Ds = [ToricDivisorData(UNIT, {ARCHIMEDEAN: theta})] * 2
    assert gualdi_limit(Ds, []).to_json() == toric_height(Ds).to_json()


def test_gualdi_one_polynomial_is_hypersurface_height():
    f = lin(1, 2)
    assert gualdi_limit([P1], [f], CFG).to_json() == hypersurface_height([P1], f, CFG).to_json()


def test_gualdi_tol_fields():
    rep = gualdi_limit([P1], [lin(3, 5)], CFG, tol=1e-2)
    assert rep.extra["meets_tol"] is True
    assert "estimated_error" in rep.extra


def test_gualdi_slot_validation():
    with pytest.raises(ValueError):
        gualdi_limit([P1, P1], [lin(1, 2)], CFG)
    with pytest.raises(ValueError):
        gualdi_limit([ToricDivisorData(simplex(2))], [lin(1, 2)], CFG)


# -- projection lemmas


def test_mv_projection_examples():
    e1 = convex_hull([(0, 0), (1, 0)], 2)
    assert mv_projection_check([e1], [box((0, 0), (1, 1))], [0])["passed"]
    assert mv_projection_check([simplex(2), box((0, 0), (1, 1))], [], [0, 1])["passed"]


def test_pushforward_reduction_examples():
    e1 = convex_hull([(0, 0), (1, 0)], 2)
    sq = box((0, 0), (1, 1))
    rep = pushforward_reduction_check([e1], [indicator(sq), indicator(sq)], [0])
    assert rep["passed"] and rep["lhs"] == "0"
    rng = random.Random(4)
    for _ in range(5):
        g1 = PAConcave.from_points([(v, F(rng.randint(-6, 6), 3)) for v in sq.vertices], 2)
        g2 = PAConcave.from_points([(v, F(rng.randint(-6, 6), 2)) for v in box((0, 0), (2, 1)).vertices], 2)
        assert pushforward_reduction_check([e1], [g1, g2], [0])["passed"]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_mv_projection_random_product_shapes(seed):
    rng = random.Random(seed)
    # Δ in the x-plane, Q's arbitrary in ℝ³
    D = convex_hull([(rng.randint(0, 3), rng.randint(0, 3), 0) for _ in range(4)] + [(0, 0, 0), (1, 0, 0), (0, 1, 0)], 3)
    D2 = convex_hull([(rng.randint(0, 3), rng.randint(0, 3), 0) for _ in range(4)] + [(0, 0, 0), (2, 0, 0), (0, 1, 0)], 3)
    Q = rand_polytope(rng, 3)
    assert mv_projection_check([D, D2], [Q], [0, 1])["passed"]


# -- torsion experiment


def test_torsion_trivial_conductor_is_degenerate():
    f = lin(1, 1, 1)
    rep = torsion_experiment([f, f], [1], samples=5)["report"]
    assert rep["all_degenerate"]
    assert rep["per_N"][0]["singular"] == 5


def test_torsion_small_conductor():
    f = lin(1, 1, 1)
    out = torsion_experiment([f, f], [7], samples=40, seed=3)
    rep = out["report"]
    assert rep["heights_finite_nonnegative"]
    assert rep["per_N"][0]["valid"] + rep["per_N"][0]["degenerate"] == 40
    csv_text = experiment_csv(out["rows"])
    assert csv_text.splitlines()[0] == "N,draw,exponents,height"
    assert len(csv_text.splitlines()) == 41


def test_torsion_is_deterministic():
    f = lin(1, 1, 1)
    a = torsion_experiment([f, f], [11], samples=10, seed=5, limit=FLAGSHIP_VALUE)
    b = torsion_experiment([f, f], [11], samples=10, seed=5, limit=FLAGSHIP_VALUE)
    assert a == b


def test_torsion_validation():
    with pytest.raises(ValueError):
        torsion_experiment([LaurentPolynomial(2, {(2, 0): 1, (0, 0): 1})] * 2, [5])
    with pytest.raises(ValueError):
        torsion_experiment([lin(1, 1, 1)] * 2, [5], samples=0)
