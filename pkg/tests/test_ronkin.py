import math
import random
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toricheights.concave import ONE, PAConcave, log_scale
from toricheights.polytope import convex_hull
from toricheights.ronkin import (
    ARCHIMEDEAN,
    TRIVIAL,
    LaurentPolynomial,
    PlaceQ,
    QuadratureConfig,
    arch_ronkin_value,
    prime_place,
    pushforward_check,
    ronkin_roof,
    tropical_ronkin,
    valuation,
)


def poly(n, terms):
    return LaurentPolynomial(n, terms)


ONE_PLUS_2X = poly(1, {(0,): 1, (1,): 2})
XY1 = poly(2, {(0, 0): 1, (1, 0): 1, (0, 1): 1})


def mahler_1_x_y() -> float:
    """m(1+x+y) = (3√3/4π)·L(χ₋₃, 2), with L via Hurwitz zeta values."""
    L = (mpmath.zeta(2, mpmath.mpf(1) / 3) - mpmath.zeta(2, mpmath.mpf(2) / 3)) / 9
    return float(3 * mpmath.sqrt(3) / (4 * mpmath.pi) * L)


def test_oracle_constant():
    assert mahler_1_x_y() == pytest.approx(0.3230659472194505, abs=1e-15)


# -- places and valuations


def test_place_parsing():
    assert PlaceQ.parse("inf") == ARCHIMEDEAN
    assert PlaceQ.parse("trivial") == TRIVIAL
    assert PlaceQ.parse("7") == prime_place(7)
    with pytest.raises(ValueError):
        PlaceQ.parse("6")
    with pytest.raises(ValueError):
        PlaceQ.parse("abc")


def test_valuation():
    assert valuation(F(12, 5), prime_place(2)) == 2
    assert valuation(F(12, 5), prime_place(5)) == -1
    assert valuation(F(12, 5), TRIVIAL) == 0
    with pytest.raises(ValueError):
        valuation(F(0), prime_place(2))


# -- tropical Ronkin functions


def test_tropical_one_plus_2x_at_2():
    r = tropical_ronkin(ONE_PLUS_2X, prime_place(2))
    assert r.unit == log_scale(2)
    assert r == PAConcave.from_pieces([((0,), 0), ((1,), 1)], unit=log_scale(2))


def test_tropical_trivial_place():
    assert tropical_ronkin(ONE_PLUS_2X, TRIVIAL) == PAConcave.from_pieces([((0,), 0), ((1,), 0)])


def test_tropical_monomial():
    r = tropical_ronkin(poly(2, {(2, -1): 5}), prime_place(5))
    assert r == PAConcave.from_pieces([((2, -1), 1)], unit=log_scale(5))


def test_tropical_rejects_archimedean():
    with pytest.raises(ValueError):
        tropical_ronkin(ONE_PLUS_2X, ARCHIMEDEAN)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3, 5]))
def test_tropical_is_additive_under_products(seed, p):
    # Gauss norms are multiplicative, so ρ_{fg} = ρ_f + ρ_g exactly
    rng = random.Random(seed)

    def rnd():
        return poly(2, {(rng.randint(0, 2), rng.randint(0, 2)): rng.choice([1, 2, 3, 4, 6, 9, 10, F(1, 2)]) for _ in range(3)})

    f, g = rnd(), rnd()
    v = prime_place(p)
    rf, rg, rfg = tropical_ronkin(f, v), tropical_ronkin(g, v), tropical_ronkin(f * g, v)
    for _ in range(8):
        u = (F(rng.randint(-8, 8), 3), F(rng.randint(-8, 8), 3))
        assert rfg(u) == rf(u) + rg(u)


# -- roofs


def test_roof_nonarchimedean():
    assert ronkin_roof(ONE_PLUS_2X, prime_place(2)) == PAConcave.from_points([((0,), 0), ((1,), -1)], unit=log_scale(2))
    assert ronkin_roof(ONE_PLUS_2X, TRIVIAL) == PAConcave.from_points([((0,), 0), ((1,), 0)])


def test_roof_archimedean_one_plus_2x():
    roof = ronkin_roof(ONE_PLUS_2X, ARCHIMEDEAN, QuadratureConfig(budget=256, batches=4))
    assert roof.domain == convex_hull([(0,), (1,)], 1)
    for m in np.linspace(0, 1, 11):
        assert abs(roof((m,)) - m * math.log(2)) <= 5e-3


def test_roof_archimedean_is_concave():
    roof = ronkin_roof(XY1, ARCHIMEDEAN, QuadratureConfig(budget=256, batches=4, m_step=0.05))
    assert roof.concavity_defect() <= 3 * roof.error + 1e-9
    # the value at a vertex with coefficient 1 is 0
    assert abs(roof((0, 0))) <= roof.error + 1e-9


# -- archimedean Ronkin values


def test_arch_monomial_exact():
    for u in ((0,), (F(3, 2),), (-2,)):
        r = arch_ronkin_value(poly(1, {(2,): 3}), u)
        assert r.value == pytest.approx(-math.log(3) + 2 * float(u[0]), abs=1e-12)


def test_arch_one_plus_x_plus_y():
    r = arch_ronkin_value(XY1, (0, 0), QuadratureConfig(budget=4096, batches=8))
    assert abs(r.value + mahler_1_x_y()) <= max(3 * r.error, 1e-6)


def test_arch_jensen_one_plus_2x():
    r = arch_ronkin_value(ONE_PLUS_2X, (0,))
    assert r.value == pytest.approx(-math.log(2), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_arch_translation_rule(u1, u2):
    # ρ_{x^a f}(u) = ρ_f(u) + ⟨a, u⟩ and ρ_{cf} = ρ_f − log|c|
    cfg = QuadratureConfig(budget=512, batches=4, seed=3)
    g = poly(2, {(2, 1): 5, (3, 1): 5, (2, 2): 5})
    a = arch_ronkin_value(XY1, (u1, u2), cfg)
    b = arch_ronkin_value(g, (u1, u2), cfg)
    assert abs(b.value - (a.value + 2 * u1 + u2 - math.log(5))) <= 1e-9 + 3 * (a.error + b.error)


def test_arch_product_rule():
    cfg = QuadratureConfig(budget=2048, batches=8, seed=1)
    g = poly(2, {(0, 0): 3, (1, 1): -1, (0, 1): 1})
    for u in ((0, 0), (F(1, 2), -1), (-1, 2)):
        a, b, c = (arch_ronkin_value(h, u, cfg) for h in (XY1, g, XY1 * g))
        assert abs(c.value - a.value - b.value) <= 3 * (a.error + b.error + c.error) + 1e-6


def test_arch_is_concave_along_a_line():
    cfg = QuadratureConfig(budget=2048, batches=8, seed=2)
    ts = np.linspace(-3, 3, 13)
    vals = [arch_ronkin_value(XY1, (t, 0.3 * t), cfg) for t in ts]
    for a, b, c in zip(vals, vals[1:], vals[2:]):
        assert (a.value + c.value) / 2 - b.value <= 3 * (a.error + b.error + c.error) + 1e-9


def test_arch_rejects_bad_point():
    with pytest.raises(ValueError):
        arch_ronkin_value(XY1, (0,))


# -- pushforward


def test_pushforward_identity():
    rep = pushforward_check(XY1, [[1, 0], [0, 1]], QuadratureConfig(budget=512))
    assert rep["passed"]


def test_pushforward_diagonal_embedding():
    rep = pushforward_check(ONE_PLUS_2X, [[1], [1]], QuadratureConfig(budget=512))
    assert rep["passed"]
    assert LaurentPolynomial.from_json(rep["image"]) == poly(2, {(0, 0): 1, (1, 1): 2})
    assert all(c["passed"] for c in rep["checks"] if c["place"] == "2")


def test_pushforward_monomial():
    rep = pushforward_check(poly(2, {(1, -2): F(3, 4)}), [[2, 1], [0, 1], [1, 1]], QuadratureConfig(budget=256))
    assert rep["passed"]


def test_pushforward_rejects_non_injective():
    with pytest.raises(ValueError):
        pushforward_check(XY1, [[1, 1]])
