import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toricheights.mahler import (
    PolyC,
    bound_suite,
    harmonic,
    mahler_multisphere,
    mahler_sphere,
    mahler_torus,
    mahler_univariate_exact,
    norm_inf,
    parseval_check,
    random_poly,
    sup_polydisc,
)
from toricheights.ronkin import QuadratureConfig

M_1XY = 0.3230659472194505  # m(1+x+y), checked against an L-value oracle in the Ronkin tests

CFG = QuadratureConfig(budget=4096, batches=8)


def P1(terms):
    return PolyC((1,), {(e,): c for e, c in terms.items()})


XY1 = PolyC((2,), {(0, 0): 1, (1, 0): 1, (0, 1): 1})


def within(est, target, k=3, floor=1e-9):
    return abs(est.value - target) <= k * est.stderr + floor


def test_norms():
    assert norm_inf(P1({0: 1, 1: 2})) == 2
    assert norm_inf(XY1) == 1
    assert norm_inf(P1({2: 3, 0: -5})) == 5
    assert norm_inf(P1({0: {"re": "3", "im": "4"}})) == 5


def test_harmonic():
    assert harmonic(0) == 0
    assert harmonic(3) == pytest.approx(1 + 1 / 2 + 1 / 3)


# -- torus


def test_torus_examples():
    assert within(mahler_torus(P1({1: 2, 0: 1}), CFG), math.log(2))
    assert within(mahler_torus(XY1, CFG), M_1XY)
    assert within(mahler_torus(PolyC((2,), {(1, 1): 1, (0, 0): 5}), CFG), math.log(5))


def test_torus_qmc_mode_matches_oracle():
    est = mahler_torus(XY1, CFG, method="qmc")
    assert est.error_kind == "stderr" and est.samples > 0
    assert within(est, M_1XY, floor=1e-4)


def test_torus_rejects_unknown_method():
    with pytest.raises(ValueError):
        mahler_torus(XY1, CFG, method="fast")


def test_univariate_exact_examples():
    assert mahler_univariate_exact(P1({1: 2, 0: 1}))[0] == pytest.approx(math.log(2), abs=1e-12)
    assert mahler_univariate_exact(P1({2: 1, 0: -2}))[0] == pytest.approx(math.log(2), abs=1e-12)
    assert mahler_univariate_exact(P1({1: 1, 0: -1}))[0] == pytest.approx(0, abs=1e-12)
    # repeated roots go through the squarefree split
    v, err = mahler_univariate_exact(P1({0: 1, 1: 3, 2: 3, 3: 1}))
    assert v == pytest.approx(0, abs=1e-9) and err < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=6))
def test_exact_matches_sampling(coeffs):
    if coeffs[-1] == 0 or all(c == 0 for c in coeffs[1:]):
        return
    P = P1({i: c for i, c in enumerate(coeffs) if c})
    exact, err = mahler_univariate_exact(P)
    est = mahler_torus(P, QuadratureConfig(budget=16384, batches=16), method="qmc")
    # roots on the circle make the sampled integrand singular; allow a small absolute slack
    assert abs(est.value - exact) <= 3 * est.stderr + err + 1e-3


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_additivity(seed):
    rng = np.random.default_rng(seed)
    P, Q = random_poly(rng, (2,), max_degree=2, max_terms=4), random_poly(rng, (2,), max_degree=2, max_terms=4)
    cfg = QuadratureConfig(budget=4096, batches=8, seed=seed % 97)
    a, b, c = mahler_torus(P, cfg), mahler_torus(Q, cfg), mahler_torus(P * Q, cfg)
    assert abs(c.value - a.value - b.value) <= 3 * (a.stderr + b.stderr + c.stderr) + 1e-3


def test_rotation_invariance():
    # P(i·x, −y) has the same Mahler measure
    P = PolyC((2,), {(0, 0): 2, (1, 0): 1, (1, 1): -3, (0, 2): 1})
    R = PolyC((2,), {e: complex(float(c[0])) * (1j ** e[0]) * ((-1) ** e[1]) for e, c in P.terms.items()})
    a, b = mahler_torus(P, CFG), mahler_torus(R, CFG)
    assert abs(a.value - b.value) <= 3 * (a.stderr + b.stderr) + 1e-6


def test_constant_is_exact():
    est = mahler_torus(P1({0: 5}))
    assert est.value == math.log(5) and est.stderr == 0


# -- spheres


def test_sphere_coordinate_function():
    P = PolyC((2,), {(1, 0): 1})
    assert within(mahler_sphere(P, QuadratureConfig(budget=40000, batches=8)), -0.5)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_constant(n):
    P = PolyC((n,), {tuple([1] + [0] * (n - 1)): 1})
    assert within(mahler_sphere(P, QuadratureConfig(budget=40000, batches=8, seed=n)), -0.5 * harmonic(n - 1))


def test_product_of_spheres():
    P = PolyC((2, 2), {(1, 0, 1, 0): 1})
    assert within(mahler_multisphere(P, (2, 2), QuadratureConfig(budget=40000, batches=8)), -1.0)


def test_sphere_constant_polynomial():
    est = mahler_sphere(P1({0: 5}))
    assert est.value == pytest.approx(math.log(5)) and est.stderr == 0


def test_partition_mismatch():
    with pytest.raises(ValueError):
        mahler_multisphere(XY1, (1, 2))


# -- sup norm and Parseval


@pytest.mark.parametrize("P,target", [(P1({1: 1}), 1), (P1({1: 1, 0: 1}), 2), (XY1, 3)])
def test_sup_polydisc(P, target):
    rep = sup_polydisc(P, QuadratureConfig(budget=256))
    assert rep["estimate"] == pytest.approx(target, abs=1e-6)
    assert rep["estimate"] <= rep["upper_bracket"] + 1e-9
    assert rep["consistent"]


@pytest.mark.parametrize("P,exact", [(P1({0: 1, 1: 1}), "2"), (XY1, "3"), (P1({1: 2, 0: 3}), "13")])
def test_parseval(P, exact):
    rep = parseval_check(P, QuadratureConfig(budget=20000, batches=8))
    assert rep["exact"] == exact
    assert rep["within_3sigma"]


# -- bounds


def test_power_of_monomial_has_zero_gaps():
    P = P1({3: 1})
    assert mahler_torus(P).value == pytest.approx(0, abs=1e-12)
    assert math.log(norm_inf(P)) == 0


def test_cube_of_one_plus_x():
    P = P1({0: 1, 1: 3, 2: 3, 3: 1})
    m = mahler_torus(P).value
    assert m == pytest.approx(0, abs=1e-9)
    assert abs(m - math.log(3)) <= 3 * math.log(2)


def test_small_bound_suite():
    rep = bound_suite(seed=3, corpus=40, configs=[(1,), (2,), (1, 1)], sphere_samples=20000)
    assert rep["total_violations"] == 0
    assert rep["passed"]


def test_bound_suite_rejects_empty_corpus():
    with pytest.raises(ValueError):
        bound_suite(corpus=0)


def test_random_poly_shapes():
    rng = np.random.default_rng(0)
    for _ in range(20):
        P = random_poly(rng, (2, 1), homogeneous=True)
        assert len({sum(e) for e in P.terms}) == 1
        assert P.groups == (2, 1)
