"""One test per acceptance criterion; each records a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) to print the lines, or via
pytest, which prints them in the terminal summary.
"""
import itertools
import json
import math
import random
import sys
import time
from fractions import Fraction as F

import pytest
import sympy

from toricheights.cli import main as cli_main
from toricheights.concave import (
    PAConcave,
    integral,
    legendre_dual,
    mixed_integral,
    pointwise_sum,
    sup_convolution,
)
from toricheights.heights import ProjectivePoint, gvf_axiom_suite, projective_height
from toricheights.mahler import PolyC, bound_suite, harmonic, mahler_sphere, parseval_check
from toricheights.polytope import convex_hull, minkowski_sum, mixed_volume, volume
from toricheights.resultants import convergence_table, point_row_exact, sylvester_resultant_form, veronese_gap
from toricheights.ronkin import LaurentPolynomial, QuadratureConfig
from toricheights.toric import (
    FLAGSHIP_VALUE,
    ToricDivisorData,
    hypersurface_height,
    mv_projection_check,
    pushforward_reduction_check,
    torsion_experiment,
)

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _gen import rand_pa, rand_polytope  # noqa: E402

LINES: list[str] = []
# serialized stochastic reports, re-derived by the determinism criterion
FIRST_RUN: dict[str, str] = {}

XY1 = {"vars": 2, "terms": [{"exp": [0, 0], "coef": "1"}, {"exp": [1, 0], "coef": "1"}, {"exp": [0, 1], "coef": "1"}]}


def record(k: int, ok: bool, detail: str, blocking: bool = True) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    LINES.append(line)
    print(line)
    if blocking:
        assert ok, line


def dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=str)


# -- 1


def _shift(f: PAConcave, c) -> PAConcave:
    return PAConcave.from_points([(m, h + c) for m, h in f.points], f.ambient_dim, f.unit)


def _exact_identities(n: int, rng: random.Random) -> list[str]:
    bad = []
    Ps = [rand_polytope(rng, n) for _ in range(n)]
    Q = rand_polytope(rng, n)
    lam = F(rng.randint(1, 9), rng.randint(1, 4))
    mv = mixed_volume(Ps)
    if any(mixed_volume([Ps[i] for i in p]) != mv for p in itertools.permutations(range(n))):
        bad.append("MV symmetry")
    if mixed_volume([Ps[0]] * n) != math.factorial(n) * volume(Ps[0]):
        bad.append("MV diagonal")
    if mixed_volume([minkowski_sum(Ps[0], Q)] + Ps[1:]) != mv + mixed_volume([Q] + Ps[1:]):
        bad.append("MV additivity")
    if mixed_volume([Ps[0].scale(lam)] + Ps[1:]) != lam * mv:
        bad.append("MV homogeneity")

    fs = [rand_pa(rng, n) for _ in range(n + 1)]
    g = rand_pa(rng, n)
    c = F(rng.randint(-6, 6), rng.randint(1, 3))
    mi = mixed_integral(fs)
    if mixed_integral(fs[::-1]) != mi or mixed_integral(fs[1:] + fs[:1]) != mi:
        bad.append("MI symmetry")
    if mixed_integral([fs[0]] * (n + 1)) != math.factorial(n + 1) * integral(fs[0]):
        bad.append("MI diagonal")
    if mixed_integral([sup_convolution(fs[0], g)] + fs[1:]) != mi + mixed_integral([g] + fs[1:]):
        bad.append("MI additivity")
    if mixed_integral([_shift(fs[0], c)] + fs[1:]) != mi + c * mixed_volume([f.domain for f in fs[1:]]):
        bad.append("MI constant shift")
    if legendre_dual(legendre_dual(fs[0])) != fs[0]:
        bad.append("dual involution")
    if legendre_dual(sup_convolution(fs[0], g)) != pointwise_sum(legendre_dual(fs[0]), legendre_dual(g)):
        bad.append("dual of sup-convolution")
    return bad


def test_criterion_1_exact_convex_identities():
    t0 = time.perf_counter()
    failures = []
    for n in (2, 3):
        rng = random.Random(1000 + n)
        for i in range(100):
            failures += [f"n={n} #{i}: {b}" for b in _exact_identities(n, rng)]
    dt = time.perf_counter() - t0
    ok = not failures and dt < 120
    record(1, ok, f"200 instances (100 each for n=2,3), {len(failures)} exact mismatches, {dt:.1f}s" + (f"; first: {failures[0]}" if failures else ""))


# -- 2


def _embed(points, n, axes):
    out = []
    for p in points:
        v = [0] * n
        for a, x in zip(axes, p):
            v[a] = x
        out.append(tuple(v))
    return out


def _product(*factors):
    return [tuple(itertools.chain.from_iterable(c)) for c in itertools.product(*factors)]


def _simplex_pts(k, s=1):
    return [tuple(0 for _ in range(k))] + [tuple(s * int(i == j) for j in range(k)) for i in range(k)]


def test_criterion_2_projection_lemmas():
    rng = random.Random(2)
    results = []
    # product-of-simplices shapes: Δ_k(s) inside the first k coordinates, Q = Δ_a × Δ_b
    for k, a, b in [(1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 2, 1), (2, 1, 2)]:
        n = a + b
        if k >= n:
            continue
        L = list(range(k))
        deltas = [convex_hull(_embed(_simplex_pts(k, rng.randint(1, 3)), n, L), n) for _ in range(k)]
        qs = [convex_hull(_product(_simplex_pts(a, rng.randint(1, 2)), _simplex_pts(b, rng.randint(1, 2))), n) for _ in range(n - k)]
        results.append(("mv", mv_projection_check(deltas, qs, L)["passed"]))
        doms = [convex_hull(_product(_simplex_pts(a), _simplex_pts(b, 2)), n) for _ in range(n - k + 1)]
        gs = [PAConcave.from_points([(v, F(rng.randint(-6, 6), rng.randint(1, 3))) for v in D.vertices], n) for D in doms]
        results.append(("push", pushforward_reduction_check(deltas, gs, L)["passed"]))
    # random rational configurations in ℝ³ over a coordinate plane and a coordinate line
    for _ in range(10):
        L = [0, 1]
        deltas = [convex_hull(_embed([(F(rng.randint(0, 6), 2), F(rng.randint(0, 6), 3)) for _ in range(4)] + [(0, 0), (1, 0), (0, 1)], 3, L), 3) for _ in range(2)]
        results.append(("mv", mv_projection_check(deltas, [rand_polytope(rng, 3)], L)["passed"]))
        results.append(("push", pushforward_reduction_check(deltas, [rand_pa(rng, 3), rand_pa(rng, 3)], L)["passed"]))
    for _ in range(6):
        L = [2]
        deltas = [convex_hull(_embed([(0,), (F(rng.randint(1, 5), 2),)], 3, L), 3)]
        results.append(("mv", mv_projection_check(deltas, [rand_polytope(rng, 3) for _ in range(2)], L)["passed"]))
        results.append(("push", pushforward_reduction_check(deltas, [rand_pa(rng, 3) for _ in range(3)], L)["passed"]))
    n_mv = sum(1 for kind, _ in results if kind == "mv")
    n_push = len(results) - n_mv
    failed = sum(1 for _, ok in results if not ok)
    ok = failed == 0 and n_mv >= 20 and n_push >= 20
    record(2, ok, f"{n_mv} product-formula and {n_push} pushforward configurations, {failed} failures")


# -- 3


def _flagship_cli(tmp_path, *extra) -> tuple[int, str]:
    d = tmp_path / "d.json"
    fs = tmp_path / "fs.json"
    out = tmp_path / "out.json"
    d.write_text(json.dumps([{"simplex": 2}]))
    fs.write_text(json.dumps([XY1, XY1]))
    code = cli_main(["toric", "gualdi", "--divisors", str(d), "--polys", str(fs), "--output", str(out), *extra])
    return code, out.read_text() if out.exists() else ""


def test_criterion_3_flagship(tmp_path):
    t0 = time.perf_counter()
    code, text = _flagship_cli(tmp_path)
    dt = time.perf_counter() - t0
    FIRST_RUN["flagship"] = text
    total = float(json.loads(text)["total"]) if code == 0 else math.nan
    ok = code == 0 and abs(total - FLAGSHIP_VALUE) <= 5e-3 and dt <= 600
    record(3, ok, f"total {total:.6f} vs 2ζ(3)/(3ζ(2)) = {FLAGSHIP_VALUE:.6f}, |diff| {abs(total - FLAGSHIP_VALUE):.2e}, {dt:.1f}s")


# -- 4


def test_criterion_4_hypersurface_vs_projective_height():
    rng = random.Random(4)
    P1 = [ToricDivisorData(convex_hull([(0,), (1,)], 1))]
    worst_gap, worst_err, bad = 0.0, 0.0, 0
    for _ in range(20):
        a = rng.choice([-1, 1]) * rng.randint(1, 50)
        b = rng.choice([-1, 1]) * rng.randint(1, 50)
        rep = hypersurface_height(P1, LaurentPolynomial(1, {(0,): a, (1,): b}), QuadratureConfig())
        ref = projective_height(ProjectivePoint.from_rationals([b, -a])).total
        gap = abs(rep.total - ref)
        worst_gap, worst_err = max(worst_gap, gap), max(worst_err, rep.error)
        bad += not (gap <= rep.error and rep.error <= 1e-2)
    record(4, bad == 0, f"20 polynomials a+bx, max |difference| {worst_gap:.2e}, max reported error {worst_err:.2e}, {bad} failures")


# -- 5


def _sylvester_n2_oracle() -> int:
    """Max |coefficient| of Res(a0x²+a1x+a2, b0x²+b1x+b2) by sympy's fraction-free resultant."""
    x = sympy.Symbol("x")
    a, b = sympy.symbols("a0:3"), sympy.symbols("b0:3")
    R = sympy.resultant(a[0] * x**2 + a[1] * x + a[2], b[0] * x**2 + b[1] * x + b[2], x)
    return max(abs(int(c)) for c in sympy.Poly(sympy.expand(R), *a, *b).coeffs())


def test_criterion_5_resultant_convergence():
    rng = random.Random(5)
    points = [[2, 3], [1, 0], [5, -7, 3]] + [[rng.randint(-30, 30) for _ in range(rng.randint(2, 4))] for _ in range(6)]
    points = [p for p in points if math.gcd(*p) == 1]
    point_ok = all(point_row_exact(p, n) for p in points for n in range(1, 11))
    point_ok &= all(r.normalized == math.log(max(abs(x) for x in p)) for p in points for r in convergence_table("point", 10, p))
    rows = convergence_table("sylvester", 5)
    syl_ok = rows[0].normalized == 0 and rows[1].normalized == math.log(2) / 4
    syl_ok &= all(r.normalized <= r.envelope + 1e-12 for r in rows[1:])
    oracle = _sylvester_n2_oracle()
    oracle_ok = oracle == sylvester_resultant_form(2).max_coefficient and math.log(oracle) / 4 == rows[1].normalized
    norm = ", ".join(f"{r.normalized:.4f}" for r in rows)
    record(5, point_ok and syl_ok and oracle_ok, f"{len(points)} points exact for n≤10: {point_ok}; Sylvester n=1..5 normalized [{norm}] under envelope: {syl_ok}; n=2 oracle max coefficient {oracle}: {oracle_ok}")


# -- 6


def test_criterion_6_comparison_bounds():
    t0 = time.perf_counter()
    rep = bound_suite(seed=7, corpus=1000)
    FIRST_RUN["bounds"] = dump(rep)
    violations = rep["total_violations"]
    spheres = []
    for n in (2, 3, 4):
        est = mahler_sphere(PolyC((n,), {tuple([1] + [0] * (n - 1)): 1}), QuadratureConfig(budget=40000, batches=8, seed=n))
        spheres.append(abs(est.value + 0.5 * harmonic(n - 1)) <= 3 * est.stderr)
    cases = [
        (PolyC((1,), {(0,): 1, (1,): 1}), "2"),
        (PolyC((2,), {(0, 0): 1, (1, 0): 1, (0, 1): 1}), "3"),
        (PolyC((1,), {(1,): 2, (0,): 3}), "13"),
        (PolyC((2, 1), {(1, 1, 0): 3, (0, 0, 2): -2, (2, 0, 1): 1}), "14"),
    ]
    parseval = [(r := parseval_check(P, QuadratureConfig(budget=20000, batches=8)))["exact"] == want and r["within_3sigma"] for P, want in cases]
    dt = time.perf_counter() - t0
    ok = violations == 0 and rep["passed"] and all(spheres) and all(parseval)
    record(6, ok, f"{len(rep['configs'])} configurations × 1000 polynomials, {violations} violations; sphere constants n=2,3,4 {spheres}; Parseval {parseval}; {dt:.1f}s")


# -- 7


def test_criterion_7_veronese_gap():
    worst, bad, pairs = -math.inf, [], 0
    for r in (1, 2, 3):
        for n in range(r + 1, 41):
            rep = veronese_gap(r, n, QuadratureConfig(budget=10000, seed=r * 100 + n))
            pairs += 1
            worst = max(worst, rep["observed"] - rep["bound"])
            if not (rep["samples"] >= 10000 and rep["observed"] <= rep["bound"]):
                bad.append((r, n))
    record(7, not bad, f"{pairs} pairs (r,n) with 10⁴ samples, max(observed − r·log n/n) = {worst:.3e}, failures {bad}")


# -- 8


def test_criterion_8_gvf_axioms():
    rep = gvf_axiom_suite(seed=0, samples=1000, max_conductor=24, torsion_max=50)
    FIRST_RUN["axioms"] = dump(rep)
    keys = ("product_formula", "segre", "monotonicity", "symmetry", "torsion_vanishing")
    worst = {k: rep["checks"][k]["max_violation"] for k in keys}
    ok = rep["passed"] and all(v <= 1e-9 for v in worst.values())
    record(8, ok, "1000 samples, N ≤ 24, torsion N ≤ 50; max residuals " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# -- 9


def _experiment():
    f = LaurentPolynomial(2, {(0, 0): 1, (1, 0): 1, (0, 1): 1})
    # a few extra draws cover the rare degenerate ones, keeping ≥ 200 valid
    return torsion_experiment([f, f], [101, 401, 1201], samples=220, seed=0, limit=FLAGSHIP_VALUE)


def test_criterion_9_torsion_experiment():
    t0 = time.perf_counter()
    out = _experiment()
    FIRST_RUN["experiment"] = dump(out)
    rep = out["report"]
    produced = rep["heights_finite_nonnegative"] and all(e["valid"] >= 200 for e in rep["per_N"])
    trend = bool(rep["deviation_nonincreasing"])
    means = ", ".join(f"N={e['N']}: mean {e['mean']} ({e['valid']} valid)" for e in rep["per_N"])
    dt = time.perf_counter() - t0
    # non-blocking: a broken trend is reported, not asserted
    record(9, produced and trend, f"{means}; deviation non-increasing: {trend}; {dt:.1f}s (exploratory)", blocking=False)
    assert produced


# -- 10


def test_criterion_10_determinism(tmp_path):
    missing = [k for k in ("flagship", "bounds", "axioms", "experiment") if k not in FIRST_RUN]
    if missing:
        pytest.skip(f"needs the earlier criteria in the same session: {missing}")
    again = {
        "flagship": _flagship_cli(tmp_path)[1],
        "bounds": dump(bound_suite(seed=7, corpus=1000)),
        "axioms": dump(gvf_axiom_suite(seed=0, samples=1000, max_conductor=24, torsion_max=50)),
        "experiment": dump(_experiment()),
    }
    same = {k: again[k] == FIRST_RUN[k] for k in again}
    record(10, all(same.values()), "byte-identical reruns: " + ", ".join(f"{k} {v}" for k, v in same.items()))


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items(), key=lambda kv: int(kv[0].split("_")[2]) if kv[0].startswith("test_criterion_") else 0) if k.startswith("test_criterion_")]
    for t in tests:
        kwargs = {"tmp_path": Path(tempfile.mkdtemp())} if "tmp_path" in t.__code__.co_varnames[: t.__code__.co_argcount] else {}
        try:
            t(**kwargs)
        except AssertionError:
            pass
