"""Heights of toric divisors and hypersurfaces as sums over places of mixed integrals of roof functions.

A divisor is a polytope Δ ⊂ ℝⁿ plus roof functions at finitely many places.  Every
other place carries the zero function on Δ (the canonical metric), whose mixed
integrals vanish, so only finitely many places need evaluating.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import sympy

from .concave import (
    ONE,
    PAConcave,
    SampledConcave,
    Scale,
    ScaledRational,
    direct_image,
    indicator,
    mixed_integral,
)
from .heights import Cyclotomic, ProjectivePoint, _units, projective_height
from .numeric import Estimate, QuadratureConfig, fmt_real
from .polytope import LinearMapQ, Polytope, mixed_volume, project, simplex
from .ronkin import _DEFAULT_STEPS, ARCHIMEDEAN, LaurentPolynomial, PlaceQ, prime_place, ronkin_roof, roof_window

__all__ = [
    "ToricDivisorData",
    "HeightReport",
    "PlaceContribution",
    "toric_height",
    "hypersurface_height",
    "gualdi_limit",
    "FLAGSHIP_VALUE",
    "flagship_value",
    "mv_projection_check",
    "pushforward_reduction_check",
    "torsion_experiment",
    "relevant_places",
]


def flagship_value(terms: int = 200000) -> float:
    """2ζ(3)/(3ζ(2)) from partial sums with integral tail corrections."""
    z2 = sum(1.0 / k**2 for k in range(terms, 0, -1)) + 1.0 / terms - 0.5 / terms**2
    z3 = sum(1.0 / k**3 for k in range(terms, 0, -1)) + 0.5 / terms**2 - 0.5 / terms**3
    return 2 * z3 / (3 * z2)


FLAGSHIP_VALUE = 2 * 1.2020569031595942 / (3 * math.pi**2 / 6)


def _place_key(v: PlaceQ) -> tuple:
    return (0, 0) if v.is_archimedean else (1, 0) if v.kind == "trivial" else (2, v.p)


@dataclass(frozen=True)
class ToricDivisorData:
    """Polytope plus roof functions at explicitly non-canonical places."""

    polytope: Polytope
    roofs: Mapping = field(default_factory=dict)

    def __post_init__(self):
        roofs = {}
        for v, f in dict(self.roofs).items():
            v = v if isinstance(v, PlaceQ) else PlaceQ.parse(v)
            if f.domain != self.polytope:
                raise ValueError(f"roof at place {v.label()} does not live on the divisor polytope")
            roofs[v] = f
        object.__setattr__(self, "roofs", dict(sorted(roofs.items(), key=lambda kv: _place_key(kv[0]))))

    @property
    def dim(self) -> int:
        return self.polytope.ambient_dim

    def roof(self, v: PlaceQ):
        return self.roofs.get(v) or indicator(self.polytope)

    def places(self) -> list[PlaceQ]:
        return list(self.roofs)

    @staticmethod
    def canonical(P: Polytope) -> "ToricDivisorData":
        return ToricDivisorData(P, {})

    @staticmethod
    def from_json(obj: dict) -> "ToricDivisorData":
        if not isinstance(obj, dict):
            raise ValueError("divisor JSON must be an object")
        if "simplex" in obj:
            P = simplex(int(obj["simplex"]), obj.get("scale", 1))
        elif "polytope" in obj:
            P = Polytope.from_json(obj["polytope"])
        else:
            raise ValueError("divisor JSON needs 'polytope' or 'simplex'")
        roofs = {}
        for label, fobj in (obj.get("roofs") or {}).items():
            f = PAConcave.from_json({"domain": P.to_json(), **fobj} if "domain" not in fobj else fobj)
            roofs[PlaceQ.parse(label)] = f
        return ToricDivisorData(P, roofs)

    def to_json(self) -> dict:
        return {"polytope": self.polytope.to_json(), "roofs": {v.label(): f.to_json() for v, f in self.roofs.items()}}


@dataclass(frozen=True)
class PlaceContribution:
    place: str
    value: float
    error: float
    exact: str | None = None

    def to_json(self) -> dict:
        out = {"place": self.place, "value": fmt_real(self.value), "error": fmt_real(self.error)}
        if self.exact is not None:
            out["exact"] = self.exact
        return out


@dataclass(frozen=True)
class HeightReport:
    contributions: tuple
    total: float
    error: float
    exact: str | None = None
    extra: dict = field(default_factory=dict)

    @staticmethod
    def build(contribs: Sequence[PlaceContribution], extra: dict | None = None) -> "HeightReport":
        total = math.fsum(c.value for c in contribs)
        err = math.fsum(c.error for c in contribs)
        exact = None
        if all(c.exact is not None for c in contribs):
            parts = [c.exact for c in contribs if c.exact != "0"]
            exact = " + ".join(parts) if parts else "0"
            collapsed = _log_total(parts)
            if collapsed is not None:
                total = collapsed
        return HeightReport(tuple(contribs), total, err, exact, dict(extra or {}))

    def to_json(self) -> dict:
        out = {
            "contributions": [c.to_json() for c in self.contributions],
            "total": fmt_real(self.total),
            "error": fmt_real(self.error),
        }
        if self.exact is not None:
            out["exact"] = self.exact
        out.update(self.extra)
        return out


_LOG_TERM = re.compile(r"^(-?\d+(?:/\d+)?)\*log\((\d+(?:/\d+)?)\)$")


def _log_total(parts: Sequence[str]) -> float | None:
    """Sum of q·log(r) terms via prime exponents, so cancelling logs give exactly 0."""
    by_prime: dict[int, Fraction] = {}
    for part in parts:
        for term in part.split(" + "):
            m = _LOG_TERM.match(term)
            if m is None:
                return None
            q, r = Fraction(m.group(1)), Fraction(m.group(2))
            for num, sign in ((r.numerator, 1), (r.denominator, -1)):
                for p, k in sympy.factorint(num).items():
                    by_prime[p] = by_prime.get(p, Fraction(0)) + sign * k * q
    return math.fsum(float(c) * math.log(p) for p, c in sorted(by_prime.items()) if c)


def _contribution(v: PlaceQ, value) -> PlaceContribution:
    if isinstance(value, Fraction):
        return PlaceContribution(v.label(), float(value), 0.0, str(value))
    if isinstance(value, ScaledRational):
        return PlaceContribution(v.label(), float(value), 0.0, str(value) if value.q else "0")
    est = value if isinstance(value, Estimate) else Estimate(float(value), 0.0)
    return PlaceContribution(v.label(), est.value, est.error)


def _check_slots(Ds: Sequence[ToricDivisorData], extra: int) -> int:
    if not Ds and not extra:
        raise ValueError("no slots")
    n = Ds[0].dim if Ds else None
    for D in Ds:
        if D.dim != n:
            raise ValueError("divisors live in different dimensions")
    return n


def toric_height(Ds: Sequence[ToricDivisorData]) -> HeightReport:
    """Σ over the non-canonical places of MI(θ_0,v, …, θ_n,v)."""
    Ds = list(Ds)
    n = _check_slots(Ds, 0)
    if len(Ds) != n + 1:
        raise ValueError(f"ℝ^{n} needs {n + 1} divisors, got {len(Ds)}")
    places = sorted({v for D in Ds for v in D.places()}, key=_place_key)
    contribs = [_contribution(v, mixed_integral([D.roof(v) for D in Ds])) for v in places]
    return HeightReport.build(contribs)


def _coefficient_primes(fs: Sequence[LaurentPolynomial]) -> set[int]:
    primes: set[int] = set()
    for f in fs:
        for c in f.terms.values():
            for x in (abs(c.numerator), c.denominator):
                if x > 1:
                    primes |= set(sympy.factorint(x))
    return primes


def relevant_places(Ds: Sequence[ToricDivisorData], fs: Sequence[LaurentPolynomial]) -> list[PlaceQ]:
    """Divisor places, primes of the coefficients and the archimedean place."""
    places = {v for D in Ds for v in D.places()}
    if fs:
        places.add(ARCHIMEDEAN)
        places |= {prime_place(p) for p in _coefficient_primes(fs)}
    return sorted(places, key=_place_key)


def _roof(f: LaurentPolynomial, v: PlaceQ, cfg: QuadratureConfig, window: float | None):
    """Roof of the Ronkin function; a monomial c·x^m gives the exact point function log|c|_v at m."""
    if len(f.terms) == 1 and v.is_archimedean:
        (m, c), = f.terms.items()
        a = abs(c)
        pt = tuple(Fraction(x) for x in m)
        if a == 1:
            return PAConcave(f.nvars, points=[(pt, Fraction(0))])
        big = a if a > 1 else 1 / a
        label = f"log({big.numerator}/{big.denominator})" if big.denominator != 1 else f"log({big.numerator})"
        return PAConcave(f.nvars, points=[(pt, Fraction(1 if a > 1 else -1))], unit=Scale(label, math.log(big)))
    return ronkin_roof(f, v, cfg, window=window)


def gualdi_limit(
    Ds: Sequence[ToricDivisorData],
    fs: Sequence[LaurentPolynomial],
    cfg: QuadratureConfig | None = None,
    *,
    tol: float | None = None,
) -> HeightReport:
    """Σ_v MI(θ_0,v, …, θ_{n−m},v, ρ_1,v^∨, …, ρ_m,v^∨) with Ronkin roofs for the polynomials.

    With m = 0 this is toric_height.  The archimedean roofs share one sampling
    window so their primal grids coincide.  When ``tol`` is given and the error
    bound exceeds it, a refined evaluation (doubled budget, halved m-step) is
    run and |difference| is reported as ``estimated_error``.
    """
    Ds, fs = list(Ds), list(fs)
    if not fs:
        return toric_height(Ds)
    n = fs[0].nvars
    for f in fs:
        if f.nvars != n:
            raise ValueError("polynomials have different numbers of variables")
    if Ds and _check_slots(Ds, len(fs)) != n:
        raise ValueError("divisors and polynomials live in different dimensions")
    if len(Ds) + len(fs) != n + 1:
        raise ValueError(f"ℝ^{n} needs n+1 = {n + 1} slots, got {len(Ds)} divisors and {len(fs)} polynomials")
    cfg = cfg or QuadratureConfig()
    report = _gualdi_eval(Ds, fs, cfg)
    if tol is None:
        return report
    extra = {"tol": fmt_real(tol)}
    if report.error <= tol:
        extra.update({"estimated_error": fmt_real(report.error), "meets_tol": True})
    else:
        hm = cfg.m_step or _DEFAULT_STEPS.get(n, (0.5, 0.1))[1]
        fine = _gualdi_eval(Ds, fs, cfg.replace(budget=2 * cfg.budget, m_step=hm / 2))
        est = abs(fine.total - report.total)
        extra.update({"refined_total": fmt_real(fine.total), "estimated_error": fmt_real(est), "meets_tol": bool(est <= tol)})
    return HeightReport(report.contributions, report.total, report.error, report.exact, extra)


def _gualdi_eval(Ds, fs, cfg) -> HeightReport:
    arch = [f for f in fs if len(f.terms) > 1]
    window = max((roof_window(f, cfg) for f in arch), default=None)
    contribs = []
    for v in relevant_places(Ds, fs):
        cache: dict = {}
        roofs = [D.roof(v) for D in Ds]
        for f in fs:
            if f not in cache:
                cache[f] = _roof(f, v, cfg, window)
            roofs.append(cache[f])
        contribs.append(_contribution(v, mixed_integral(roofs)))
    return HeightReport.build(contribs)


def hypersurface_height(Ds: Sequence[ToricDivisorData], f: LaurentPolynomial, cfg: QuadratureConfig | None = None) -> HeightReport:
    """Height of the zero locus of f: n divisors plus the Ronkin roof of f in the last slot."""
    return gualdi_limit(Ds, [f], cfg)


# ---------------------------------------------------------------------------
# projection lemmas


def _split(n: int, subspace: Sequence[int]) -> tuple[list[int], list[int]]:
    L = sorted(set(int(i) for i in subspace))
    if any(i < 0 or i >= n for i in L):
        raise ValueError("subspace coordinates out of range")
    return L, [i for i in range(n) if i not in L]


def _inside(P: Polytope, rest: Sequence[int]) -> bool:
    return all(v[i] == 0 for v in P.vertices for i in rest)


def mv_projection_check(deltas: Sequence[Polytope], qs: Sequence[Polytope], subspace: Sequence[int]) -> dict:
    """MV_M(Δ's, Q's) = MV_L(Δ's)·MV_P(π(Q)'s) for Δ's inside the coordinate subspace L."""
    deltas, qs = list(deltas), list(qs)
    n = (deltas or qs)[0].ambient_dim
    L, rest = _split(n, subspace)
    if len(deltas) != len(L) or len(deltas) + len(qs) != n:
        raise ValueError("need dim L polytopes in L and n − dim L others")
    if not all(_inside(D, rest) for D in deltas):
        raise ValueError("the Δ's must lie in the coordinate subspace")
    toL = LinearMapQ.coordinate_projection(n, L)
    pi = LinearMapQ.coordinate_projection(n, rest)
    lhs = mixed_volume(deltas + qs)
    mv_l = mixed_volume([project(D, toL) for D in deltas])
    mv_p = mixed_volume([project(Q, pi) for Q in qs])
    rhs = mv_l * mv_p
    return {"lhs": _fr(lhs), "mv_L": _fr(mv_l), "mv_P": _fr(mv_p), "rhs": _fr(rhs), "passed": lhs == rhs}


def _fr(x: Fraction) -> str:
    return str(x)


def _pushforward(pi: LinearMapQ, g: PAConcave) -> PAConcave:
    if pi.target_dim == 0:
        return PAConcave(0, points=[((), max(h for _, h in g.points))], unit=g.unit, exact=g.exact)
    return direct_image(pi, g)


def pushforward_reduction_check(deltas: Sequence[Polytope], gs: Sequence[PAConcave], subspace: Sequence[int]) -> dict:
    """MI_M(ι_Δ's, g's) = MV_L(Δ's)·MI_P(π_* g's) for exact (piecewise-affine) g's."""
    deltas, gs = list(deltas), list(gs)
    if any(isinstance(g, SampledConcave) for g in gs):
        raise ValueError("the exact check needs piecewise-affine functions")
    n = (deltas[0] if deltas else gs[0]).ambient_dim
    L, rest = _split(n, subspace)
    if len(deltas) != len(L) or len(deltas) + len(gs) != n + 1:
        raise ValueError("need dim L polytopes in L and n − dim L + 1 functions")
    if not all(_inside(D, rest) for D in deltas):
        raise ValueError("the Δ's must lie in the coordinate subspace")
    toL = LinearMapQ.coordinate_projection(n, L)
    pi = LinearMapQ.coordinate_projection(n, rest)
    lhs = mixed_integral([indicator(D) for D in deltas] + gs)
    mv_l = mixed_volume([project(D, toL) for D in deltas])
    mi_p = mixed_integral([_pushforward(pi, g) for g in gs])
    rhs = _times(mi_p, mv_l)
    return {"lhs": str(_as_exact(lhs)), "mv_L": _fr(mv_l), "mi_P": str(_as_exact(mi_p)), "rhs": str(_as_exact(rhs)), "passed": _as_exact(lhs) == _as_exact(rhs)}


def _as_exact(x):
    if isinstance(x, Fraction):
        return ScaledRational(x, ONE)
    if isinstance(x, ScaledRational) and x.q == 0:
        return ScaledRational(Fraction(0), ONE)
    return x


def _times(x, c: Fraction):
    if isinstance(x, Fraction):
        return x * c
    if isinstance(x, ScaledRational):
        return ScaledRational(x.q * c, x.unit)
    return x.scaled(float(c))


# ---------------------------------------------------------------------------
# torsion experiment


def _linear_coefficients(f: LaurentPolynomial, n: int) -> tuple[Fraction, list[Fraction]]:
    const = Fraction(0)
    lin = [Fraction(0)] * n
    for e, c in f.terms.items():
        if not any(e):
            const = c
        elif sorted(e) == [0] * (n - 1) + [1]:
            lin[e.index(1)] = c
        else:
            raise ValueError("torsion experiment needs affine-linear polynomials")
    return const, lin


def _det(M: list[list[Cyclotomic]]) -> Cyclotomic:
    """Laplace expansion along the first row; fine for the small systems used here."""
    if len(M) == 1:
        return M[0][0]
    total = Cyclotomic.rational(M[0][0].conductor, 0)
    for j, a in enumerate(M[0]):
        if a.is_zero():
            continue
        term = a * _det([row[:j] + row[j + 1 :] for row in M[1:]])
        total = total + term if j % 2 == 0 else total - term
    return total


def torsion_experiment(
    fs: Sequence[LaurentPolynomial],
    conductors: Sequence[int],
    samples: int = 200,
    seed: int = 0,
    precision: float = 1e-9,
    limit: float | None = None,
) -> dict:
    """Heights of the solutions of f_i(ζ_i,1 x_1, …, ζ_i,n x_n) = 0 for random primitive N-th roots ζ.

    Solutions are computed exactly over ℚ(ζ_N) by Cramer's rule as the point
    [det A : det A_1 : … : det A_n].  Draws with det A = 0 or a zero coordinate
    (the solution leaves the torus) are discarded and counted.
    """
    fs = list(fs)
    n = len(fs)
    if n == 0 or any(f.nvars != n for f in fs):
        raise ValueError("need n affine-linear polynomials in n variables")
    if samples < 1:
        raise ValueError("samples must be positive")
    data = [_linear_coefficients(f, n) for f in fs]
    rows = []
    summary = []
    for N in conductors:
        N = int(N)
        if N < 1:
            raise ValueError("conductors must be positive")
        units = _units(N)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, N]))
        heights = []
        singular = off_torus = 0
        for draw in range(samples):
            ks = [[int(units[i]) for i in rng.integers(0, len(units), n)] for _ in range(n)]
            A = [[Cyclotomic.from_exponents(N, {ks[i][j]: data[i][1][j]}) for j in range(n)] for i in range(n)]
            b = [Cyclotomic.rational(N, -data[i][0]) for i in range(n)]
            d = _det(A)
            if d.is_zero():
                singular += 1
                rows.append((N, draw, ks, None))
                continue
            coords = [d]
            for j in range(n):
                Aj = [r[:j] + [b[i]] + r[j + 1 :] for i, r in enumerate(A)]
                coords.append(_det(Aj))
            if any(c.is_zero() for c in coords[1:]):
                off_torus += 1
                rows.append((N, draw, ks, None))
                continue
            hb = projective_height(ProjectivePoint(N, tuple(coords)), precision)
            heights.append(hb.total)
            rows.append((N, draw, ks, hb.total))
        entry = {"N": N, "draws": samples, "valid": len(heights), "degenerate": singular + off_torus, "singular": singular, "off_torus": off_torus}
        if heights:
            mean = math.fsum(heights) / len(heights)
            entry.update({"mean": mean, "min": min(heights), "max": max(heights)})
            if limit is not None:
                entry["deviation"] = abs(mean - limit)
        summary.append(entry)
    devs = [e["deviation"] for e in summary if "deviation" in e]
    report = {
        "seed": seed,
        "samples": samples,
        "limit": None if limit is None else fmt_real(limit),
        "per_N": [{k: (fmt_real(v) if isinstance(v, float) else v) for k, v in e.items()} for e in summary],
        "all_degenerate": all(e["valid"] == 0 for e in summary),
        "heights_finite_nonnegative": all(h is None or (math.isfinite(h) and h >= -1e-9) for *_, h in rows),
        "deviation_nonincreasing": all(a >= b for a, b in zip(devs, devs[1:])) if len(devs) == len(summary) else None,
    }
    return {"report": report, "rows": rows}


def experiment_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "draw", "exponents", "height"])
    for N, draw, ks, h in rows:
        w.writerow([N, draw, ";".join(",".join(map(str, r)) for r in ks), "degenerate" if h is None else fmt_real(h)])
    return buf.getvalue()
