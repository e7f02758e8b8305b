"""Mahler measures on the torus, on unit spheres and on products of spheres, with the
coefficient-norm comparison bounds as executable validators.

Conventions: for P in n variables, m(P) integrates log|P| over the unit torus; on
the unit sphere 𝕊_n ⊂ ℂⁿ the measure is the normalised spherical one.  Variables
are split into groups; the mixed measure integrates over one sphere per group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy
from scipy.optimize import minimize

from .numeric import QuadratureConfig, batch_rngs, fmt_real
from .polytope import to_fraction
from .ronkin import torus_log_mean

__all__ = [
    "PolyC",
    "EstimateResult",
    "harmonic",
    "norm_inf",
    "mahler_torus",
    "mahler_univariate_exact",
    "mahler_sphere",
    "mahler_multisphere",
    "sup_polydisc",
    "parseval_check",
    "bound_suite",
    "random_poly",
]


def harmonic(k: int) -> float:
    return sum(1.0 / j for j in range(1, k + 1))


def _coef(c) -> tuple[Fraction, Fraction]:
    if isinstance(c, tuple) and len(c) == 2 and all(isinstance(x, Fraction) for x in c):
        return c
    if isinstance(c, dict):
        if set(c) - {"re", "im"}:
            raise ValueError("complex coefficients are objects with 're' and 'im'")
        return to_fraction(c.get("re", 0)), to_fraction(c.get("im", 0))
    if isinstance(c, complex):
        return to_fraction(c.real), to_fraction(c.imag)
    return to_fraction(c), Fraction(0)


@dataclass(frozen=True)
class PolyC:
    """Polynomial with (complex) rational coefficients in grouped variables; exponents ≥ 0."""

    groups: tuple
    terms: dict

    def __post_init__(self):
        groups = tuple(int(g) for g in self.groups)
        if any(g < 1 for g in groups):
            raise ValueError("group sizes must be positive")
        nv = sum(groups)
        clean: dict = {}
        for e, c in self.terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != nv or any(x < 0 for x in e):
                raise ValueError(f"bad exponent {e}")
            re, im = _coef(c)
            if e in clean:
                re, im = re + clean[e][0], im + clean[e][1]
            clean[e] = (re, im)
        clean = {e: c for e, c in sorted(clean.items()) if c != (0, 0)}
        if not clean:
            raise ValueError("the zero polynomial is not allowed")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "terms", clean)

    @staticmethod
    def single(terms: dict, nvars: int | None = None) -> "PolyC":
        n = nvars if nvars is not None else len(next(iter(terms)))
        return PolyC((n,), terms) if n else PolyC((1,), {(0,): c for c in terms.values()})

    @property
    def nvars(self) -> int:
        return sum(self.groups)

    def _slices(self):
        s = 0
        for g in self.groups:
            yield slice(s, s + g)
            s += g

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(max(sum(e[sl]) for e in self.terms) for sl in self._slices())

    @property
    def total_degree(self) -> int:
        return max(sum(e) for e in self.terms)

    def is_real(self) -> bool:
        return all(c[1] == 0 for c in self.terms.values())

    def exponent_array(self) -> np.ndarray:
        return np.array(list(self.terms), dtype=np.int64).reshape(len(self.terms), self.nvars)

    def coefficient_array(self) -> np.ndarray:
        return np.array([complex(float(a), float(b)) for a, b in self.terms.values()])

    def __mul__(self, other: "PolyC") -> "PolyC":
        if other.groups != self.groups:
            raise ValueError("group structure mismatch")
        out: dict = {}
        for e1, (a1, b1) in self.terms.items():
            for e2, (a2, b2) in other.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                re, im = out.get(e, (Fraction(0), Fraction(0)))
                out[e] = (re + a1 * a2 - b1 * b2, im + a1 * b2 + a2 * b1)
        return PolyC(self.groups, out)

    def rotate(self, angles: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Exponents and float coefficients of P(e^{iθ_1}X_1, …)."""
        E = self.exponent_array()
        return E, self.coefficient_array() * np.exp(1j * (E @ np.asarray(angles, dtype=float)))

    def evaluate(self, Z: np.ndarray, coefs: np.ndarray | None = None) -> np.ndarray:
        """P at the rows of Z (samples × nvars, complex)."""
        E = self.exponent_array()
        c = self.coefficient_array() if coefs is None else coefs
        out = np.zeros(Z.shape[0], dtype=complex)
        dmax = int(E.max()) if E.size else 0
        pw = [np.ones_like(Z)]
        for _ in range(dmax):
            pw.append(pw[-1] * Z)
        pw = np.stack(pw)  # (d+1) × S × n
        for t in range(E.shape[0]):
            mono = np.ones(Z.shape[0], dtype=complex)
            for j in range(E.shape[1]):
                if E[t, j]:
                    mono = mono * pw[E[t, j], :, j]
            out += c[t] * mono
        return out

    @staticmethod
    def from_json(obj: dict) -> "PolyC":
        if not isinstance(obj, dict) or "terms" not in obj:
            raise ValueError("polynomial JSON needs 'terms'")
        if "groups" in obj:
            groups = tuple(obj["groups"])
        elif "vars" in obj:
            groups = (int(obj["vars"]),)
        else:
            raise ValueError("polynomial JSON needs 'groups' or 'vars'")
        terms: dict = {}
        for t in obj["terms"]:
            e = tuple(t["exp"])
            if any(not isinstance(x, int) or isinstance(x, bool) for x in e):
                raise ValueError("exponents must be integers")
            re, im = _coef(t["coef"])
            if e in terms:
                re, im = re + terms[e][0], im + terms[e][1]
            terms[e] = (re, im)
        return PolyC(groups, terms)

    def to_json(self) -> dict:
        def fr(x: Fraction) -> str:
            return str(x)

        return {
            "groups": list(self.groups),
            "terms": [{"exp": list(e), "coef": fr(a) if b == 0 else {"re": fr(a), "im": fr(b)}} for e, (a, b) in self.terms.items()],
        }


@dataclass(frozen=True)
class EstimateResult:
    value: float
    stderr: float
    samples: int
    seed: int
    error_kind: str = "stderr"

    def to_json(self) -> dict:
        return {"value": fmt_real(self.value), "error": fmt_real(self.stderr), "error_kind": self.error_kind, "samples": self.samples, "seed": self.seed}


def norm_inf(P: PolyC) -> float:
    """‖P‖ = max |coefficient|."""
    return max(math.hypot(float(a), float(b)) for a, b in P.terms.values())


def _constant_value(P: PolyC) -> complex | None:
    if len(P.terms) == 1:
        e, (a, b) = next(iter(P.terms.items()))
        if not any(e):
            return complex(float(a), float(b))
    return None


def _dominant_constant(P: PolyC) -> float | None:
    """log|c_0| when |c_0| > Σ_{k≠0} |c_k|: then log(1 + (P−c_0)/c_0) is analytic on the polydisc with mean 0."""
    zero = (0,) * P.nvars
    if zero not in P.terms:
        return None
    a, b = P.terms[zero]
    c0 = a * a + b * b
    rest = sum(math.hypot(float(x), float(y)) for e, (x, y) in P.terms.items() if e != zero)
    # exact comparison of |c_0| against the float sum with a safety margin
    if float(c0) > (rest * (1 + 1e-12)) ** 2:
        return 0.5 * math.log(c0)
    return None


def mahler_torus(P: PolyC, cfg: QuadratureConfig | None = None, method: str = "auto") -> EstimateResult:
    """∫ log|P| over the unit torus.

    ``auto`` uses roots when a single variable occurs (the stderr field then holds the
    root-enclosure bound) and otherwise a randomly shifted lattice rule with Jensen's
    formula applied in one variable. ``qmc`` always samples, with no closed-form shortcuts.
    """
    if method not in ("auto", "qmc"):
        raise ValueError(f"unknown method {method!r}")
    cfg = cfg or QuadratureConfig()
    c = _constant_value(P)
    if c is not None:
        return EstimateResult(math.log(abs(c)), 0.0, 0, cfg.seed)
    E = P.exponent_array()
    live = [j for j in range(P.nvars) if E[:, j].any()]
    if method == "auto":
        c0 = _dominant_constant(P)
        if c0 is not None:
            return EstimateResult(c0, 0.0, 0, cfg.seed, "exact")
        if len(live) == 1:
            j = live[0]
            Q = PolyC((1,), {(e[j],): v for e, v in P.terms.items()})
            try:
                value, err = mahler_univariate_exact(Q)
                return EstimateResult(value, err, 0, cfg.seed, "bound")
            except ArithmeticError:
                pass
    means, se = torus_log_mean(E[:, live], P.coefficient_array(), np.zeros((1, len(live))), cfg, jensen=method == "auto" and len(live) > 1, stream=11)
    if not np.isfinite(means[0]):
        raise ArithmeticError("quadrature failed: log|P| is −∞ on every node")
    return EstimateResult(float(means[0]), float(se[0]), cfg.budget // cfg.batches * cfg.batches, cfg.seed)


def mahler_univariate_exact(P: PolyC) -> tuple[float, float]:
    """m(P) = log|lead| + Σ max(0, log|α|) for one variable, with an error bound.

    Rational P is first split into squarefree factors (exactly), so each root
    finder call sees simple roots; roots are polished by Newton steps and each
    carries the bound deg·|P(α)/P'(α)| (a root lies within that distance).
    """
    if P.nvars != 1:
        raise ValueError("univariate polynomial expected")
    if P.total_degree < 1:
        raise ValueError("degree ≥ 1 expected")
    if P.is_real():
        x = sympy.Symbol("x")
        expr = sum(sympy.Rational(a.numerator, a.denominator) * x ** e[0] for e, (a, _) in P.terms.items())
        lead, factors = sympy.sqf_list(sympy.Poly(expr, x, domain="QQ"))
        value = math.log(abs(float(lead)))
        err = 0.0
        for f, mult in factors:
            cs = [complex(float(c)) for c in f.all_coeffs()]
            v, e = _jensen_from_coeffs(cs)
            value += mult * v
            err += mult * e
        return value, float(err)
    d = P.total_degree
    cs = [0j] * (d + 1)
    for e, (a, b) in P.terms.items():
        cs[d - e[0]] += complex(float(a), float(b))
    return _jensen_from_coeffs(cs)


def _jensen_from_coeffs(cs: list[complex]) -> tuple[float, float]:
    """cs high degree first."""
    while cs and cs[0] == 0:
        cs = cs[1:]
    d = len(cs) - 1
    value = math.log(abs(cs[0]))
    if d == 0:
        return value, 0.0
    roots = np.roots(cs)
    poly = np.poly1d(cs)
    dpoly = poly.deriv()
    err = 0.0
    for r in roots:
        for _ in range(4):
            dv = dpoly(r)
            if dv == 0:
                break
            r = r - poly(r) / dv
        dv = dpoly(r)
        rad = d * abs(poly(r)) / abs(dv) if dv != 0 else math.inf
        rad += 4 * np.finfo(float).eps * abs(r)
        if not math.isfinite(rad) or rad > 1e-6 * max(1.0, abs(r)):
            raise ArithmeticError("root refinement failed to certify")
        a = abs(r)
        value += max(0.0, math.log(a)) if a > 0 else 0.0
        err += rad / max(1.0, a - rad) if a + rad > 1 else 0.0
    return value, float(err)


def _sphere_points(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    Z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def mahler_multisphere(P: PolyC, partition: Sequence[int] | None = None, cfg: QuadratureConfig | None = None) -> EstimateResult:
    """Monte Carlo estimate of ∫ log|P| over 𝕊_{m_1} × … × 𝕊_{m_k} (normalised complex Gaussians per group)."""
    cfg = cfg or QuadratureConfig()
    parts = tuple(partition) if partition is not None else P.groups
    if sum(parts) != P.nvars:
        raise ValueError("partition does not match the variable count")
    c = _constant_value(P)
    if c is not None:
        return EstimateResult(math.log(abs(c)), 0.0, 0, cfg.seed)
    per = max(1, cfg.budget // cfg.batches)
    means = []
    for rng in batch_rngs(cfg.seed, cfg.batches, stream=23):
        Z = np.concatenate([_sphere_points(rng, per, m) for m in parts], axis=1)
        vals = np.abs(P.evaluate(Z))
        vals = vals[vals > 0]
        if vals.size == 0:
            raise ArithmeticError("integrand vanished on every sample")
        means.append(float(np.mean(np.log(vals))))
    means = np.array(means)
    return EstimateResult(float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means))), per * cfg.batches, cfg.seed)


def mahler_sphere(P: PolyC, cfg: QuadratureConfig | None = None) -> EstimateResult:
    """∫ log|P| over the unit sphere of ℂⁿ, all variables in one group."""
    return mahler_multisphere(P, (P.nvars,), cfg)


def sup_polydisc(P: PolyC, cfg: QuadratureConfig | None = None) -> dict:
    """Lower-biased estimate of S(P) = sup over the closed unit polydisc of |P| (attained on the torus)."""
    cfg = cfg or QuadratureConfig()
    n = P.nvars
    E = P.exponent_array().astype(float)
    c = P.coefficient_array()
    rng = batch_rngs(cfg.seed, 1, stream=31)[0]
    T = rng.random((max(cfg.budget, 16), n))
    vals = np.abs(np.exp(2j * np.pi * T @ E.T) @ c)
    best = float(vals.max())
    for i in np.argsort(-vals)[:4]:
        f = lambda t: -float(np.abs(np.exp(2j * np.pi * (E @ t)) @ c))
        res = minimize(f, T[i], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -float(res.fun))
    nrm = norm_inf(P)
    d = P.total_degree
    l1 = float(sum(math.hypot(float(a), float(b)) for a, b in P.terms.values()))
    return {
        "estimate": best,
        "upper_bracket": l1,
        "enclosure_low": nrm,
        "enclosure_high": math.comb(n + d, n) * nrm,
        "consistent": nrm <= l1 * (1 + 1e-12) and best <= math.comb(n + d, n) * nrm * (1 + 1e-12),
    }


def parseval_check(P: PolyC, cfg: QuadratureConfig | None = None) -> dict:
    """Plain Monte Carlo ∫|P|² over the torus against the exact Σ|a_k|²."""
    cfg = cfg or QuadratureConfig()
    exact = sum(a * a + b * b for a, b in P.terms.values())
    E = P.exponent_array().astype(float)
    c = P.coefficient_array()
    per = max(1, cfg.budget // cfg.batches)
    means = []
    for rng in batch_rngs(cfg.seed, cfg.batches, stream=37):
        T = rng.random((per, P.nvars))
        means.append(float(np.mean(np.abs(np.exp(2j * np.pi * T @ E.T) @ c) ** 2)))
    means = np.array(means)
    est = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(len(means)))
    z = (est - float(exact)) / se if se > 0 else (0.0 if abs(est - float(exact)) < 1e-9 else math.inf)
    return {"exact": str(exact), "estimate": est, "stderr": se, "z": z, "within_3sigma": abs(z) <= 3}


# ---------------------------------------------------------------------------
# bound suite


def random_poly(
    rng: np.random.Generator,
    groups: Sequence[int],
    max_degree: int = 4,
    max_terms: int = 12,
    coef_range: int = 9,
    homogeneous: bool = False,
) -> PolyC:
    """Sparse random integer polynomial; each group gets a degree in 1..max_degree that some term attains.

    With ``homogeneous`` every term has exactly the group degrees.
    """
    groups = tuple(groups)
    degs = [int(rng.integers(1, max_degree + 1)) for _ in groups]
    nterms = int(rng.integers(1, max_terms + 1))

    def block(g: int, total: int) -> list[int]:
        cuts = np.sort(rng.integers(0, total + 1, g - 1)) if g > 1 else np.array([], dtype=int)
        parts = np.diff(np.concatenate(([0], cuts, [total])))
        return [int(x) for x in parts]

    terms: dict = {}
    for t in range(nterms + len(groups)):
        e: list[int] = []
        for gi, g in enumerate(groups):
            top = degs[gi] if t == 0 or homogeneous else int(rng.integers(0, degs[gi] + 1))
            e += block(g, top)
        c = 0
        while c == 0:
            c = int(rng.integers(-coef_range, coef_range + 1))
        terms[tuple(e)] = terms.get(tuple(e), 0) + c
    terms = {e: c for e, c in terms.items() if c != 0}
    if not terms:
        return random_poly(rng, groups, max_degree, max_terms, coef_range, homogeneous)
    P = PolyC(groups, terms)
    return P


def _log_multinomial(d: int, k: Sequence[int]) -> float:
    rest = d - sum(k)
    return math.lgamma(d + 1) - sum(math.lgamma(x + 1) for x in k) - math.lgamma(rest + 1)


DEFAULT_CONFIGS = ((1,), (2,), (3,), (1, 1), (2, 2), (3, 3), (1, 2, 3), (3, 3, 3))


def bound_suite(
    seed: int = 0,
    corpus: int = 1000,
    configs: Sequence[Sequence[int]] = DEFAULT_CONFIGS,
    cfg: QuadratureConfig | None = None,
    sphere_samples: int = 20000,
) -> dict:
    """Check the coefficient, torus, sphere and mixed comparison bounds on random integer corpora.

    A bound counts as violated only if it fails by more than three standard errors.
    """
    if corpus < 1:
        raise ValueError("corpus size must be at least 1")
    cfg = cfg or QuadratureConfig(budget=1024, batches=8, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 97]))
    report = {"seed": seed, "corpus": corpus, "configs": []}
    total_viol = 0
    for groups in configs:
        groups = tuple(groups)
        viol = {"coefficient": 0, "torus": 0, "sphere": 0, "mixed": 0}
        slack = {k: math.inf for k in viol}
        for i in range(corpus):
            P = random_poly(rng, groups)
            sub = cfg.replace(seed=(seed * 1000003 + i) & 0xFFFFFFFF)
            n = P.nvars
            d = P.total_degree
            lognorm = math.log(norm_inf(P))
            mt = mahler_torus(P, sub)
            ms = mahler_sphere(P, sub)
            mm = mahler_multisphere(P, groups, sub)
            # coefficient bound: log|a_k| − log C(d;k) ≤ m(P)
            worst = max(math.log(math.hypot(float(a), float(b))) - _log_multinomial(d, k) for k, (a, b) in P.terms.items())
            checks = {
                "coefficient": (worst - mt.value, 0.0, mt.stderr),
                "torus": (abs(mt.value - lognorm), d * math.log(n + 1), mt.stderr),
                "sphere": (abs(ms.value - lognorm), 2 * d * math.log(n + 1), ms.stderr),
                "mixed": (
                    abs(mm.value - lognorm),
                    sum(di * (math.log(mi + 1) + 0.5 * harmonic(mi - 1)) for di, mi in zip(P.degrees, groups)),
                    mm.stderr,
                ),
            }
            for k, (lhs, bound, se) in checks.items():
                s = bound + 3 * se + 1e-9 * (1 + abs(bound)) - lhs
                slack[k] = min(slack[k], s)
                if s < 0:
                    viol[k] += 1
        # homogeneous polynomials: n+1 may be replaced by n in the torus bound
        hom_viol, hom_slack = 0, math.inf
        for i in range(max(1, corpus // 4)):
            P = random_poly(rng, groups, homogeneous=True)
            mt = mahler_torus(P, cfg.replace(seed=(seed * 1000003 + corpus + i) & 0xFFFFFFFF))
            bound = P.total_degree * math.log(P.nvars)
            s = bound + 3 * mt.stderr + 1e-9 * (1 + bound) - abs(mt.value - math.log(norm_inf(P)))
            hom_slack = min(hom_slack, s)
            hom_viol += s < 0
        viol["torus_homogeneous"] = int(hom_viol)
        slack["torus_homogeneous"] = hom_slack
        total_viol += sum(viol.values())
        report["configs"].append({"groups": list(groups), "violations": viol, "min_slack": {k: fmt_real(v) for k, v in slack.items()}})
    # sphere constant −½ H_{n−1} for the coordinate function z_0
    consts = []
    for n in (2, 3, 4):
        P = PolyC((n,), {tuple([1] + [0] * (n - 1)): 1})
        est = mahler_sphere(P, QuadratureConfig(budget=sphere_samples, batches=8, seed=seed))
        target = -0.5 * harmonic(n - 1)
        consts.append({"n": n, "estimate": fmt_real(est.value), "stderr": fmt_real(est.stderr), "target": fmt_real(target), "within_3sigma": abs(est.value - target) <= 3 * est.stderr})
    # Parseval
    pars = []
    for terms in ({(0,): 1, (1,): 1}, {(0, 0): 1, (1, 0): 1, (0, 1): 1}, {(1,): 2, (0,): 3}):
        P = PolyC((len(next(iter(terms))),), terms)
        r = parseval_check(P, QuadratureConfig(budget=sphere_samples, batches=8, seed=seed))
        pars.append({"poly": P.to_json(), **{k: (fmt_real(v) if isinstance(v, float) else v) for k, v in r.items()}})
    report["sphere_constants"] = consts
    report["parseval"] = pars
    report["total_violations"] = total_viol
    report["passed"] = total_viol == 0 and all(c["within_3sigma"] for c in consts) and all(p["within_3sigma"] for p in pars)
    return report
