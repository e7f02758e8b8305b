"""Ronkin functions of Laurent polynomials at the places of ℚ and their roof functions.

Tropical convention: trop(x) = −log|x|, so the fiber over u ∈ ℝⁿ is the torus
|x_i| = e^{−u_i} and ρ_f(u) = −∫ log|f| over that fiber.  At a prime p this is
the piecewise-affine min_m (v_p(c_m)·log p + ⟨m,u⟩); at the archimedean place it
is computed by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .concave import ONE, GridFunction, PAConcave, SampledConcave, direct_image, legendre_dual, log_scale
from .numeric import Estimate, QuadratureConfig, batch_rngs, lattice_points, lattice_rule
from .polytope import LinearMapQ, Polytope, newton_polytope, to_fraction

__all__ = [
    "LaurentPolynomial",
    "PlaceQ",
    "QuadratureConfig",
    "ARCHIMEDEAN",
    "TRIVIAL",
    "prime_place",
    "valuation",
    "tropical_ronkin",
    "ronkin_roof",
    "arch_ronkin_value",
    "arch_ronkin_grid",
    "roof_window",
    "pushforward_check",
    "torus_log_mean",
]


# ---------------------------------------------------------------------------
# Laurent polynomials


@dataclass(frozen=True)
class LaurentPolynomial:
    """Finite map exponent ∈ ℤⁿ ↦ nonzero rational coefficient."""

    nvars: int
    terms: dict

    def __post_init__(self):
        clean = {}
        for e, c in self.terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != self.nvars:
                raise ValueError(f"exponent {e} does not have {self.nvars} entries")
            c = to_fraction(c)
            if c != 0:
                clean[e] = clean.get(e, Fraction(0)) + c
        clean = {e: c for e, c in sorted(clean.items()) if c != 0}
        if not clean:
            raise ValueError("the zero polynomial is not allowed here")
        object.__setattr__(self, "terms", clean)

    def __hash__(self) -> int:
        return hash((self.nvars, tuple(self.terms.items())))

    @staticmethod
    def from_json(obj: dict) -> "LaurentPolynomial":
        if not isinstance(obj, dict) or "vars" not in obj or "terms" not in obj:
            raise ValueError("Laurent polynomial JSON needs 'vars' and 'terms'")
        n = obj["vars"]
        if not isinstance(n, int) or n < 0:
            raise ValueError("'vars' must be a natural number")
        terms: dict = {}
        for t in obj["terms"]:
            e = tuple(t["exp"])
            if any(not isinstance(x, int) or isinstance(x, bool) for x in e):
                raise ValueError("exponents must be integers")
            terms[e] = terms.get(e, Fraction(0)) + to_fraction(t["coef"])
        return LaurentPolynomial(n, terms)

    def to_json(self) -> dict:
        return {
            "vars": self.nvars,
            "terms": [{"exp": list(e), "coef": str(c)} for e, c in self.terms.items()],
        }

    def __mul__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        if other.nvars != self.nvars:
            raise ValueError("variable count mismatch")
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return LaurentPolynomial(self.nvars, out)

    def map_exponents(self, gamma: Sequence[Sequence[int]]) -> "LaurentPolynomial":
        """K[γ](f): x^m ↦ x^{γm} for an integer matrix γ (rows = target coordinates)."""
        rows = [tuple(int(x) for x in r) for r in gamma]
        out: dict = {}
        for e, c in self.terms.items():
            img = tuple(sum(r[j] * e[j] for j in range(self.nvars)) for r in rows)
            out[img] = out.get(img, Fraction(0)) + c
        return LaurentPolynomial(len(rows), out)

    def exponent_array(self) -> np.ndarray:
        return np.array(list(self.terms), dtype=np.int64).reshape(len(self.terms), self.nvars)

    def coefficient_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.terms.values()], dtype=complex)

    def newton_polytope(self) -> Polytope:
        return newton_polytope(self)


# ---------------------------------------------------------------------------
# places


@dataclass(frozen=True)
class PlaceQ:
    """A place of ℚ: 'archimedean', 'prime' (with p) or the degenerate 'trivial' valuation."""

    kind: str
    p: int | None = None

    def __post_init__(self):
        if self.kind == "prime":
            if self.p is None or self.p < 2 or any(self.p % q == 0 for q in range(2, int(math.isqrt(self.p)) + 1)):
                raise ValueError(f"{self.p} is not a prime")
        elif self.kind in ("archimedean", "trivial"):
            if self.p is not None:
                raise ValueError("only prime places carry p")
        else:
            raise ValueError(f"unknown place kind {self.kind!r}")

    @property
    def is_archimedean(self) -> bool:
        return self.kind == "archimedean"

    def label(self) -> str:
        return {"archimedean": "inf", "trivial": "trivial"}.get(self.kind, str(self.p))

    @staticmethod
    def parse(s) -> "PlaceQ":
        s = str(s).strip().lower()
        if s in ("inf", "infinity", "arch", "archimedean", "∞"):
            return ARCHIMEDEAN
        if s in ("trivial", "0"):
            return TRIVIAL
        try:
            return PlaceQ("prime", int(s))
        except ValueError as exc:
            raise ValueError(f"cannot parse place {s!r}") from exc


ARCHIMEDEAN = PlaceQ("archimedean")
TRIVIAL = PlaceQ("trivial")


def prime_place(p: int) -> PlaceQ:
    return PlaceQ("prime", p)


def _vp(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def valuation(c: Fraction, v: PlaceQ) -> Fraction:
    """−log|c|_v in units of log p (prime), 0 (trivial); exact integers."""
    c = to_fraction(c)
    if c == 0:
        raise ValueError("valuation of zero")
    if v.kind == "trivial":
        return Fraction(0)
    if v.kind == "prime":
        return Fraction(_vp(abs(c.numerator), v.p) - _vp(c.denominator, v.p))
    raise ValueError("use log|c| at the archimedean place")


def tropical_ronkin(f: LaurentPolynomial, v: PlaceQ) -> PAConcave:
    """ρ_f(u) = min_m (v(c_m) + ⟨m,u⟩) at a non-archimedean or trivial place."""
    if v.is_archimedean:
        raise ValueError("the tropical Ronkin function is only defined at non-archimedean places")
    unit = log_scale(v.p) if v.kind == "prime" else ONE
    pieces = [(tuple(Fraction(x) for x in e), valuation(c, v)) for e, c in f.terms.items()]
    return PAConcave.from_pieces(pieces, ambient_dim=f.nvars, unit=unit)


# ---------------------------------------------------------------------------
# archimedean quadrature


def _reduction_variable(exps: np.ndarray) -> int | None:
    spans = [int(exps[:, j].max() - exps[:, j].min()) for j in range(exps.shape[1])]
    live = [j for j in range(len(spans)) if spans[j] > 0]
    if not live:
        return None
    best = min(spans[j] for j in live)
    return max(j for j in live if spans[j] == best)


def _log_mean_circle(coeffs: np.ndarray, log_r: np.ndarray) -> np.ndarray:
    """Mean of log|Σ_k coeffs[...,k] y^k| over |y| = r (Jensen), coefficients low → high degree.

    Returns NaN where the leading coefficient vanishes exactly.
    """
    d = coeffs.shape[-1] - 1
    lead = coeffs[..., d]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.abs(lead)) + d * log_r
        if d == 1:
            roots = [-coeffs[..., 0] / lead]
        elif d == 2:
            a, b, c = lead, coeffs[..., 1], coeffs[..., 0]
            disc = np.sqrt(b * b - 4 * a * c + 0j)
            sgn = np.where(np.real(np.conj(b) * disc) >= 0, 1.0, -1.0)
            q = -0.5 * (b + sgn * disc)
            r1 = q / a
            r2 = np.where(q != 0, c / np.where(q != 0, q, 1), 0)
            roots = [r1, r2]
        elif d > 2:
            flat = coeffs.reshape(-1, d + 1)
            lf = flat[:, d]
            good = lf != 0
            comp = np.zeros((flat.shape[0], d, d), dtype=complex)
            comp[:, 0, :] = -flat[:, d - 1 :: -1] / np.where(good, lf, 1)[:, None]
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
            ev = np.linalg.eigvals(comp)
            roots = [ev[:, j].reshape(coeffs.shape[:-1]) for j in range(d)]
        else:
            roots = []
        for r in roots:
            out = out + np.maximum(np.log(np.abs(r)), log_r) - log_r
    out = np.where(lead == 0, np.nan, out)
    return out


def torus_log_mean(
    exps: np.ndarray,
    coefs: np.ndarray,
    U: np.ndarray,
    cfg: QuadratureConfig,
    *,
    jensen: bool = True,
    stream: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """∫ log|Σ c_e x^e| over the tori |x_i| = e^{−U_i}, for each row of U.

    With ``jensen`` the integral in one variable is done exactly by Jensen's
    formula and the remaining ones by a randomly shifted rank-1 lattice rule.
    Returns (means, batch standard errors).
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    G, n = U.shape
    j = _reduction_variable(exps) if jensen else None
    if jensen and (j is None or n == 1):
        # monomial, or a single variable: exact
        means = _jensen_block(exps, coefs, U, np.zeros((1, max(n - 1, 0))), j)[:, 0] if j is not None else (
            np.log(np.abs(coefs[0])) - U @ exps[0].astype(float)
        )
        return means, np.zeros(G)
    qdim = n - 1 if j is not None else n
    B = cfg.batches
    per = max(1, cfg.budget // B)
    npts, z = lattice_rule(per, qdim) if cfg.scheme == "rank1-lattice" else (per, None)
    rngs = batch_rngs(cfg.seed, B, stream)
    batch_means = np.empty((B, G))
    chunk = max(1, int(4e6 // max(1, npts * len(coefs))))
    for b, rng in enumerate(rngs):
        if cfg.scheme == "rank1-lattice":
            T = lattice_points(npts, z, rng.random(qdim))
        else:
            T = rng.random((npts, qdim))
        for s in range(0, G, chunk):
            Ub = U[s : s + chunk]
            if j is not None:
                vals = _jensen_block(exps, coefs, Ub, T, j)
            else:
                vals = _direct_block(exps, coefs, Ub, T)
            batch_means[b, s : s + chunk] = _nanmean_rows(vals)
    means = batch_means.mean(axis=0)
    stderr = batch_means.std(axis=0, ddof=1) / math.sqrt(B)
    return means, stderr


def _nanmean_rows(vals: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(vals)
    if not bad.any():
        return vals.mean(axis=1)
    # exact zeros of the integrand are rejected (a measure-zero event)
    v = np.where(bad, 0.0, vals)
    cnt = np.maximum((~bad).sum(axis=1), 1)
    return v.sum(axis=1) / cnt


def _direct_block(exps, coefs, U, T) -> np.ndarray:
    e = exps.astype(float)
    A = np.exp(-U @ e.T) * coefs[None, :]  # G × terms
    Bm = np.exp(2j * np.pi * (T @ e.T))  # N × terms
    vals = A @ Bm.T
    with np.errstate(divide="ignore"):
        return np.log(np.abs(vals))


def _jensen_block(exps, coefs, U, T, j) -> np.ndarray:
    """Jensen in variable j, lattice nodes T over the other variables.  Shape G × N."""
    others = [i for i in range(exps.shape[1]) if i != j]
    ej = exps[:, j]
    kmin, kmax = int(ej.min()), int(ej.max())
    eo = exps[:, others].astype(float)
    Uo = U[:, others]
    A = np.exp(-Uo @ eo.T) * coefs[None, :]  # G × terms
    Bm = np.exp(2j * np.pi * (T @ eo.T))  # N × terms
    G, N = U.shape[0], T.shape[0]
    C = np.zeros((G, N, kmax - kmin + 1), dtype=complex)
    for deg in range(kmin, kmax + 1):
        sel = ej == deg
        if sel.any():
            C[:, :, deg - kmin] = A[:, sel] @ Bm[:, sel].T
    log_r = -U[:, j][:, None]
    return _log_mean_circle(C, np.broadcast_to(log_r, (G, N))) + kmin * log_r


def arch_ronkin_value(f: LaurentPolynomial, u: Sequence, cfg: QuadratureConfig | None = None) -> Estimate:
    """ρ_f(u) = −∫ log|f| over the torus |x_i| = e^{−u_i}, with batch standard error."""
    cfg = cfg or QuadratureConfig()
    u = np.array([float(to_fraction(x)) if not isinstance(x, float) else x for x in u], dtype=float)
    if u.size != f.nvars:
        raise ValueError("u has the wrong length")
    means, se = torus_log_mean(f.exponent_array(), f.coefficient_array(), u[None, :], cfg)
    if not np.isfinite(means[0]):
        raise ArithmeticError("quadrature failed: the integrand vanishes on every node")
    return Estimate(float(-means[0]), float(se[0]), "stderr")


def arch_ronkin_grid(f: LaurentPolynomial, axes: Sequence[np.ndarray], cfg: QuadratureConfig) -> GridFunction:
    """ρ_f on a tensor grid; stored error is 3× the largest batch standard error (plus roundoff)."""
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    U = mesh.reshape(-1, f.nvars)
    means, se = torus_log_mean(f.exponent_array(), f.coefficient_array(), U, cfg)
    if not np.all(np.isfinite(means)):
        raise ArithmeticError("quadrature failed on part of the sampling window")
    vals = (-means).reshape(mesh.shape[:-1])
    local = 3.0 * se.reshape(vals.shape) + 1e-12 * (1.0 + np.abs(vals))
    step = np.array([a[1] - a[0] if a.size > 1 else 1.0 for a in axes])
    return GridFunction(np.array([a[0] for a in axes]), step, vals, float(np.max(local)), None, local)


_DEFAULT_STEPS = {1: (1 / 4096, 1 / 8192), 2: (0.05, 0.01), 3: (0.25, 0.05)}


def roof_window(f: LaurentPolynomial, cfg: QuadratureConfig) -> float:
    """Radius of the sampling box: coefficient log-spread scaled by dimension, plus a margin."""
    logs = [math.log(abs(float(c))) for c in f.terms.values()]
    spread = max(logs) - min(logs)
    return f.nvars * spread + cfg.window_margin + math.log(len(logs))


def ronkin_roof(f: LaurentPolynomial, v: PlaceQ, cfg: QuadratureConfig | None = None, *, window: float | None = None):
    """ρ_f^∨ on NP(f): exact at non-archimedean places, sampled at the archimedean place."""
    if not v.is_archimedean:
        return legendre_dual(tropical_ronkin(f, v))
    cfg = cfg or QuadratureConfig()
    n = f.nvars
    NP = newton_polytope(f)
    if n == 0:
        c = float(next(iter(f.terms.values())))
        return SampledConcave(NP, GridFunction(np.zeros(0), np.zeros(0), np.array(math.log(abs(c))), 1e-15))
    du, dm = _DEFAULT_STEPS.get(n, (0.5, 0.1))
    hu = cfg.u_step or du
    hm = cfg.m_step or dm
    R = window if window is not None else roof_window(f, cfg)
    cells = int(math.ceil(2 * R / hu))
    axis = -R + hu * np.arange(cells + 1)
    primal = arch_ronkin_grid(f, [axis] * n, cfg)
    return SampledConcave(NP, primal=primal, m_step=hm)


# ---------------------------------------------------------------------------
# pushforward


def _rank(rows: Sequence[Sequence[int]]) -> int:
    return LinearMapQ.from_rows(rows, len(rows[0]) if rows else 0).rank() if rows else 0


def pushforward_check(
    f: LaurentPolynomial,
    gamma: Sequence[Sequence[int]],
    cfg: QuadratureConfig | None = None,
    *,
    places: Sequence[PlaceQ] | None = None,
    samples: int = 5,
    archimedean: bool = True,
) -> dict:
    """Check ρ_{K[γ]f}(u) = ρ_f(γᵀu) and roof(K[γ]f) = γ_* roof(f).

    γ must be injective: for a non-injective map monomials can merge (e.g. 1+x
    under m ↦ 0 becomes the constant 2) and both identities fail.
    """
    cfg = cfg or QuadratureConfig()
    rows = [tuple(int(x) for x in r) for r in gamma]
    if not rows or any(len(r) != f.nvars for r in rows):
        raise ValueError("γ must be a (target × n) integer matrix")
    if _rank(rows) != f.nvars:
        raise ValueError("γ must be injective")
    g = f.map_exponents(rows)
    gmap = LinearMapQ.from_rows(rows, f.nvars)
    gT = gmap.transpose()
    if places is None:
        primes = set()
        for c in f.terms.values():
            for x in (abs(c.numerator), c.denominator):
                q = 2
                while q * q <= x:
                    while x % q == 0:
                        primes.add(q)
                        x //= q
                    q += 1
                if x > 1:
                    primes.add(x)
        places = [TRIVIAL] + [prime_place(p) for p in sorted(primes | {2})]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7331]))
    checks = []
    us = [tuple(Fraction(int(a), int(b)) for a, b in zip(rng.integers(-20, 21, len(rows)), rng.integers(1, 5, len(rows)))) for _ in range(samples)]
    for v in places:
        rf, rg = tropical_ronkin(f, v), tropical_ronkin(g, v)
        ok = all(rg(u) == rf(gT.apply(u)) for u in us)
        checks.append({"place": v.label(), "identity": "ronkin", "exact": True, "passed": ok})
        ok_roof = ronkin_roof(g, v) == direct_image(gmap, ronkin_roof(f, v))
        checks.append({"place": v.label(), "identity": "roof", "exact": True, "passed": ok_roof})
    if archimedean:
        worst = 0.0
        passed = True
        for i, u in enumerate(us):
            a = arch_ronkin_value(g, u, cfg.replace(seed=cfg.seed + i))
            b = arch_ronkin_value(f, gT.apply(u), cfg.replace(seed=cfg.seed + 1000 + i))
            gap = abs(a.value - b.value)
            tol = 3 * (a.error + b.error) + 1e-9
            worst = max(worst, gap - tol)
            passed &= gap <= tol
        checks.append({"place": "inf", "identity": "ronkin", "exact": False, "passed": bool(passed), "worst_excess": worst})
    return {"image": g.to_json(), "checks": checks, "passed": all(c["passed"] for c in checks)}
