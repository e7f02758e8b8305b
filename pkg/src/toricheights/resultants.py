"""Resultant forms of two small families and their heights.

Two cases are built.  The first is a point p ∈ ℙʳ under the n-th Veronese map,
which gives a linear form.  The second is ℙ¹ with two copies of the n-th Veronese
embedding, which gives the classical resultant of two binary forms of degree n.
Heights are taken of the coefficient tuple.  The sphere-integral (Fubini–Study)
variant is estimated by Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from .mahler import harmonic
from .numeric import QuadratureConfig, batch_rngs, fmt_real

__all__ = [
    "SYLVESTER_CAP",
    "MultiForm",
    "ConvergenceRow",
    "sylvester_resultant_form",
    "point_resultant_form",
    "form_height",
    "fs_height_estimate",
    "fs_comparison_bound",
    "convergence_table",
    "veronese_monomials",
    "veronese_gap",
]

SYLVESTER_CAP = 6


@dataclass(frozen=True)
class MultiForm:
    """Integer multihomogeneous form; group i has size r_i+1 and degree δ_i."""

    groups: tuple
    terms: dict

    def __post_init__(self):
        groups = tuple((int(s), int(d)) for s, d in self.groups)
        nv = sum(s for s, _ in groups)
        clean = {}
        for e, c in self.terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != nv:
                raise ValueError("exponent length does not match the groups")
            if int(c):
                clean[e] = int(c)
        if not clean:
            raise ValueError("zero form")
        off = 0
        for s, d in groups:
            for e in clean:
                if sum(e[off : off + s]) != d or any(x < 0 for x in e[off : off + s]):
                    raise ValueError("term is not of the declared multidegree")
            off += s
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def nvars(self) -> int:
        return sum(s for s, _ in self.groups)

    @property
    def content(self) -> int:
        return reduce(math.gcd, (abs(c) for c in self.terms.values()))

    @property
    def max_coefficient(self) -> int:
        return max(abs(c) for c in self.terms.values())

    def multidegree(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.groups)

    def evaluate(self, values: Sequence) -> Fraction:
        """Exact value at rational (or integer) coordinates, concatenated over groups."""
        vals = [Fraction(v) for v in values]
        if len(vals) != self.nvars:
            raise ValueError("wrong number of coordinates")
        total = Fraction(0)
        for e, c in self.terms.items():
            t = Fraction(c)
            for v, k in zip(vals, e):
                if k:
                    t *= v**k
            total += t
        return total

    def to_json(self) -> dict:
        return {
            "groups": [{"size": s, "degree": d} for s, d in self.groups],
            "content": self.content,
            "terms": [{"exp": list(e), "coef": c} for e, c in self.terms.items()],
        }

    @staticmethod
    def from_json(obj: dict) -> "MultiForm":
        groups = [(g["size"], g["degree"]) for g in obj["groups"]]
        return MultiForm(tuple(groups), {tuple(t["exp"]): int(t["coef"]) for t in obj["terms"]})


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    height: float
    normalized: float
    envelope: float | None

    def to_json(self) -> dict:
        return {"n": self.n, "height": fmt_real(self.height), "normalized": fmt_real(self.normalized), "envelope": None if self.envelope is None else fmt_real(self.envelope)}


def sylvester_resultant_form(n: int) -> MultiForm:
    """Resultant of a_0 x^n + … + a_n y^n and b_0 x^n + … + b_n y^n as an integer form.

    Expanded by Laplace along rows with the determinants of trailing row blocks
    memoised by column set.  Every matrix entry is a single variable, so each
    step only shifts exponents and the expansion stays exact without division.
    """
    if not isinstance(n, int) or n < 1:
        raise ValueError("n must be a positive integer")
    if n > SYLVESTER_CAP:
        raise ValueError(f"n = {n} exceeds the cap {SYLVESTER_CAP}")
    size = 2 * n
    nv = 2 * (n + 1)
    base = n + 1
    shift = [base**k for k in range(nv)]

    # row i < n holds a_j at column i+j; row n+i holds b_j at column i+j
    def entry(row: int, col: int) -> int | None:
        off = row if row < n else row - n
        j = col - off
        if 0 <= j <= n:
            return j if row < n else n + 1 + j
        return None

    # keyed by the bitmask of unused columns; the row index is implied by its popcount
    memo: dict[int, dict[int, int]] = {}

    def det(row: int, cols: int) -> dict[int, int]:
        if row == size:
            return {0: 1}
        hit = memo.get(cols)
        if hit is not None:
            return hit
        out: dict[int, int] = {}
        sign = 1
        c = 0
        bits = cols
        while bits:
            if bits & 1:
                var = entry(row, c)
                if var is not None:
                    sub = det(row + 1, cols & ~(1 << c))
                    s = shift[var]
                    for k, v in sub.items():
                        kk = k + s
                        nvv = out.get(kk, 0) + sign * v
                        if nvv:
                            out[kk] = nvv
                        else:
                            out.pop(kk, None)
                sign = -sign
            bits >>= 1
            c += 1
        memo[cols] = out
        return out

    poly = det(0, (1 << size) - 1)
    terms = {}
    for k, v in poly.items():
        e = []
        for _ in range(nv):
            k, r = divmod(k, base)
            e.append(r)
        terms[tuple(e)] = v
    return MultiForm(((n + 1, n), (n + 1, n)), terms)


def veronese_monomials(r: int, n: int) -> list[tuple[int, ...]]:
    """Exponent vectors of degree n in r+1 variables, lexicographically decreasing."""
    out = []
    for combo in combinations_with_replacement(range(r + 1), n):
        e = [0] * (r + 1)
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return out


def point_resultant_form(p: Sequence[int], n: int) -> MultiForm:
    """Linear form Σ_I p^I·w_I on the degree-n monomials of ℙʳ."""
    p = [int(x) for x in p]
    if not p or all(x == 0 for x in p):
        raise ValueError("zero point")
    if reduce(math.gcd, (abs(x) for x in p)) != 1:
        raise ValueError("point coordinates must be coprime")
    if n < 1:
        raise ValueError("n must be positive")
    mons = veronese_monomials(len(p) - 1, n)
    terms = {}
    for i, I in enumerate(mons):
        c = 1
        for x, k in zip(p, I):
            c *= x**k
        if c:
            e = [0] * len(mons)
            e[i] = 1
            terms[tuple(e)] = c
    return MultiForm(((len(mons), 1),), terms)


def form_height(R: MultiForm) -> float:
    """log(max|coefficient| / content)."""
    return math.log(Fraction(R.max_coefficient, R.content))


def fs_comparison_bound(R: MultiForm) -> float:
    """Σ δ_i (log(r_i+1) + H_{r_i−1}); group i lives on the sphere of ℂ^{r_i+1}."""
    return sum(d * (math.log(s) + harmonic(s - 2)) for s, d in R.groups)


def _log_abs_values(E: np.ndarray, c: np.ndarray, Z: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """log|R(z)| for rows of Z via exp(E·log z); zero coordinates are excluded by sampling."""
    L = np.log(Z)
    out = np.empty(Z.shape[0])
    step = max(1, int(2**22 // max(1, E.shape[0])))
    for s in range(0, Z.shape[0], step):
        V = np.exp(L[s : s + step] @ E.T) @ c
        out[s : s + step] = np.log(np.abs(V))
    return out


def fs_height_estimate(R: MultiForm, cfg: QuadratureConfig | None = None, *, max_stderr: float | None = None) -> dict:
    """−log(content) + ∫ log|R| over the product of unit spheres + ½ Σ δ_i H_{r_i}."""
    cfg = cfg or QuadratureConfig()
    if cfg.batches < 2:
        raise ValueError("at least two batches are needed for an error estimate")
    E = np.array(list(R.terms), dtype=float)
    c = np.array(list(R.terms.values()), dtype=float)
    per = max(1, cfg.budget // cfg.batches)
    means = []
    for rng in batch_rngs(cfg.seed, cfg.batches, stream=41):
        blocks = []
        for s, _ in R.groups:
            Z = rng.standard_normal((per, s)) + 1j * rng.standard_normal((per, s))
            blocks.append(Z / np.linalg.norm(Z, axis=1, keepdims=True))
        vals = _log_abs_values(E, c, np.concatenate(blocks, axis=1))
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            raise ArithmeticError("form vanished on every sample")
        means.append(float(vals.mean()))
    means = np.array(means)
    sphere = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(len(means)))
    if max_stderr is not None and not se <= max_stderr:
        raise ArithmeticError(f"standard error {se:.3g} above the target {max_stderr:.3g}")
    finite = -math.log(R.content)
    correction = 0.5 * sum(d * harmonic(s - 1) for s, d in R.groups)
    return {"value": finite + sphere + correction, "stderr": se, "finite": finite, "sphere": sphere, "correction": correction, "samples": per * cfg.batches, "seed": cfg.seed}


def convergence_table(case: str, n_max: int, point: Sequence[int] | None = None) -> list[ConvergenceRow]:
    """Rows n = 1..n_max of h(R_n) and h(R_n)/n^{d+1} (d = 0 for a point, 1 for ℙ¹).

    For the Sylvester case the envelope C·log n/n uses C fitted at n = 2, so it
    needs n_max ≥ 2.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    rows: list[ConvergenceRow] = []
    if case == "point":
        if point is None:
            raise ValueError("point case needs coordinates")
        for n in range(1, n_max + 1):
            R = point_resultant_form(point, n)
            h = form_height(R)
            root = _exact_root(R.max_coefficient, n) if R.content == 1 else None
            rows.append(ConvergenceRow(n, h, math.log(root) if root else h / n, None))
        return rows
    if case != "sylvester":
        raise ValueError(f"unknown case {case!r}")
    if n_max > SYLVESTER_CAP:
        raise ValueError(f"n = {n_max} exceeds the cap {SYLVESTER_CAP}")
    hs = [form_height(sylvester_resultant_form(n)) for n in range(1, n_max + 1)]
    C = hs[1] / 4 * 2 / math.log(2) if n_max >= 2 else None
    for n, h in enumerate(hs, start=1):
        rows.append(ConvergenceRow(n, h, h / n**2, None if C is None else C * math.log(n) / n))
    return rows


def _exact_root(x: int, n: int) -> int | None:
    r = round(x ** (1.0 / n))
    for c in (r - 1, r, r + 1):
        if c > 0 and c**n == x:
            return c
    return None


def point_row_exact(p: Sequence[int], n: int) -> bool:
    """Integer check that h(R_n)/n equals h(p): max coefficient is max|p|^n and content is 1."""
    R = point_resultant_form(p, n)
    return R.content == 1 and R.max_coefficient == max(abs(int(x)) for x in p) ** n


def _complete_homogeneous(y: np.ndarray, n: int) -> np.ndarray:
    h = np.zeros((n + 1, y.shape[0]))
    h[0] = 1.0
    for j in range(y.shape[1]):
        for k in range(1, n + 1):
            h[k] += y[:, j] * h[k - 1]
    return h[n]


def veronese_gap(r: int, n: int, cfg: QuadratureConfig | None = None, points: np.ndarray | None = None) -> dict:
    """Sampled sup over the sphere of |log max|z_i| − (1/2n)·log Σ_{|I|=n}|z^I|²|.

    With y = |z|²/max|z|² the quantity equals (1/2n)·log h_n(y), where h_n is the
    complete homogeneous symmetric polynomial, so it is never negative.
    """
    if r < 1 or n < r + 1:
        raise ValueError("need r ≥ 1 and n ≥ r+1")
    cfg = cfg or QuadratureConfig()
    if points is None:
        rng = batch_rngs(cfg.seed, 1, stream=43)[0]
        Z = rng.standard_normal((cfg.budget, r + 1)) + 1j * rng.standard_normal((cfg.budget, r + 1))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    else:
        Z = np.atleast_2d(np.asarray(points, dtype=complex))
    a2 = np.abs(Z) ** 2
    y = a2 / a2.max(axis=1, keepdims=True)
    gaps = np.log(_complete_homogeneous(y, n)) / (2 * n)
    sup_attainable = math.log(math.comb(r + n, n)) / (2 * n)
    bound = r * math.log(n) / n
    observed = float(gaps.max())
    return {
        "r": r,
        "n": n,
        "samples": int(Z.shape[0]),
        "observed": observed,
        "sup_bound": sup_attainable,
        "bound": bound,
        "within": bool(observed <= sup_attainable + 1e-12 and sup_attainable <= bound + 1e-12),
    }
