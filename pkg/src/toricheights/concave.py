"""Concave functions on polytopes: conjugates, sup-convolutions, integrals, mixed integrals.

Exact functions (:class:`PAConcave`) are stored either as a minimum of affine
pieces on all of space or, for bounded domains, as the upper concave envelope
of finitely many lifted points (m_i, h_i).  The two encodings are exchanged
by the concave conjugate f^∨(m) = inf_u(⟨m,u⟩ − f(u)).  Heights are exact
rationals in units of a positive real :class:`Scale` (1 or log p), so
p-adic roof functions stay exact.

Sampled functions (:class:`SampledConcave`) carry values on a regular grid
plus, when they arise as conjugates, the primal grid they came from.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence, Union

import numpy as np

from .numeric import Estimate
from .polytope import (
    LinearMapQ,
    Polytope,
    RationalVector,
    _hull_of_ints,
    _lcm_den,
    convex_hull,
    minkowski_sum,
    project,
    to_fraction,
    to_vector,
    volume,
)

__all__ = [
    "Scale",
    "ONE",
    "log_scale",
    "ScaledRational",
    "AffinePiece",
    "PAConcave",
    "GridFunction",
    "SampledConcave",
    "indicator",
    "legendre_dual",
    "dual_sampled",
    "sup_convolution",
    "pointwise_sum",
    "integral",
    "mixed_integral",
    "direct_image",
    "sample_pa",
    "as_estimate",
]


# ---------------------------------------------------------------------------
# units


@dataclass(frozen=True)
class Scale:
    """A positive real unit; exact heights are rational multiples of it."""

    label: str
    value: float

    def __str__(self) -> str:
        return self.label


ONE = Scale("1", 1.0)


def log_scale(p: int) -> Scale:
    return Scale(f"log({p})", math.log(p))


@dataclass(frozen=True)
class ScaledRational:
    """Exact value q·unit."""

    q: Fraction
    unit: Scale = ONE

    def __float__(self) -> float:
        return float(self.q) * self.unit.value

    def __str__(self) -> str:
        if self.unit == ONE:
            return str(self.q)
        return f"{self.q}*{self.unit.label}"


def as_estimate(x) -> Estimate:
    if isinstance(x, Estimate):
        return x
    return Estimate(float(x), 0.0)


# ---------------------------------------------------------------------------
# exact piecewise-affine functions


@dataclass(frozen=True)
class AffinePiece:
    """u ↦ ⟨slope, u⟩ + const."""

    slope: RationalVector
    const: Fraction

    def __call__(self, u: Sequence) -> Fraction:
        return sum((a * to_fraction(b) for a, b in zip(self.slope, u)), Fraction(0)) + self.const


def _upper_envelope(points: Sequence[tuple[RationalVector, Fraction]], n: int):
    """Domain, upper-envelope vertices and upper facets of lifted points.

    Returns (domain, vertices, hypograph, base): vertices are the lifted points
    extreme in the hypograph, which is cut off below at height ``base``.
    """
    best: dict[RationalVector, Fraction] = {}
    for m, h in points:
        m = to_vector(m)
        h = to_fraction(h)
        if len(m) != n:
            raise ValueError("lifted point has the wrong dimension")
        if m not in best or h > best[m]:
            best[m] = h
    domain = convex_hull(best.keys(), n)
    k = len(domain.chart.pivots)
    if k == 0:
        (m, h), = best.items()
        return domain, ((m, h),), None, h
    base = min(best.values()) - 1
    lifted = {tuple(m[p] for p in domain.chart.pivots) + (h,): m for m, h in best.items()}
    floor = [tuple(v[p] for p in domain.chart.pivots) + (base,) for v in domain.vertices]
    hyp = convex_hull(list(lifted) + floor, k + 1)
    verts = tuple(sorted((lifted[v], v[-1]) for v in hyp.vertices if v[-1] > base))
    return domain, verts, hyp, base


def _envelope_pieces(domain: Polytope, hyp: Polytope | None, base: Fraction, n: int) -> tuple[AffinePiece, ...]:
    """Affine functions of the upper facets of the hypograph (slopes vanish off the domain's chart)."""
    if hyp is None:
        return (AffinePiece(tuple(Fraction(0) for _ in range(n)), base),)
    pieces = []
    for a, b in hyp.facets():
        at = a[-1]
        if at <= 0:
            continue
        slope = [Fraction(0)] * n
        for j, p in enumerate(domain.chart.pivots):
            slope[p] = -a[j] / at
        pieces.append(AffinePiece(tuple(slope), b / at))
    return tuple(sorted(pieces, key=lambda q: (q.slope, q.const)))


def _lower_unit(units: Sequence[Scale]) -> Scale | None:
    distinct = {u for u in units if u is not None}
    if len(distinct) > 1:
        return None
    return distinct.pop() if distinct else ONE


class PAConcave:
    """Piecewise-affine concave function, exact.

    Bounded domain: upper envelope of lifted points (``points``); the pieces are
    derived from the upper facets.  Unbounded (domain all of space): minimum of
    ``pieces``.  Values are rational multiples of ``unit``.
    """

    def __init__(self, ambient_dim: int, *, points=None, pieces=None, unit: Scale = ONE, exact: bool = True):
        self.ambient_dim = ambient_dim
        self.unit = unit
        self.exact = exact
        if (points is None) == (pieces is None):
            raise ValueError("give exactly one of points (bounded) or pieces (unbounded)")
        if points is not None:
            pts = list(points)
            if not pts:
                raise ValueError("a concave function needs at least one lifted point")
            self.domain, self.points, self._hyp, self._base = _upper_envelope(pts, ambient_dim)
            self._pieces = None
            self.bounded = True
        else:
            pcs = [p if isinstance(p, AffinePiece) else AffinePiece(to_vector(p[0]), to_fraction(p[1])) for p in pieces]
            if not pcs:
                raise ValueError("a concave function needs at least one affine piece")
            _, verts, _, _ = _upper_envelope([(p.slope, -p.const) for p in pcs], ambient_dim)
            self.domain = None
            self.points = None
            self._pieces = tuple(AffinePiece(m, -h) for m, h in verts)
            self.bounded = False

    @classmethod
    def _from_envelope(cls, n: int, envelope, unit: Scale, exact: bool) -> "PAConcave":
        self = cls.__new__(cls)
        self.ambient_dim, self.unit, self.exact = n, unit, exact
        self.domain, self.points, self._hyp, self._base = envelope
        self._pieces = None
        self.bounded = True
        return self

    # -- constructors
    @staticmethod
    def from_points(points, ambient_dim: int | None = None, unit: Scale = ONE) -> "PAConcave":
        points = [(to_vector(m), to_fraction(h)) for m, h in points]
        n = len(points[0][0]) if ambient_dim is None else ambient_dim
        return PAConcave(n, points=points, unit=unit)

    @staticmethod
    def from_pieces(pieces, domain: Polytope | None = None, ambient_dim: int | None = None, unit: Scale = ONE) -> "PAConcave":
        pcs = [p if isinstance(p, AffinePiece) else AffinePiece(to_vector(p[0]), to_fraction(p[1])) for p in pieces]
        if not pcs:
            raise ValueError("a concave function needs at least one affine piece")
        n = len(pcs[0].slope) if ambient_dim is None else ambient_dim
        if domain is None:
            return PAConcave(n, pieces=pcs, unit=unit)
        if domain.ambient_dim != n:
            raise ValueError("domain dimension differs from the slopes' length")
        return PAConcave(n, points=_lifted_vertices(domain, pcs), unit=unit)

    # -- access
    @property
    def pieces(self) -> tuple[AffinePiece, ...]:
        if self._pieces is None:
            self._pieces = _envelope_pieces(self.domain, self._hyp, self._base, self.ambient_dim)
        return self._pieces

    def __call__(self, u: Sequence) -> Fraction | None:
        """Exact value in units of ``unit``; None outside a bounded domain."""
        u = to_vector(u)
        if self.bounded and not self.domain.contains(u):
            return None
        return min(p(u) for p in self.pieces)

    def value(self, u: Sequence) -> float:
        v = self(u)
        return -math.inf if v is None else float(v) * self.unit.value

    def is_zero(self) -> bool:
        return all(p.const == 0 and all(s == 0 for s in p.slope) for p in self.pieces) if not self.bounded else all(h == 0 for _, h in self.points)

    def with_unit(self, unit: Scale) -> "PAConcave":
        """Re-express in another unit (approximating when the ratio is irrational)."""
        if unit == self.unit or self.is_zero():
            return self._rebuilt(lambda h: h, unit, self.exact)
        ratio = self.unit.value / unit.value
        return self._rebuilt(lambda h: Fraction(float(h) * ratio).limit_denominator(10**12), unit, False)

    def _rebuilt(self, fn, unit: Scale, exact: bool) -> "PAConcave":
        if self.bounded:
            return PAConcave(self.ambient_dim, points=[(m, fn(h)) for m, h in self.points], unit=unit, exact=exact)
        return PAConcave(self.ambient_dim, pieces=[AffinePiece(p.slope, fn(p.const)) for p in self.pieces], unit=unit, exact=exact)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PAConcave) or self.ambient_dim != other.ambient_dim or self.bounded != other.bounded:
            return False
        if self.unit != other.unit and not (self.is_zero() and other.is_zero()):
            return False
        if self.bounded:
            return self.points == other.points
        return self.pieces == other.pieces

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = self._hash = hash((self.ambient_dim, self.points if self.bounded else self.pieces))
        return h

    def __repr__(self) -> str:
        if self.bounded:
            body = ", ".join(f"({','.join(map(str, m))})↦{h}" for m, h in self.points)
            return f"PAConcave(bounded, unit={self.unit}, [{body}])"
        body = ", ".join(f"<{','.join(map(str, p.slope))}>+{p.const}" for p in self.pieces)
        return f"PAConcave(min, unit={self.unit}, [{body}])"

    def to_json(self) -> dict:
        pieces = [{"slope": [_fs(s) for s in p.slope], "const": _fs(p.const)} for p in self.pieces]
        out = {"domain": self.domain.to_json() if self.bounded else None, "pieces": pieces}
        if self.bounded:
            out["points"] = [{"m": [_fs(c) for c in m], "h": _fs(h)} for m, h in self.points]
        if self.unit != ONE:
            out["unit"] = self.unit.label
        return out

    @staticmethod
    def from_json(obj: dict) -> "PAConcave":
        if not isinstance(obj, dict):
            raise ValueError("concave function JSON must be an object")
        unit = _parse_unit(obj.get("unit"))
        dom = obj.get("domain")
        if "points" in obj and dom is not None:
            P = Polytope.from_json(dom)
            pts = [(to_vector(p["m"]), to_fraction(p["h"])) for p in obj["points"]]
            f = PAConcave.from_points(pts, P.ambient_dim, unit)
            if f.domain != P:
                raise ValueError("lifted points do not span the declared domain")
            return f
        if "pieces" not in obj:
            raise ValueError("concave function JSON needs 'pieces'")
        pcs = [AffinePiece(to_vector(p["slope"]), to_fraction(p["const"])) for p in obj["pieces"]]
        if dom is None:
            return PAConcave.from_pieces(pcs, unit=unit)
        P = Polytope.from_json(dom)
        return PAConcave.from_pieces(pcs, P, unit=unit)


def _parse_unit(label) -> Scale:
    if label in (None, "1"):
        return ONE
    if isinstance(label, str) and label.startswith("log(") and label.endswith(")"):
        q = to_fraction(label[4:-1])
        if q <= 1:
            raise ValueError("log unit needs an argument > 1")
        return log_scale(q.numerator) if q.denominator == 1 else Scale(label, math.log(q))
    raise ValueError(f"unknown unit {label!r}")


def _fs(x: Fraction) -> str:
    return str(x)


def _lifted_vertices(domain: Polytope, pieces: Sequence[AffinePiece]) -> list[tuple[RationalVector, Fraction]]:
    """Vertices of {(m,t): m ∈ domain, t ≤ min pieces(m)} via exact vertex enumeration in chart coordinates."""
    ch = domain.chart
    k = len(ch.pivots)
    if k == 0:
        m = domain.vertices[0]
        return [(m, min(p(m) for p in pieces))]
    # pieces restricted to the affine hull, as functions of chart coordinates y
    restricted = []
    for p in pieces:
        # x = base + lift (y − base_piv)
        slope_y = [sum((p.slope[i] * ch.lift[i][j] for i in range(domain.ambient_dim)), Fraction(0)) for j in range(k)]
        const = p(ch.base) - sum((slope_y[j] * ch.base[piv] for j, piv in enumerate(ch.pivots)), Fraction(0))
        restricted.append((slope_y, const))
    floor = min(min(p(v) for p in pieces) for v in domain.vertices) - 1
    # constraints c·(y,t) ≤ d
    cons: list[tuple[list[Fraction], Fraction]] = []
    for a, b in domain.facets():
        cons.append((list(a) + [Fraction(0)], b))
    for sy, c in restricted:
        cons.append(([-s for s in sy] + [Fraction(1)], c))
    cons.append(([Fraction(0)] * k + [Fraction(-1)], -floor))
    found = set()
    for combo in itertools.combinations(range(len(cons)), k + 1):
        sol = _solve([cons[i][0] for i in combo], [cons[i][1] for i in combo])
        if sol is None or sol[-1] <= floor:
            continue
        if all(sum((ai * xi for ai, xi in zip(a, sol)), Fraction(0)) <= b for a, b in cons):
            found.add(tuple(sol))
    return [(domain.from_chart(s[:-1]), s[-1]) for s in found]


def _solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    n = len(A)
    M = [list(r) + [v] for r, v in zip(A, b)]
    for c in range(n):
        p = next((i for i in range(c, n) if M[i][c] != 0), None)
        if p is None:
            return None
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[c])]
    return [M[i][n] for i in range(n)]


def indicator(P: Polytope) -> PAConcave:
    """The zero function on P."""
    return PAConcave(P.ambient_dim, points=[(v, Fraction(0)) for v in P.vertices])


def _common_unit(fs: Sequence[PAConcave]) -> tuple[list[PAConcave], Scale, bool]:
    unit = _lower_unit([None if f.is_zero() else f.unit for f in fs])
    if unit is not None:
        return [f if f.unit == unit else f.with_unit(unit) for f in fs], unit, all(f.exact for f in fs)
    return [f.with_unit(ONE) for f in fs], ONE, False


def legendre_dual(f: PAConcave) -> PAConcave:
    """Concave conjugate; exchanges min-of-pieces and lifted-point encodings."""
    if isinstance(f, SampledConcave):
        return dual_sampled(f)
    if f.bounded:
        return PAConcave(f.ambient_dim, pieces=[AffinePiece(m, -h) for m, h in f.points], unit=f.unit, exact=f.exact)
    return PAConcave(f.ambient_dim, points=[(p.slope, -p.const) for p in f.pieces], unit=f.unit, exact=f.exact)


def pointwise_sum(f: PAConcave, g: PAConcave) -> PAConcave:
    """f + g for functions on all of space (minima of affine pieces)."""
    if f.bounded or g.bounded:
        raise ValueError("pointwise sum is implemented for unbounded domains")
    (f, g), unit, exact = _common_unit([f, g])
    pcs = {AffinePiece(tuple(a + b for a, b in zip(p.slope, q.slope)), p.const + q.const) for p in f.pieces for q in g.pieces}
    return PAConcave(f.ambient_dim, pieces=pcs, unit=unit, exact=exact)


def sup_convolution(f, g):
    """(f ⊞ g)(m) = sup_{m1+m2=m} f(m1)+g(m2)."""
    if isinstance(f, SampledConcave) or isinstance(g, SampledConcave):
        return _sup_convolution_sampled(f, g)
    if f.ambient_dim != g.ambient_dim:
        raise ValueError("sup-convolution of functions in different dimensions")
    if not (f.bounded and g.bounded):
        raise ValueError("sup-convolution needs bounded domains")
    return _sup_convolution_pa(f, g, f.exact, g.exact)


@lru_cache(maxsize=4096)
def _sup_convolution_pa(f: PAConcave, g: PAConcave, f_exact: bool, g_exact: bool) -> PAConcave:
    # the hypograph of f ⊞ g is the Minkowski sum of hypographs: envelope of pairwise sums
    (f, g), unit, exact = _common_unit([f, g])
    n = f.ambient_dim
    if n == 0 or len(f.points) * len(g.points) <= 4:
        pts = [(tuple(a + b for a, b in zip(m1, m2)), h1 + h2) for m1, h1 in f.points for m2, h2 in g.points]
        return PAConcave(n, points=pts, unit=unit, exact=exact)
    # lifted pairwise sums on a common integer grid
    scale = _lcm_den(c for k in (f, g) for m, h in k.points for c in (*m, h))

    def grid(k):
        return [(tuple(c.numerator * (scale // c.denominator) for c in m), h.numerator * (scale // h.denominator)) for m, h in k.points]

    best: dict[tuple[int, ...], int] = {}
    for m1, h1 in grid(f):
        for m2, h2 in grid(g):
            m = tuple(a + b for a, b in zip(m1, m2))
            h = h1 + h2
            if best.get(m, h - 1) < h:
                best[m] = h
    return PAConcave._from_envelope(n, _upper_envelope_ints(best, scale, n), unit, exact)


def _upper_envelope_ints(best: dict[tuple[int, ...], int], scale: int, n: int):
    """``_upper_envelope`` for points m / scale with heights h / scale, one height per m."""
    ms = list(best)
    domain, didx = _hull_of_ints(ms, scale, n)
    piv = domain.chart.pivots
    if not piv:
        m, h = ms[0], best[ms[0]]
        return domain, ((tuple(Fraction(c, scale) for c in m), Fraction(h, scale)),), None, Fraction(h, scale)
    base = min(best.values()) - scale
    lifted = [tuple(m[p] for p in piv) + (best[m],) for m in ms]
    floor = [tuple(ms[i][p] for p in piv) + (base,) for i in didx]
    hyp, hidx = _hull_of_ints(lifted + floor, scale, len(piv) + 1)
    verts = tuple(sorted((tuple(Fraction(c, scale) for c in ms[i]), Fraction(best[ms[i]], scale)) for i in hidx if i < len(ms)))
    return domain, verts, hyp, Fraction(base, scale)


@lru_cache(maxsize=4096)
def _fold_sup(fs: tuple) -> PAConcave:
    # callers sort by hash, so permuted inputs share every partial sum
    return fs[0] if len(fs) == 1 else sup_convolution(_fold_sup(fs[:-1]), fs[-1])


def _integral_pa(f: PAConcave) -> Fraction:
    """∫ f in units of f.unit."""
    if not f.bounded:
        raise ValueError("integral over an unbounded domain")
    n = f.ambient_dim
    if n == 0:
        return f.points[0][1]
    if f.domain.dim < n:
        return Fraction(0)
    # the hypograph above ``base`` was built with the envelope
    return volume(f._hyp) + f._base * volume(f.domain)


def integral(f):
    """Exact integral (Fraction, or ScaledRational for non-unit scales) or sampled Estimate."""
    if isinstance(f, SampledConcave):
        return f.integral()
    q = _integral_pa(f)
    if f.unit == ONE and f.exact:
        return q
    if not f.exact:
        return Estimate(float(q) * f.unit.value, 1e-9 * float(volume(f.domain)) * max(1.0, f.unit.value))
    return ScaledRational(q, f.unit)


def direct_image(gamma: LinearMapQ, f: PAConcave) -> PAConcave:
    """γ_* f(w) = max of f over the fiber γ⁻¹(w) ∩ domain."""
    if gamma.source_dim != f.ambient_dim:
        raise ValueError("map source dimension differs from the function's dimension")
    if not f.bounded:
        raise ValueError("direct image needs a bounded domain")
    return PAConcave(gamma.target_dim, points=[(gamma.apply(m), h) for m, h in f.points], unit=f.unit, exact=f.exact)


def mixed_integral(fs: Sequence, *, m_step: float | None = None):
    """Σ over nonempty S ⊆ {0..n} of (−1)^{n+1−|S|} ∫ ⊞_{i∈S} f_i."""
    fs = list(fs)
    n = len(fs) - 1
    if n < 0:
        raise ValueError("mixed integral needs at least one function")
    for f in fs:
        if f.ambient_dim != n:
            raise ValueError(f"mixed integral in ℝ^{n} needs {n + 1} functions of dimension {n}")
        if isinstance(f, PAConcave) and not f.bounded:
            raise ValueError("mixed integral needs bounded domains")
    if any(isinstance(f, SampledConcave) for f in fs):
        return _mixed_integral_sampled(fs, m_step)
    fs, unit, exact = _common_unit(fs)
    total = Fraction(0)
    approx_err = 0.0
    for mask in range(1, 1 << (n + 1)):
        members = [f for i, f in enumerate(fs) if mask >> i & 1]
        s = _fold_sup(tuple(sorted(members, key=hash)))
        size = len(members)
        total += (-1) ** (n + 1 - size) * _integral_pa(s)
        if not exact:
            approx_err += size * 1e-12 * max(1.0, float(volume(s.domain)))
    if exact:
        return total if unit == ONE else ScaledRational(total, unit)
    return Estimate(float(total) * unit.value, approx_err * unit.value + abs(float(total)) * 1e-15)


# ---------------------------------------------------------------------------
# sampled functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on the regular grid origin + step·index; NaN marks points outside the domain."""

    origin: np.ndarray
    step: np.ndarray
    values: np.ndarray
    error: float = 0.0  # sup-norm uncertainty of the stored values
    extended: np.ndarray | None = None  # finite values on the whole box, used to integrate boundary cells
    local_error: np.ndarray | None = None  # per-point uncertainty (≤ error), when known

    def error_array(self) -> np.ndarray:
        if self.local_error is not None:
            return self.local_error
        return np.full(self.values.shape, self.error)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def axes(self) -> list[np.ndarray]:
        return [self.origin[k] + self.step[k] * np.arange(self.values.shape[k]) for k in range(self.ndim)]

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12)
            and np.allclose(self.step, other.step, rtol=0, atol=1e-15)
        )

    def secant_slopes(self) -> list[np.ndarray]:
        return [np.diff(self.values, axis=k) / self.step[k] for k in range(self.ndim)]

    def lipschitz(self) -> float:
        """Realized Lipschitz constant: Euclidean norm of the per-axis maximal secant slopes."""
        tot = 0.0
        for s in self.secant_slopes():
            fin = s[np.isfinite(s)]
            if fin.size:
                tot += float(np.max(np.abs(fin))) ** 2
        return math.sqrt(tot)

    def slope_variation(self) -> float:
        """Largest change of secant slope across one cell, combined over axes."""
        tot = 0.0
        for k, s in enumerate(self.secant_slopes()):
            if s.shape[k] < 3:
                continue
            lo = np.take(s, range(0, s.shape[k] - 2), axis=k)
            hi = np.take(s, range(2, s.shape[k]), axis=k)
            d = lo - hi
            fin = d[np.isfinite(d)]
            if fin.size:
                tot += float(np.max(np.abs(fin))) ** 2
        return math.sqrt(tot)


class SampledConcave:
    """Numerical concave function on a polytope.

    ``grid`` holds values on a regular grid covering the domain (NaN outside).
    When the function is the windowed conjugate of a primal grid function,
    ``primal`` keeps that grid and ``grid`` is computed on demand with step
    ``m_step``.
    """

    def __init__(self, domain: Polytope, grid: GridFunction | None = None, *, primal: GridFunction | None = None, m_step: float | None = None, cells: Sequence[int] | None = None):
        if grid is None and primal is None:
            raise ValueError("a sampled function needs values or a primal grid")
        self.domain = domain
        self.ambient_dim = domain.ambient_dim
        self._grid = grid
        self.primal = primal
        self.m_step = m_step
        self.cells = tuple(cells) if cells is not None else None

    @property
    def grid(self) -> GridFunction:
        if self._grid is None:
            self._grid = _conjugate_onto_domain(self.primal, self.domain, self.m_step, self.cells)
        return self._grid

    @property
    def error(self) -> float:
        return self.grid.error

    @property
    def lipschitz(self) -> float:
        return self.grid.lipschitz()

    def __call__(self, m: Sequence) -> float:
        """Multilinear interpolation of the grid values."""
        g = self.grid
        x = (np.asarray([float(c) for c in m]) - g.origin) / g.step
        shape = np.array(g.values.shape)
        if np.any(x < -1e-9) or np.any(x > shape - 1 + 1e-9):
            return -math.inf
        x = np.clip(x, 0, shape - 1)
        i0 = np.minimum(np.floor(x).astype(int), np.maximum(shape - 2, 0))
        t = x - i0
        total = 0.0
        for corner in itertools.product((0, 1), repeat=g.ndim):
            idx = tuple(min(i + c, s - 1) for i, c, s in zip(i0, corner, shape))
            w = float(np.prod([tc if c else 1 - tc for tc, c in zip(t, corner)]))
            if w:
                total += w * g.values[idx]
        return float(total)

    def concavity_defect(self) -> float:
        """Worst violation of discrete midpoint concavity along grid axes (≥ 0)."""
        worst = 0.0
        v = self.grid.values
        for k in range(v.ndim):
            if v.shape[k] < 3:
                continue
            a = np.take(v, range(0, v.shape[k] - 2), axis=k)
            b = np.take(v, range(1, v.shape[k] - 1), axis=k)
            c = np.take(v, range(2, v.shape[k]), axis=k)
            d = (a + c) / 2 - b
            fin = d[np.isfinite(d)]
            if fin.size:
                worst = max(worst, float(np.max(fin)))
        return worst

    def integral(self) -> Estimate:
        n = self.ambient_dim
        if n == 0:
            return Estimate(float(self.grid.values.reshape(-1)[0]), self.grid.error)
        if self.domain.dim < n:
            return Estimate(0.0, 0.0)
        return _pl_integral(self.grid, self.domain)

    def to_json(self) -> dict:
        g = self.grid
        return {
            "domain": self.domain.to_json(),
            "grid": {
                "origin": [float(x) for x in g.origin],
                "step": [float(x) for x in g.step],
                "shape": list(g.values.shape),
                "values": [None if not np.isfinite(x) else float(x) for x in g.values.reshape(-1)],
                "error": g.error,
            },
        }

    @staticmethod
    def from_json(obj: dict) -> "SampledConcave":
        P = Polytope.from_json(obj["domain"])
        g = obj["grid"]
        shape = tuple(int(s) for s in g["shape"])
        vals = np.array([np.nan if x is None else float(x) for x in g["values"]], dtype=float).reshape(shape)
        grid = GridFunction(np.array(g["origin"], dtype=float), np.array(g["step"], dtype=float), vals, float(g.get("error", 0.0)))
        return SampledConcave(P, grid)


def _domain_mask(domain: Polytope, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Float membership test for grid points (shape ... × n)."""
    n = domain.ambient_dim
    flat = points.reshape(-1, n)
    ok = np.ones(flat.shape[0], dtype=bool)
    for a, b in domain.equalities():
        ok &= np.abs(flat @ np.array([float(x) for x in a]) - float(b)) <= tol
    piv = list(domain.chart.pivots)
    for a, b in domain.facets():
        ok &= flat[:, piv] @ np.array([float(x) for x in a]) <= float(b) + tol
    return ok.reshape(points.shape[:-1])


def _mesh(axes: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def sample_pa(f: PAConcave, origin: Sequence[float], step: Sequence[float], shape: Sequence[int]) -> GridFunction:
    """Evaluate an exact function on a grid (NaN outside a bounded domain)."""
    origin = np.asarray(origin, dtype=float)
    step = np.asarray(step, dtype=float)
    axes = [origin[k] + step[k] * np.arange(shape[k]) for k in range(len(shape))]
    pts = _mesh(axes) if axes else np.zeros((1, 0))
    slopes = np.array([[float(s) for s in p.slope] for p in f.pieces]).reshape(len(f.pieces), f.ambient_dim)
    consts = np.array([float(p.const) for p in f.pieces])
    vals = np.min(pts @ slopes.T + consts, axis=-1) * f.unit.value
    if f.bounded:
        vals = np.where(_domain_mask(f.domain, pts), vals, np.nan)
    return GridFunction(origin, step, vals, 0.0)


def _conjugate_1d(u: np.ndarray, g: np.ndarray, m: np.ndarray, with_argmin: bool = False):
    """min_i (m_j u_i − g_i) for sorted u via the upper concave hull of (u_i, g_i)."""
    keep = np.flatnonzero(np.isfinite(g))
    u, g = u[keep], g[keep]
    if u.size == 0:
        out = np.full(m.shape, np.inf)
        return (out, np.zeros(m.shape, dtype=np.int64)) if with_argmin else out
    hull: list[int] = []
    for i in range(u.size):
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            if (g[i2] - g[i1]) * (u[i] - u[i1]) <= (g[i] - g[i1]) * (u[i2] - u[i1]):
                hull.pop()
            else:
                break
        hull.append(i)
    hu, hg = u[hull], g[hull]
    if hu.size == 1:
        idx = np.zeros(m.shape, dtype=np.int64)
    else:
        slopes = np.diff(hg) / np.diff(hu)  # decreasing
        idx = np.searchsorted(-slopes, -m, side="left")
    out = m * hu[idx] - hg[idx]
    if with_argmin:
        return out, keep[np.asarray(hull)[idx]]
    return out


def _conjugate_grid(primal: GridFunction, m_axes: Sequence[np.ndarray], with_argmin: bool = False):
    """Separable discrete conjugate min_u ⟨m,u⟩ − g(u) over the primal grid.

    With ``with_argmin`` also returns, per m, the index tuple of a minimising grid node.
    """
    u_axes = primal.axes()
    n = primal.ndim
    if n == 1:
        if with_argmin:
            out, am = _conjugate_1d(u_axes[0], primal.values, m_axes[0], True)
            return out, (am,)
        return _conjugate_1d(u_axes[0], primal.values, m_axes[0])
    T = np.where(np.isfinite(primal.values), -primal.values, np.inf)
    stage_args = []
    for k in range(n):
        T = np.moveaxis(T, k, -1)
        lead = T.shape[:-1]
        flat = T.reshape(-1, T.shape[-1])
        u = u_axes[k]
        m = m_axes[k]
        out = np.empty((flat.shape[0], m.size))
        arg = np.empty((flat.shape[0], m.size), dtype=np.int64) if with_argmin else None
        chunk = max(1, int(2e7 // max(1, u.size * m.size)))
        for s in range(0, flat.shape[0], chunk):
            blk = flat[s : s + chunk][:, None, :] + m[None, :, None] * u[None, None, :]
            if with_argmin:
                am = np.argmin(blk, axis=2)
                arg[s : s + chunk] = am
                out[s : s + chunk] = np.take_along_axis(blk, am[:, :, None], axis=2)[:, :, 0]
            else:
                out[s : s + chunk] = np.min(blk, axis=2)
        T = np.moveaxis(out.reshape(lead + (m.size,)), -1, k)
        if with_argmin:
            stage_args.append(np.moveaxis(arg.reshape(lead + (m.size,)), -1, k))
    if not with_argmin:
        return T
    # stage k minimised over u_k with axes < k already in m-coordinates and axes > k still in u
    idx: list = [None] * n
    for k in reversed(range(n)):
        sel = tuple(np.indices(T.shape)[j] if j < k else (idx[j] if j > k else slice(None)) for j in range(n))
        a = stage_args[k]
        if k == n - 1:
            idx[k] = a
        else:
            pick = [np.indices(T.shape)[j] for j in range(k)] + [None] + [idx[j] for j in range(k + 1, n)]
            # stage_args[k] has shape (m_0..m_k, u_{k+1}..u_{n-1}); index with the already resolved u's
            grids = [np.indices(T.shape)[j] for j in range(k + 1)]
            idx[k] = a[tuple(grids + [idx[j] for j in range(k + 1, n)])]
    return T, tuple(idx)


def _aligned_axes(domain: Polytope, m_step: float | None, cells: Sequence[int] | None):
    lo, hi = domain.bounding_box()
    axes, steps = [], []
    for k in range(domain.ambient_dim):
        a, b = float(lo[k]), float(hi[k])
        if b <= a:
            c = 0
        elif cells is not None:
            c = max(1, int(cells[k]))
        else:
            c = max(1, int(math.ceil((b - a) / m_step - 1e-9)))
        if c == 0:
            axes.append(np.array([a]))
            steps.append(1.0)
        else:
            axes.append(np.linspace(a, b, c + 1))
            steps.append((b - a) / c)
    return axes, np.array(steps)


def _argmin_gap(primal: GridFunction, m_axes: Sequence[np.ndarray], idx: tuple) -> np.ndarray:
    """Per m: how far the grid minimum of φ = ⟨m,·⟩ − g can sit above the continuous one.

    Along each axis the minimiser lies within a cell of the grid node; on each side φ is bounded
    below by the supporting secant from the node and the secant of the next-but-one cell, and the
    gap is read off where these two lines cross.  Axis gaps are summed.
    """
    g = primal.values
    n = g.ndim
    M = np.meshgrid(*m_axes, indexing="ij")
    total = np.zeros(M[0].shape)
    for k in range(n):
        L = g.shape[k]
        h = primal.step[k]
        j = idx[k]

        def val(off):
            jj = np.clip(j + off, 0, L - 1)
            t = list(idx)
            t[k] = jj
            return g[tuple(t)]

        def sec(a):  # φ secant over [j+a, j+a+1]
            ok = (j + a >= 0) & (j + a + 1 <= L - 1)
            d = (val(a + 1) - val(a)) / h
            return np.where(ok, M[k] - d, np.nan)

        sL2, sL, sR, sR2 = sec(-2), sec(-1), sec(0), sec(1)
        with np.errstate(invalid="ignore", divide="ignore"):
            # right of the node: lines sL·t and sR·h − sR2·(h − t)
            tr = np.clip(h * (sR - sR2) / (sL - sR2), 0.0, h)
            right = np.where(np.isfinite(sR2) & np.isfinite(sL), np.maximum(0.0, -sL * tr), np.fmax(0.0, np.fmax(-sL, 0) * h))
            # mirror image on the left
            tl = np.clip(h * (sL2 - sL) / (sL2 - sR), 0.0, h)
            left = np.where(np.isfinite(sL2) & np.isfinite(sR), np.maximum(0.0, sR * tl), np.fmax(0.0, np.fmax(sR, 0) * h))
        # at the window edge the minimiser is clamped: no continuous gap inside the window
        right = np.where(j + 1 > L - 1, 0.0, np.nan_to_num(right, nan=0.0))
        left = np.where(j - 1 < 0, 0.0, np.nan_to_num(left, nan=0.0))
        total += np.maximum(left, right)
    return total


def _conjugate_onto_domain(primal: GridFunction, domain: Polytope, m_step: float | None, cells) -> GridFunction:
    axes, steps = _aligned_axes(domain, m_step, cells)
    ext, argmin = _conjugate_grid(primal, axes, with_argmin=True)
    pts = _mesh(axes)
    mask = _domain_mask(domain, pts)
    vals = np.where(mask, ext, np.nan)
    finite = bool(np.all(np.isfinite(ext)))
    local = np.nan_to_num(primal.error_array(), nan=0.0)[argmin]
    if primal.values.size > 1:
        local = local + _argmin_gap(primal, axes, argmin)
    err = float(np.max(local[mask])) if mask.any() else float(np.max(local))
    return GridFunction(np.array([a[0] for a in axes]), steps, vals, err, ext if finite else None, local)


def dual_sampled(f: SampledConcave, target: Polytope | None = None, cells: Sequence[int] | None = None) -> SampledConcave:
    """Discrete concave conjugate of the grid values of f.

    The output domain defaults to the box of realized secant slopes; its grid
    has as many cells per axis as the input unless ``cells`` is given.
    """
    g = f.grid
    n = g.ndim
    if target is None:
        lo, hi = [], []
        for k, s in enumerate(g.secant_slopes()):
            fin = s[np.isfinite(s)]
            if fin.size == 0:
                lo.append(Fraction(0))
                hi.append(Fraction(0))
            else:
                lo.append(Fraction(float(np.min(fin))).limit_denominator(10**6))
                hi.append(Fraction(float(np.max(fin))).limit_denominator(10**6))
        from .polytope import box

        target = box(lo, hi)
    if cells is None:
        cells = [max(1, s - 1) for s in g.values.shape]
    return SampledConcave(target, primal=g, cells=cells)


def _cell_interp_bound(v: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Per cell: bound on the mean gap between a concave function and its linear interpolant.

    Along an axis, with a, b the secant-slope drops into and out of the cell, the function lies
    under both neighbouring secant lines, so its mean excess over the chord is ≤ h·ab/(2(a+b)).
    Axes are summed; each axis takes the worst of the cell's parallel edges.
    """
    n = v.ndim
    cells = tuple(s - 1 for s in v.shape)
    out = np.zeros(cells)
    for k in range(n):
        s = np.diff(v, axis=k) / step[k]
        pad = [(0, 0)] * n
        pad[k] = (1, 1)
        s = np.pad(s, pad, constant_values=np.nan)
        worst = np.zeros(cells)
        for corner in itertools.product((0, 1), repeat=n - 1):
            def take(shift):
                it = iter(corner)
                sl = [slice(shift, shift + cells[j]) if j == k else slice(c := next(it), c + cells[j]) for j in range(n)]
                return s[tuple(sl)]

            prev, cur, nxt = take(0), take(1), take(2)
            a = np.abs(prev - cur)
            b = np.abs(cur - nxt)
            with np.errstate(invalid="ignore", divide="ignore"):
                both = np.where(a + b > 0, a * b / (2 * (a + b)), 0.0)
            one = np.fmax(a, b) / 2  # only one neighbour known
            bound = np.where(np.isfinite(a) & np.isfinite(b), both, np.where(np.isfinite(one), one, 0.0))
            worst = np.maximum(worst, step[k] * bound)
        out += worst
    return out


def _clip_polygon(poly: list, a: np.ndarray, b: float) -> list:
    out = []
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return out


def _clipped_simplex(verts: np.ndarray, vals: np.ndarray, planes) -> tuple[float, float]:
    """(measure, integral of the affine interpolant) of simplex ∩ {a·x ≤ b}, for n ≤ 2."""
    n = verts.shape[1]
    A = (verts[1:] - verts[0]).T
    grad = np.linalg.solve(A.T, vals[1:] - vals[0])
    if n == 1:
        lo, hi = sorted((verts[0, 0], verts[1, 0]))
        for a, b in planes:
            if a[0] > 0:
                hi = min(hi, b / a[0])
            elif a[0] < 0:
                lo = max(lo, b / a[0])
            elif b < 0:
                return 0.0, 0.0
        if hi <= lo:
            return 0.0, 0.0
        mid = (lo + hi) / 2
        return hi - lo, (hi - lo) * (vals[0] + grad[0] * (mid - verts[0, 0]))
    poly = [verts[i] for i in range(3)]
    for a, b in planes:
        poly = _clip_polygon(poly, a, b)
        if len(poly) < 3:
            return 0.0, 0.0
    P = np.array(poly)
    x, y = P[:, 0], P[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = cross.sum() / 2
    if abs(area) < 1e-300:
        return 0.0, 0.0
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6 * area)
    cy = ((y + np.roll(y, -1)) * cross).sum() / (6 * area)
    return abs(area), abs(area) * (vals[0] + grad @ (np.array([cx, cy]) - verts[0]))


def _kuhn_simplices(n: int):
    for perm in itertools.permutations(range(n)):
        corner = [0] * n
        verts = [tuple(corner)]
        for k in perm:
            corner[k] = 1
            verts.append(tuple(corner))
        yield verts


def _pl_integral(g: GridFunction, domain: Polytope) -> Estimate:
    """Integral of the piecewise-linear interpolant on the Kuhn triangulation of the grid cells.

    Simplices inside the domain are summed in bulk.  Boundary simplices are
    clipped against the domain exactly (dimension ≤ 2, when finite values
    beyond the domain are available); whatever area is left unaccounted is
    charged to the error at the largest nearby value.
    """
    n = g.ndim
    v = g.values
    inside = np.isfinite(v)
    if any(s < 2 for s in v.shape):
        return Estimate(0.0, float(volume(domain)) * (g.error + 1.0))
    cells = tuple(s - 1 for s in v.shape)
    cell_vol = float(np.prod(g.step))
    simplex_vol = cell_vol / math.factorial(n)
    full = np.ones(cells, dtype=bool)
    anyin = np.zeros(cells, dtype=bool)
    for c in itertools.product((0, 1), repeat=n):
        sl = tuple(slice(ci, ci + m) for ci, m in zip(c, cells))
        full &= inside[sl]
        anyin |= inside[sl]
    total = 0.0
    covered = 0.0
    for verts in _kuhn_simplices(n):
        acc = np.zeros(cells)
        for c in verts:
            sl = tuple(slice(ci, ci + m) for ci, m in zip(c, cells))
            acc = acc + np.where(full, v[sl], 0.0)
        total += float(np.sum(acc[full])) / (n + 1) * simplex_vol
    covered += float(np.count_nonzero(full)) * cell_vol
    le = g.error_array()
    cell_err = np.full(cells, -np.inf)
    for c in itertools.product((0, 1), repeat=n):
        sl = tuple(slice(ci, ci + m) for ci, m in zip(c, cells))
        cell_err = np.fmax(cell_err, np.where(np.isfinite(le[sl]), le[sl], -np.inf))
    cell_err = np.where(np.isfinite(cell_err), cell_err, g.error)
    value_err = float(np.sum(cell_err[full])) * cell_vol
    ext = g.extended
    osc_src = ext if ext is not None else v
    osc = _cell_interp_bound(osc_src, g.step)
    interp_err = float(np.sum(osc[full])) * cell_vol
    partial = anyin & ~full
    fin = v[inside]
    vmax = float(np.max(np.abs(fin))) if fin.size else 0.0
    if ext is not None and n <= 2 and np.any(partial):
        piv = list(domain.chart.pivots)
        planes = [(np.array([float(x) for x in a]), float(b)) for a, b in domain.facets()]
        if piv != list(range(n)):
            planes = []
        # cells touching a domain vertex may have no inside corner
        for vert in domain.vertices:
            idx = np.floor((np.array([float(x) for x in vert]) - g.origin) / g.step + 1e-9).astype(int)
            idx = np.clip(idx, 0, np.array(cells) - 1)
            if not full[tuple(idx)]:
                partial[tuple(idx)] = True
        for idx in zip(*np.nonzero(partial)):
            base = np.array(idx)
            for verts in _kuhn_simplices(n):
                corners = np.array(verts)
                X = g.origin + (base + corners) * g.step
                vals = np.array([ext[tuple(base + c)] for c in corners])
                area, integ = _clipped_simplex(X, vals, planes)
                total += integ
                covered += area
            interp_err += osc[idx] * cell_vol
            value_err += cell_err[idx] * cell_vol
    dom_vol = float(volume(domain))
    uncovered = abs(dom_vol - covered)
    h = float(np.linalg.norm(g.step))
    err = value_err + interp_err + uncovered * (vmax + g.error + h * g.lipschitz())
    return Estimate(total, err)


def _primal_on(f, ref: GridFunction) -> GridFunction:
    """The function whose windowed conjugate is f, sampled on the reference u-grid."""
    if isinstance(f, PAConcave):
        return sample_pa(legendre_dual(f), ref.origin, ref.step, ref.values.shape)
    if f.primal is not None:
        if not f.primal.same_grid(ref):
            raise ValueError("sampled functions were built on different primal grids")
        return f.primal
    # f given by m-side values only: conjugate it onto the reference grid (f^∨∨ = f)
    vals = _conjugate_grid(f.grid, ref.axes())
    err = f.grid.error + float(np.linalg.norm(f.grid.step)) / 2 * f.grid.slope_variation()
    return GridFunction(ref.origin, ref.step, vals, err)


def _reference_grid(fs) -> GridFunction:
    for f in fs:
        if isinstance(f, SampledConcave) and f.primal is not None:
            return f.primal
    raise ValueError("no sampled function carries a primal grid; build one with ronkin_roof or dual_sampled")


def _sup_convolution_sampled(f, g) -> SampledConcave:
    ref = _reference_grid([f, g])
    pf, pg = _primal_on(f, ref), _primal_on(g, ref)
    step = min(x.m_step for x in (f, g) if isinstance(x, SampledConcave) and x.m_step) if any(
        isinstance(x, SampledConcave) and x.m_step for x in (f, g)
    ) else 0.01
    return SampledConcave(
        minkowski_sum(f.domain, g.domain),
        primal=GridFunction(ref.origin, ref.step, pf.values + pg.values, pf.error + pg.error, None, pf.error_array() + pg.error_array()),
        m_step=step,
    )


def _mixed_integral_sampled(fs, m_step: float | None) -> Estimate:
    ref = _reference_grid(fs)
    primals = [_primal_on(f, ref) for f in fs]
    if m_step is None:
        steps = [f.m_step for f in fs if isinstance(f, SampledConcave) and f.m_step]
        m_step = min(steps) if steps else 0.01
    n = len(fs) - 1
    domains: dict[int, Polytope] = {}
    total = 0.0
    err = 0.0
    for mask in range(1, 1 << (n + 1)):
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        domains[mask] = fs[i].domain if rest == 0 else minkowski_sum(domains[rest], fs[i].domain)
        members = [j for j in range(n + 1) if mask >> j & 1]
        size = len(members)
        if n > 0 and domains[mask].dim < n:
            continue
        vals = sum(primals[j].values for j in members)
        perr = sum(primals[j].error for j in members)
        lerr = sum(primals[j].error_array() for j in members)
        s = SampledConcave(domains[mask], primal=GridFunction(ref.origin, ref.step, vals, perr, None, lerr), m_step=m_step)
        est = s.integral()
        total += (-1) ** (n + 1 - size) * est.value
        err += est.error
    return Estimate(total, err)


Concave = Union[PAConcave, SampledConcave]
