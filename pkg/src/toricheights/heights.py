"""Heights over ℚ and cyclotomic fields ℚ(ζ_N).

Height of a tuple x over K = ℚ(ζ_N), normalised by φ = [K:ℚ]:

    h(x) = (1/φ)·Σ_σ log max_i |σ(x_i)|  −  (1/φ)·log N(x_1 O + … + x_k O)

for integral x (denominators are cleared first; the result is scale invariant).
The archimedean sum runs over all φ complex embeddings; the finite places are
handled in aggregate through the norm of the coordinate ideal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import mpmath
import numpy as np
import sympy

from .polytope import to_fraction

__all__ = [
    "Cyclotomic",
    "ProjectivePoint",
    "HeightBreakdown",
    "height_tuple_Q",
    "cyclo_arith",
    "content_norm",
    "exact_norm",
    "projective_height",
    "segre",
    "gvf_axiom_suite",
    "TRIANGLE_CONSTANT",
]

TRIANGLE_CONSTANT = math.log(2.0)  # archimedean error e of the standard structure on ℚ


# ---------------------------------------------------------------------------
# cyclotomic polynomial data


@lru_cache(maxsize=None)
def _phi(N: int) -> int:
    return int(sympy.totient(N))


@lru_cache(maxsize=None)
def _cyclo_poly(N: int) -> tuple[int, ...]:
    """Coefficients of Φ_N, low degree first."""
    t = sympy.Symbol("t")
    return tuple(int(c) for c in reversed(sympy.Poly(sympy.cyclotomic_poly(N, t), t).all_coeffs()))


@lru_cache(maxsize=64)
def _power_table(N: int) -> np.ndarray:
    """Row r: coefficients of ζ_N^r reduced modulo Φ_N (r = 0..N−1)."""
    phi = _phi(N)
    P = np.array(_cyclo_poly(N)[:-1], dtype=object)
    table = np.zeros((N, phi), dtype=object)
    cur = np.zeros(phi, dtype=object)
    cur[0] = 1
    for r in range(N):
        table[r] = cur
        top = cur[-1]
        cur = np.concatenate(([0], cur[:-1])).astype(object)
        if top:
            cur = cur - top * P
    if all(abs(int(v)) < 2**40 for v in table.reshape(-1)):
        return table.astype(np.int64)
    return table


@lru_cache(maxsize=None)
def _units(N: int) -> tuple[int, ...]:
    return tuple(k for k in range(1, N + 1) if math.gcd(k, N) == 1) if N > 1 else (1,)


def _reduce_group_ring(N: int, vec) -> list[int]:
    """Σ_r vec[r] ζ^r (any length, integer entries) → reduced integer coefficients."""
    phi = _phi(N)
    T = _power_table(N)
    acc = np.zeros(N, dtype=object)
    for r, c in enumerate(vec):
        if c:
            acc[r % N] += int(c)
    nz = np.flatnonzero(acc != 0)
    if nz.size == 0:
        return [0] * phi
    out = np.zeros(phi, dtype=object)
    for r in nz:
        out += int(acc[r]) * T[r].astype(object)
    return [int(v) for v in out]


# ---------------------------------------------------------------------------
# elements


class Cyclotomic:
    """An element Σ_j c_j ζ_N^j of ℚ(ζ_N) with j < φ(N), stored as integers over a common denominator."""

    __slots__ = ("conductor", "_num", "_den", "_emb")

    def __init__(self, conductor: int, coeffs: Sequence = ()):
        N = int(conductor)
        if N < 1:
            raise ValueError("conductor must be ≥ 1")
        fr = [to_fraction(c) for c in coeffs]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr), 1)
        ints = [int(f * den) for f in fr]
        phi = _phi(N)
        if len(ints) > phi:
            ints = _reduce_group_ring(N, ints)
        ints = ints + [0] * (phi - len(ints))
        self._set(N, ints, den)

    def _set(self, N: int, ints: list[int], den: int) -> None:
        g = reduce(math.gcd, ints, den)
        if g > 1:
            ints = [v // g for v in ints]
            den //= g
        self.conductor = N
        self._num = tuple(ints)
        self._den = den
        self._emb = None

    @classmethod
    def _raw(cls, N: int, ints: list[int], den: int = 1) -> "Cyclotomic":
        obj = cls.__new__(cls)
        obj._set(N, list(ints), den)
        return obj

    @classmethod
    def from_exponents(cls, conductor: int, terms: dict) -> "Cyclotomic":
        """Σ c·ζ^k for a map k ↦ c (k any integer, taken mod N)."""
        fr = {int(k) % conductor: Fraction(0) for k in terms}
        for k, c in terms.items():
            fr[int(k) % conductor] += to_fraction(c)
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr.values()), 1)
        vec = [0] * conductor
        for k, c in fr.items():
            vec[k] += int(c * den)
        return cls._raw(conductor, _reduce_group_ring(conductor, vec), den)

    @classmethod
    def zeta(cls, conductor: int, k: int = 1) -> "Cyclotomic":
        return cls.from_exponents(conductor, {k: 1})

    @classmethod
    def rational(cls, conductor: int, q) -> "Cyclotomic":
        return cls(conductor, [to_fraction(q)])

    # -- views
    @property
    def degree(self) -> int:
        return len(self._num)

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(v, self._den) for v in self._num)

    @property
    def numerator(self) -> tuple[int, ...]:
        return self._num

    @property
    def denominator(self) -> int:
        return self._den

    def is_zero(self) -> bool:
        return not any(self._num)

    def is_integral(self) -> bool:
        return self._den == 1

    def __repr__(self) -> str:
        terms = [f"{c}·ζ^{j}" if j else f"{c}" for j, c in enumerate(self.coeffs) if c]
        return f"Cyclotomic(N={self.conductor}, {' + '.join(terms) or '0'})"

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Cyclotomic.rational(self.conductor, other)
        if not isinstance(other, Cyclotomic):
            return NotImplemented
        if other.conductor != self.conductor:
            a, b = _common(self, other)
            return a._num == b._num and a._den == b._den
        return self._num == other._num and self._den == other._den

    def __hash__(self) -> int:
        return hash((self.conductor, self._num, self._den))

    # -- arithmetic
    def __neg__(self) -> "Cyclotomic":
        return Cyclotomic._raw(self.conductor, [-v for v in self._num], self._den)

    def __add__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        d = a._den * b._den // math.gcd(a._den, b._den)
        return Cyclotomic._raw(a.conductor, [x * (d // a._den) + y * (d // b._den) for x, y in zip(a._num, b._num)], d)

    __radd__ = __add__

    def __sub__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        return a + (-b)

    def __rsub__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        return b + (-a)

    def __mul__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        prod = np.convolve(np.array(a._num, dtype=object), np.array(b._num, dtype=object))
        return Cyclotomic._raw(a.conductor, _reduce_group_ring(a.conductor, prod), a._den * b._den)

    __rmul__ = __mul__

    def inverse(self) -> "Cyclotomic":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in a cyclotomic field")
        t = sympy.Symbol("t")
        P = sympy.Poly(list(reversed(_cyclo_poly(self.conductor))), t, domain="QQ")
        A = sympy.Poly(list(reversed([sympy.Rational(v, self._den) for v in self._num])), t, domain="QQ")
        try:
            inv = sympy.invert(A, P)
        except sympy.polys.polyerrors.NotInvertible as exc:  # impossible in a field
            raise ArithmeticError("element is not invertible modulo the cyclotomic polynomial") from exc
        cs = [Fraction(int(c.p), int(c.q)) for c in reversed(inv.all_coeffs())]
        return Cyclotomic(self.conductor, cs)

    def __truediv__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        return a * b.inverse()

    def __rtruediv__(self, other) -> "Cyclotomic":
        a, b = _common(self, other)
        return b * a.inverse()

    def __pow__(self, k: int) -> "Cyclotomic":
        if k < 0:
            return self.inverse() ** (-k)
        out = Cyclotomic.rational(self.conductor, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def embed(self, M: int) -> "Cyclotomic":
        """The same element viewed in ℚ(ζ_M), N | M."""
        if M % self.conductor:
            raise ValueError(f"ℚ(ζ_{self.conductor}) does not embed in ℚ(ζ_{M})")
        s = M // self.conductor
        vec = [0] * M
        for j, v in enumerate(self._num):
            vec[(j * s) % M] += v
        return Cyclotomic._raw(M, _reduce_group_ring(M, vec), self._den)

    # -- embeddings
    def _l1(self) -> float:
        return float(sum(abs(v) for v in self._num)) / self._den

    def embeddings(self) -> np.ndarray:
        """σ_k(x) for k in the unit group of ℤ/N (ascending), double precision."""
        if self._emb is None:
            N = self.conductor
            vec = np.zeros(N, dtype=complex)
            vec[: self.degree] = [float(Fraction(v, self._den)) for v in self._num]
            full = np.fft.ifft(vec) * N  # Σ_j c_j e^{+2πi jk/N}
            self._emb = full[np.array(_units(N)) % N]
        return self._emb

    def embedding_error(self) -> float:
        """A bound on the absolute error of each entry of ``embeddings``."""
        N = self.conductor
        c2 = math.sqrt(sum(float(Fraction(v, self._den)) ** 2 for v in self._num))
        return 10.0 * np.finfo(float).eps * (math.log2(max(N, 2)) + 2.0) * math.sqrt(N) * c2 + 4 * np.finfo(float).eps * self._l1()

    def embeddings_mp(self, ks: Sequence[int], dps: int) -> list:
        with mpmath.workdps(dps):
            out = []
            for k in ks:
                s = mpmath.mpc(0)
                for j, v in enumerate(self._num):
                    if v:
                        s += v * mpmath.expjpi(mpmath.mpf(2 * j * k) / self.conductor)
                out.append(s / self._den)
            return out

    def norm(self) -> Fraction:
        """Exact field norm N_{K/ℚ}(x)."""
        if self.is_zero():
            return Fraction(0)
        return Fraction(exact_norm(self._num, self.conductor), self._den ** self.degree)

    def to_json(self) -> list:
        return [str(c) for c in self.coeffs]

    @staticmethod
    def from_json(N: int, coeffs) -> "Cyclotomic":
        if not isinstance(coeffs, list):
            raise ValueError("a cyclotomic coordinate is a list of rational coefficients")
        return Cyclotomic(N, coeffs)


def _coerce(x, N: int) -> Cyclotomic:
    if isinstance(x, Cyclotomic):
        return x
    return Cyclotomic.rational(N, x)


def _common(a, b) -> tuple[Cyclotomic, Cyclotomic]:
    if not isinstance(a, Cyclotomic):
        a = _coerce(a, b.conductor)
    if not isinstance(b, Cyclotomic):
        b = _coerce(b, a.conductor)
    if a.conductor == b.conductor:
        return a, b
    M = a.conductor * b.conductor // math.gcd(a.conductor, b.conductor)
    return a.embed(M), b.embed(M)


def cyclo_arith(a: Cyclotomic, b: Cyclotomic, op: str) -> Cyclotomic:
    """Exact ring operation; conductors are unified through their lcm."""
    ops = {"+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y, "/": lambda x, y: x / y}
    if op not in ops:
        raise ValueError(f"unknown operation {op!r}")
    return ops[op](a, b)


# ---------------------------------------------------------------------------
# exact norms by evaluation at roots of unity modulo primes p ≡ 1 (mod N)

_P_MAX = 2**31 - 1


@lru_cache(maxsize=None)
def _split_primes(N: int, count: int) -> tuple[tuple[int, int], ...]:
    """`count` primes p ≡ 1 (mod N) below 2³¹, each with a primitive N-th root of unity."""
    out = []
    t = _P_MAX // N
    qs = list(sympy.factorint(N)) if N > 1 else []
    while len(out) < count:
        if t < 1:
            raise ArithmeticError("ran out of word-size primes for the norm computation")
        p = N * t + 1
        t -= 1
        if not sympy.isprime(p):
            continue
        g = 2
        while True:
            w = pow(g, (p - 1) // N, p)
            if all(pow(w, N // q, p) != 1 for q in qs):
                break
            g += 1
        out.append((p, w))
    return tuple(out)


def _prod_mod(v: np.ndarray, p: int) -> int:
    v = v.astype(np.int64) % p
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 1)
        v = (v[0::2] * v[1::2]) % p
    return int(v[0]) if v.size else 1


def exact_norm(num: Sequence[int], N: int) -> int:
    """N_{ℚ(ζ_N)/ℚ} of the integral element Σ num_j ζ^j, exactly."""
    if N <= 2:
        return int(num[0])
    nz = [(j, int(v)) for j, v in enumerate(num) if v]
    if not nz:
        return 0
    phi = len(num)
    l1 = sum(abs(v) for _, v in nz)
    bits = phi * math.log2(l1) + 2 if l1 > 1 else 2
    count = int(bits // 30) + 2
    primes = _split_primes(N, count)
    K = np.array(_units(N), dtype=np.int64)
    J = np.array([j for j, _ in nz], dtype=np.int64)
    residues, moduli = [], []
    for p, w in primes:
        pw = np.empty(N, dtype=np.int64)
        acc = 1
        for r in range(N):
            pw[r] = acc
            acc = acc * w % p
        cs = np.array([v % p for _, v in nz], dtype=np.int64)
        vals = np.zeros(K.size, dtype=np.int64)
        for jj in range(0, J.size, 256):
            M = pw[(J[jj : jj + 256, None] * K[None, :]) % N]
            vals = (vals + ((cs[jj : jj + 256, None] * M) % p).sum(axis=0)) % p
        residues.append(_prod_mod(vals, p))
        moduli.append(p)
    value, modulus = sympy.ntheory.modular.crt(moduli, residues)
    value, modulus = int(value), int(modulus)
    if value > modulus // 2:
        value -= modulus
    return value


# ---------------------------------------------------------------------------
# content norm


def _lattice_index(rows: list[list[int]], dim: int) -> int:
    """Index in ℤ^dim of the lattice spanned by integer rows (0 if not full rank), by gcd elimination."""
    rows = [list(r) for r in rows if any(r)]
    det = 1
    for col in range(dim):
        piv = [r for r in rows if r[col]]
        if not piv:
            return 0
        while len(piv) > 1:
            piv.sort(key=lambda r: abs(r[col]))
            a = piv[0]
            nxt = [a]
            for r in piv[1:]:
                q = r[col] // a[col]
                r2 = [x - q * y for x, y in zip(r, a)]
                if r2[col]:
                    nxt.append(r2)
                elif any(r2):
                    rows.append(r2)
            rows = [r for r in rows if not r[col]] + nxt
            piv = nxt
        det *= abs(piv[0][col])
        rows = [r for r in rows if r is not piv[0]]
    return det


def _multiplication_rows(x: Sequence[int], N: int) -> list[list[int]]:
    """x·ζ^j for j < φ(N), as reduced coefficient rows."""
    phi = len(x)
    out = []
    vec = [0] * (phi + phi)
    for j in range(phi):
        vec = [0] * j + list(x)
        out.append(_reduce_group_ring(N, vec))
    return out


def _poly_mod(a: list[int], m: list[int], p: int) -> list[int]:
    a = [v % p for v in a]
    while a and a[-1] == 0:
        a.pop()
    inv = pow(m[-1], -1, p)
    dm = len(m) - 1
    while len(a) - 1 >= dm and a:
        c = a[-1] * inv % p
        s = len(a) - 1 - dm
        for i in range(len(m)):
            a[s + i] = (a[s + i] - c * m[i]) % p
        while a and a[-1] == 0:
            a.pop()
    return a


def _poly_gcd_mod(a: list[int], b: list[int], p: int) -> list[int]:
    a = [v % p for v in a]
    b = [v % p for v in b]
    while a and a[-1] == 0:
        a.pop()
    while b and b[-1] == 0:
        b.pop()
    while b:
        a, b = b, _poly_mod(a, b, p)
    return a


def _local_index(rows: list[list[int]], ell: int, a: int) -> int:
    """ℓ-part of the index of span(rows) + ℓ^a ℤ^dim, via elimination over ℤ/ℓ^(a+1)."""
    mod = ell ** (a + 1)
    M = [[v % mod for v in r] for r in rows]
    dim = len(rows[0])
    M += [[ell**a if i == j else 0 for i in range(dim)] for j in range(dim)]

    def val(x):
        if x == 0:
            return a + 1
        k = 0
        while x % ell == 0:
            x //= ell
            k += 1
        return k

    total = 0
    cols = list(range(dim))
    for _ in range(dim):
        best = None
        for i, r in enumerate(M):
            for c in cols:
                v = val(r[c])
                if best is None or v < best[0]:
                    best = (v, i, c)
                    if v == 0:
                        break
            if best and best[0] == 0:
                break
        v, i, c = best
        total += min(v, a)
        pr = M.pop(i)
        cols.remove(c)
        if v > a:
            continue
        unit_inv = pow(pr[c] // ell**v, -1, mod)
        for r in M:
            if r[c]:
                q = (r[c] // ell**v) * unit_inv % mod
                for cc in cols:
                    r[cc] = (r[cc] - q * pr[cc]) % mod
                r[c] = 0
    return ell**total


def content_norm(xs: Sequence[Cyclotomic], conductor: int | None = None) -> int:
    """Norm of the ideal generated by integral elements, i.e. the index of ⟨x_i ζ^j⟩ in ℤ[ζ_N]."""
    if not xs:
        raise ValueError("empty coordinate list")
    N = conductor or xs[0].conductor
    xs = [x.embed(N) if x.conductor != N else x for x in xs]
    if any(not x.is_integral() for x in xs):
        raise ValueError("content_norm expects integral elements")
    nz = [x for x in xs if not x.is_zero()]
    if not nz:
        raise ValueError("all coordinates are zero")
    phi = _phi(N)
    if phi == 1:
        return abs(reduce(math.gcd, (x.numerator[0] for x in nz)))
    norms = [abs(exact_norm(x.numerator, N)) for x in nz]
    if len(nz) == 1:
        return norms[0]
    c = reduce(math.gcd, norms)
    if c == 1:
        return 1
    if phi <= 24:
        rows = [r for x in nz for r in _multiplication_rows(list(x.numerator), N)]
        return _lattice_index(rows, phi)
    result = 1
    for ell, a in sympy.factorint(c).items():
        ell = int(ell)
        result *= _ell_part(nz, norms, N, ell, a)
    return result


def _ell_part(nz, norms, N: int, ell: int, a: int) -> int:
    m = N
    while m % ell == 0:
        m //= ell
    f = int(sympy.n_order(ell, m)) if m > 1 else 1
    primes_above = _phi(m) // f
    if primes_above == 1:
        v = min(_vp(n, ell) for n in norms)
        return ell**v
    if N % ell:
        P = list(_cyclo_poly(N))
        g = P
        for x in nz:
            g = _poly_gcd_mod(g, list(x.numerator), ell)
            if len(g) <= 1:
                return 1
        d = len(g) - 1
        if d == a:
            return ell**d
    rows = [r for x in nz for r in _multiplication_rows(list(x.numerator), N)]
    return _local_index(rows, ell, a)


def _vp(n: int, p: int) -> int:
    k = 0
    while n and n % p == 0:
        n //= p
        k += 1
    return k


# ---------------------------------------------------------------------------
# points and heights


@dataclass(frozen=True)
class ProjectivePoint:
    conductor: int
    coords: tuple

    def __post_init__(self):
        cs = tuple(_coerce(c, self.conductor) for c in self.coords)
        cs = tuple(c.embed(self.conductor) if c.conductor != self.conductor else c for c in cs)
        if not cs or all(c.is_zero() for c in cs):
            raise ValueError("a projective point needs a nonzero coordinate")
        object.__setattr__(self, "coords", cs)

    @staticmethod
    def from_rationals(values: Sequence, conductor: int = 1) -> "ProjectivePoint":
        return ProjectivePoint(conductor, tuple(Cyclotomic.rational(conductor, v) for v in values))

    @staticmethod
    def from_json(obj: dict) -> "ProjectivePoint":
        if not isinstance(obj, dict) or "conductor" not in obj or "coords" not in obj:
            raise ValueError("point JSON needs 'conductor' and 'coords'")
        N = int(obj["conductor"])
        return ProjectivePoint(N, tuple(Cyclotomic.from_json(N, c) for c in obj["coords"]))

    def to_json(self) -> dict:
        return {"conductor": self.conductor, "coords": [c.to_json() for c in self.coords]}

    def scaled(self, lam: Cyclotomic) -> "ProjectivePoint":
        return ProjectivePoint(self.conductor, tuple(lam * c for c in self.coords))

    def integral(self) -> "ProjectivePoint":
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (c.denominator for c in self.coords), 1)
        return ProjectivePoint(self.conductor, tuple(Cyclotomic._raw(c.conductor, [v * (den // c.denominator) for v in c.numerator], 1) for c in self.coords))


def segre(P: ProjectivePoint, Q: ProjectivePoint) -> ProjectivePoint:
    N = P.conductor * Q.conductor // math.gcd(P.conductor, Q.conductor)
    return ProjectivePoint(N, tuple(a * b for a in P.coords for b in Q.coords))


@dataclass(frozen=True)
class HeightBreakdown:
    archimedean: float
    archimedean_error: float
    content_norm: int
    degree: int
    total: float
    error: float

    @property
    def finite(self) -> float:
        """−log(content norm)/φ: exact up to the final logarithm."""
        return 0.0 - math.log(self.content_norm) / self.degree

    def to_json(self) -> dict:
        from .numeric import fmt_real

        return {
            "archimedean": {"value": fmt_real(self.archimedean), "error": fmt_real(self.archimedean_error)},
            "finite": {
                "value": fmt_real(self.finite),
                "exact": f"-log({self.content_norm})/{self.degree}",
                "error": "0",
            },
            "total": {"value": fmt_real(self.total), "error": fmt_real(self.error)},
        }


def _archimedean_sum(coords: Sequence[Cyclotomic], precision: float, max_dps: int = 4000) -> tuple[float, float]:
    """(1/φ)·Σ_σ log max_i |σ(x_i)| with an error bound ≤ precision (escalating precision as needed)."""
    nz = [c for c in coords if not c.is_zero()]
    phi = nz[0].degree
    E = np.array([c.embeddings() for c in nz])
    delta = max(c.embedding_error() for c in nz)
    Mx = np.max(np.abs(E), axis=0)
    with np.errstate(divide="ignore"):
        logs = np.log(Mx)
        per = np.where(Mx > 2 * delta, np.log1p(delta / np.maximum(Mx - delta, 1e-300)), np.inf)
    bound = float(np.sum(per)) / phi
    if bound <= precision:
        return float(np.sum(logs)) / phi, bound
    ks = list(_units(nz[0].conductor))
    bad = [i for i in range(phi) if per[i] > precision / (2 * phi)]
    dps = 30
    while dps <= max_dps:
        with mpmath.workdps(dps):
            vals = [c.embeddings_mp([ks[i] for i in bad], dps + 10) for c in nz]
            eps_mp = mpmath.mpf(10) ** (-dps + 2) * max(c._l1() for c in nz + [Cyclotomic.rational(1, 1)])
            new_logs, new_err, ok = [], [], True
            for t in range(len(bad)):
                m = max(abs(v[t]) for v in vals)
                if m <= 2 * eps_mp:
                    ok = False
                    break
                new_logs.append(float(mpmath.log(m)))
                new_err.append(float(mpmath.log1p(eps_mp / (m - eps_mp))))
        if ok:
            logs = logs.copy()
            per = per.copy()
            for t, i in enumerate(bad):
                logs[i] = new_logs[t]
                per[i] = new_err[t]
            bound = float(np.sum(per)) / phi
            if bound <= precision:
                return float(np.sum(logs)) / phi, bound
        dps *= 2
    raise ArithmeticError("embedding precision target unattainable within the iteration cap")


def projective_height(P: ProjectivePoint, precision: float = 1e-12) -> HeightBreakdown:
    """Weil height of a point of ℙⁿ(ℚ(ζ_N)), normalised by [ℚ(ζ_N):ℚ]."""
    Q = P.integral()
    nz = [c for c in Q.coords if not c.is_zero()]
    phi = nz[0].degree
    arch, err = _archimedean_sum(nz, precision)
    cn = content_norm(nz, Q.conductor)
    total = arch - math.log(cn) / phi
    return HeightBreakdown(arch, err, cn, phi, total, err + 4 * np.finfo(float).eps * (abs(arch) + 1.0))


def height_tuple_Q(xs: Sequence) -> float:
    """Σ_v log max_i |x_i|_v for a rational tuple; −inf for the zero tuple."""
    fr = [to_fraction(x) for x in xs]
    if not fr or all(x == 0 for x in fr):
        return -math.inf
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (x.denominator for x in fr), 1)
    ints = [int(x * den) for x in fr]
    g = reduce(math.gcd, ints, 0)
    return math.log(max(abs(v) for v in ints) // g)


# ---------------------------------------------------------------------------
# axiom suite


def _random_cyclo(rng: np.random.Generator, N: int, integral: bool = False) -> Cyclotomic:
    phi = _phi(N)
    while True:
        num = [int(v) for v in rng.integers(-4, 5, phi)]
        den = 1 if integral else int(rng.integers(1, 4))
        x = Cyclotomic(N, [Fraction(v, den) for v in num])
        if not x.is_zero():
            return x


def gvf_axiom_suite(seed: int = 0, samples: int = 1000, max_conductor: int = 24, torsion_max: int = 50) -> dict:
    """Residuals of the height axioms on random rational and cyclotomic tuples."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 4242]))
    worst = {k: 0.0 for k in ("symmetry", "monotonicity", "segre", "triangle", "product_formula", "height_of_one")}
    bounds = {k: 0.0 for k in worst}

    def h(P):
        b = projective_height(P)
        return b.total, b.error

    for s in range(samples):
        N = 1 if s % 2 == 0 else int(rng.integers(1, max_conductor + 1))
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        x = [_random_cyclo(rng, N) for _ in range(n)]
        y = [_random_cyclo(rng, N) for _ in range(m)]
        Px = ProjectivePoint(N, tuple(x))
        hx, ex = h(Px)
        perm = list(rng.permutation(n))
        hp, ep = h(ProjectivePoint(N, tuple(x[i] for i in perm)))
        worst["symmetry"] = max(worst["symmetry"], abs(hp - hx))
        bounds["symmetry"] = max(bounds["symmetry"], ex + ep)
        hxy, exy = h(ProjectivePoint(N, tuple(x + y)))
        worst["monotonicity"] = max(worst["monotonicity"], hx - hxy)
        bounds["monotonicity"] = max(bounds["monotonicity"], ex + exy)
        Py = ProjectivePoint(N, tuple(y))
        hy, ey = h(Py)
        hs, es = h(segre(Px, Py))
        worst["segre"] = max(worst["segre"], abs(hs - hx - hy))
        bounds["segre"] = max(bounds["segre"], ex + ey + es)
        z = [_random_cyclo(rng, N) for _ in range(n)]
        sm = [a + b for a, b in zip(x, z)]
        if any(not c.is_zero() for c in sm):
            hsum, esum = h(ProjectivePoint(N, tuple(sm)))
            hxz, exz = h(ProjectivePoint(N, tuple(x + z)))
            worst["triangle"] = max(worst["triangle"], hsum - hxz - TRIANGLE_CONSTANT)
            bounds["triangle"] = max(bounds["triangle"], esum + exz)
        h1, e1 = h(ProjectivePoint(N, (x[0],)))
        worst["product_formula"] = max(worst["product_formula"], abs(h1))
        bounds["product_formula"] = max(bounds["product_formula"], e1)
    h11, e11 = h(ProjectivePoint.from_rationals([1, 1]))
    worst["height_of_one"] = abs(h11)
    bounds["height_of_one"] = e11
    torsion = 0.0
    for N in range(1, torsion_max + 1):
        for k in _units(N):
            t, _ = h(ProjectivePoint(N, (Cyclotomic.rational(N, 1), Cyclotomic.zeta(N, k))))
            torsion = max(torsion, abs(t))
    checks = {
        k: {"max_violation": float(max(0.0, worst[k])), "error_bound": float(bounds[k]), "passed": bool(max(0.0, worst[k]) <= bounds[k] + 1e-9)}
        for k in worst
    }
    checks["torsion_vanishing"] = {"max_violation": float(torsion), "error_bound": 1e-9, "passed": bool(torsion <= 1e-9)}
    return {"seed": seed, "samples": samples, "max_conductor": max_conductor, "checks": checks, "passed": all(c["passed"] for c in checks.values())}
