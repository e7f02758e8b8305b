"""Exact rational convex polytopes in vertex representation.

Hull combinatorics are proposed by Qhull on a float copy of the points and
then certified in exact integer arithmetic: every facet hyperplane is
recomputed from integer minors and checked against all input points, and the
exact boundary volume must agree with Qhull's.  A brute-force exact facet
enumeration is used if certification fails.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

RationalVector = tuple  # tuple[Fraction, ...]

__all__ = [
    "RationalVector",
    "Polytope",
    "LinearMapQ",
    "to_fraction",
    "to_vector",
    "convex_hull",
    "minkowski_sum",
    "minkowski_sum_many",
    "volume",
    "mixed_volume",
    "project",
    "newton_polytope",
    "box",
    "simplex",
]


def to_fraction(x) -> Fraction:
    """Parse an exact rational from int, Fraction, "p/q" / decimal string or [num, den]."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {x!r}") from exc
    if isinstance(x, (list, tuple)) and len(x) == 2:
        num, den = x
        if isinstance(num, bool) or isinstance(den, bool) or not isinstance(num, int) or not isinstance(den, int):
            raise ValueError(f"[num, den] pair must hold integers: {x!r}")
        if den == 0:
            raise ValueError("zero denominator")
        return Fraction(num, den)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("non-finite coordinate")
        return Fraction(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot interpret {x!r} as a rational")


def to_vector(v: Iterable) -> RationalVector:
    t = tuple(v)
    if all(type(c) is Fraction for c in t):
        return t
    return tuple(to_fraction(c) for c in t)


# ---------------------------------------------------------------------------
# exact integer helpers


def _lcm_den(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = d * v.denominator // math.gcd(d, v.denominator)
    return d


def _det_int(rows: list[list[int]]) -> int:
    """Fraction-free Bareiss determinant of a square integer matrix."""
    k = len(rows)
    if k == 0:
        return 1
    a = [list(r) for r in rows]
    sign = 1
    prev = 1
    for i in range(k - 1):
        if a[i][i] == 0:
            for r in range(i + 1, k):
                if a[r][i] != 0:
                    a[i], a[r] = a[r], a[i]
                    sign = -sign
                    break
            else:
                return 0
        piv = a[i][i]
        for r in range(i + 1, k):
            ar = a[r]
            ari = ar[i]
            ai = a[i]
            for c in range(i + 1, k):
                ar[c] = (piv * ar[c] - ari * ai[c]) // prev
        prev = piv
    return sign * a[k - 1][k - 1]


def _det_stack(mats: np.ndarray) -> list[int]:
    """Exact determinants of a stack of small integer matrices (shape s×k×k)."""
    s, k = mats.shape[0], mats.shape[1]
    if s == 0:
        return []
    if k == 0:
        return [1] * s
    bound = int(np.max(np.abs(mats))) if mats.dtype != object else max(abs(int(x)) for x in mats.flat)
    if k <= 4 and (bound ** k) * math.factorial(k) < 2**62 and mats.dtype != object:
        m = mats.astype(np.int64)
        if k == 1:
            d = m[:, 0, 0]
        elif k == 2:
            d = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        elif k == 3:
            d = (
                m[:, 0, 0] * (m[:, 1, 1] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 1])
                - m[:, 0, 1] * (m[:, 1, 0] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 0])
                + m[:, 0, 2] * (m[:, 1, 0] * m[:, 2, 1] - m[:, 1, 1] * m[:, 2, 0])
            )
        else:
            d = np.zeros(s, dtype=np.int64)
            for j in range(4):
                cols = [c for c in range(4) if c != j]
                sub = m[:, 1:, :][:, :, cols]
                minor = (
                    sub[:, 0, 0] * (sub[:, 1, 1] * sub[:, 2, 2] - sub[:, 1, 2] * sub[:, 2, 1])
                    - sub[:, 0, 1] * (sub[:, 1, 0] * sub[:, 2, 2] - sub[:, 1, 2] * sub[:, 2, 0])
                    + sub[:, 0, 2] * (sub[:, 1, 0] * sub[:, 2, 1] - sub[:, 1, 1] * sub[:, 2, 0])
                )
                d = d + (-1) ** j * m[:, 0, j] * minor
        return [int(x) for x in d]
    return [_det_int([[int(x) for x in row] for row in mat]) for mat in mats]


def _row_echelon(rows: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over ℚ; returns nonzero rows and pivot columns."""
    a = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(a):
            break
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a[:r], pivots


class _IntBasis:
    """Fully reduced integer row basis, built incrementally (fraction-free)."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows: list[list[int]] = []
        self.pivots: list[int] = []

    def add(self, row: Sequence[int]) -> bool:
        r = [int(x) for x in row]
        for b, c in zip(self.rows, self.pivots):
            if r[c]:
                f, g = b[c], r[c]
                r = [f * x - g * y for x, y in zip(r, b)]
        c = next((i for i, x in enumerate(r) if x), None)
        if c is None:
            return False
        g = 0
        for x in r:
            g = math.gcd(g, x)
        r = [x // g for x in r]
        for i, b in enumerate(self.rows):
            if b[c]:
                f, h = r[c], b[c]
                nb = [f * x - h * y for x, y in zip(b, r)]
                g = 0
                for x in nb:
                    g = math.gcd(g, x)
                self.rows[i] = [x // g for x in nb]
        self.rows.append(r)
        self.pivots.append(c)
        return True


def _int_rank(rows: Sequence[Sequence[int]], cap: int | None = None) -> int:
    if not rows:
        return 0
    basis = _IntBasis(len(rows[0]))
    for r in rows:
        basis.add(r)
        if cap is not None and len(basis.rows) >= cap:
            break
    return len(basis.rows)


# ---------------------------------------------------------------------------
# hull certification


@dataclass(frozen=True)
class _HullData:
    """Hull of integer points in ℤ^k (full-dimensional, k ≥ 1)."""

    vertex_idx: tuple[int, ...]
    normals: tuple[tuple[int, ...], ...]  # outward, primitive
    offsets: tuple[int, ...]  # normal·x ≤ offset
    simplices: tuple[tuple[int, ...], ...]  # boundary simplices, indices into points
    abs_det_sum: int  # Σ|det| of pyramids from the first vertex, = k!·vol


def _as_int_array(points: list[tuple[int, ...]]) -> np.ndarray:
    bound = max((abs(x) for p in points for x in p), default=0)
    if bound < 2**40:
        return np.array(points, dtype=np.int64)
    return np.array(points, dtype=object)


def _facet_normal(pts: np.ndarray, simplex: Sequence[int]) -> tuple[int, ...] | None:
    base = pts[simplex[0]]
    diffs = [[int(x) for x in (pts[i] - base)] for i in simplex[1:]]
    k = len(base)
    normal = []
    for j in range(k):
        minor = [[row[c] for c in range(k) if c != j] for row in diffs]
        normal.append((-1) ** j * _det_int(minor))
    g = 0
    for x in normal:
        g = math.gcd(g, x)
    if g == 0:
        return None
    return tuple(x // g for x in normal)


def _normals_stack(pts: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Primitive integer normals (rows) of the hyperplanes through each simplex; zero rows if degenerate."""
    k = pts.shape[1]
    sp = pts[simplices]  # F × k × k
    diffs = sp[:, 1:, :] - sp[:, :1, :]
    cols = []
    for j in range(k):
        keep = [c for c in range(k) if c != j]
        dets = _det_stack(diffs[:, :, keep])
        cols.append([(-1) ** j * d for d in dets])
    normals = np.array(cols, dtype=object).T
    out = []
    for row in normals:
        g = 0
        for x in row:
            g = math.gcd(g, int(x))
        out.append(tuple(int(x) // g for x in row) if g else None)
    return out


def _certify_int64(pts: np.ndarray, simplices: np.ndarray):
    """Vectorized _certify for int64 input whose intermediate products cannot overflow; None if unsafe."""
    n_pts, k = pts.shape
    B = int(np.max(np.abs(pts))) if pts.size else 0
    nbound = (2 * B) ** (k - 1) * math.factorial(k - 1)
    if k > 5 or nbound * max(n_pts, 1) * B * k * 2 >= 2**62:
        return False
    sp = pts[simplices]
    diffs = sp[:, 1:, :] - sp[:, :1, :]
    cols = []
    for j in range(k):
        keep = [c for c in range(k) if c != j]
        cols.append((-1) ** j * np.array(_det_stack(diffs[:, :, keep]), dtype=np.int64))
    N = np.stack(cols, axis=1)
    g = np.gcd.reduce(N, axis=1)
    ok = g != 0
    N, sp0 = N[ok] // g[ok][:, None], sp[ok, 0, :]
    if N.shape[0] == 0:
        return None
    off = np.einsum("ij,ij->i", N, sp0)
    side = N @ pts.sum(axis=0) - n_pts * off
    if np.any(side == 0):
        return None
    flip = np.where(side > 0, -1, 1)
    N, off = N * flip[:, None], off * flip
    uniq, first, inv = np.unique(N, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    if np.any(off != off[first][inv]):
        return None
    order = np.argsort(first)
    N, off = uniq[order], off[first][order]
    vals = pts @ N.T
    if np.any(vals > off[None, :]):
        return None
    return [tuple(int(x) for x in r) for r in N], [int(x) for x in off], vals == off[None, :]


def _certify(pts: np.ndarray, simplices: np.ndarray):
    n_pts, k = pts.shape
    if pts.dtype != object:
        fast = _certify_int64(pts, np.asarray(simplices))
        if fast is not False:
            return fast
    centroid_num = [int(x) for x in pts.sum(axis=0)]
    seen: dict[tuple[int, ...], int] = {}
    normals: list[tuple[int, ...]] = []
    offsets: list[int] = []
    for simp, nrm in zip(simplices, _normals_stack(pts, simplices)):
        if nrm is None:
            continue
        off = sum(a * int(b) for a, b in zip(nrm, pts[simp[0]]))
        side = sum(a * b for a, b in zip(nrm, centroid_num)) - n_pts * off
        if side == 0:
            return None
        if side > 0:
            nrm = tuple(-x for x in nrm)
            off = -off
        if nrm not in seen:
            seen[nrm] = off
            normals.append(nrm)
            offsets.append(off)
        elif seen[nrm] != off:
            return None
    if not normals:
        return None
    pmax = int(np.max(np.abs(pts))) if pts.dtype != object else max(abs(int(x)) for x in pts.flat)
    nmax = max(abs(x) for nrm in normals for x in nrm)
    if pmax * nmax * k < 2**62 and pts.dtype != object:
        nmat = np.array(normals, dtype=np.int64)
        vals = pts @ nmat.T
    else:
        nmat = np.array(normals, dtype=object)
        vals = pts.astype(object) @ nmat.T
    offs = np.array(offsets, dtype=vals.dtype)
    if np.any(vals > offs[None, :]):
        return None
    return normals, offsets, vals == offs[None, :]


def _hull_full(pts: np.ndarray) -> _HullData:
    """Certified hull of a full-dimensional integer point set in ℤ^k, k ≥ 2."""
    n_pts, k = pts.shape
    fpts = pts.astype(float)
    center = fpts.mean(axis=0)
    scale = max(1.0, float(np.max(np.abs(fpts - center))))
    try:
        hull = ConvexHull((fpts - center) / scale, qhull_options="Qt Qc Qx" if k >= 5 else "Qt Qc")
        cert = _certify(pts, hull.simplices)
    except QhullError:
        hull, cert = None, None
    if cert is not None:
        normals, offsets, incident = cert
        candidates = sorted(set(int(i) for i in hull.vertices))
        vertex_idx = _classify_vertices(candidates, normals, incident, k)
        simplices = list(map(tuple, hull.simplices.tolist()))
        abs_det = _pyramid_sum(pts, vertex_idx[0], simplices)
        qvol = hull.volume * scale**k * math.factorial(k)
        if abs(abs_det - qvol) <= 1e-7 * max(1.0, qvol):
            return _HullData(tuple(vertex_idx), tuple(normals), tuple(offsets), tuple(simplices), abs_det)
    return _hull_bruteforce(pts)


def _classify_vertices(candidates, normals, incident, k) -> list[int]:
    """Candidates whose incident facet normals have rank k."""
    candidates = list(candidates)
    if not candidates:
        return []
    fnormals = np.array(normals, dtype=float)
    inc = np.asarray(incident)[candidates]
    stack = inc[:, :, None] * fnormals[None, :, :]
    if stack.shape[1] < k:
        return []
    sv = np.linalg.svd(stack, compute_uv=False)
    out = []
    for c, i in enumerate(candidates):
        if inc[c].sum() < k:
            continue
        # integer matrices: a float rank-k certificate with a wide margin is exact
        if sv[c, k - 1] > 1e-6 * sv[c, 0] or _int_rank([normals[f] for f in np.nonzero(inc[c])[0]], cap=k) == k:
            out.append(i)
    return out


def _pyramid_sum(pts: np.ndarray, apex: int, simplices: list[tuple[int, ...]]) -> int:
    use = [s for s in simplices if apex not in s]
    if not use:
        return 0
    arr = pts[np.array(use)] - pts[apex][None, None, :]
    return sum(abs(d) for d in _det_stack(arr))


def _hull_bruteforce(pts: np.ndarray) -> _HullData:
    """Exact facet enumeration over all k-subsets (fallback, small inputs only)."""
    n_pts, k = pts.shape
    if math.comb(n_pts, k) > 200_000:
        raise RuntimeError("hull certification failed and input is too large for exact enumeration")
    planes: dict[tuple[tuple[int, ...], int], None] = {}
    for simp in itertools.combinations(range(n_pts), k):
        nrm = _facet_normal(pts, simp)
        if nrm is None:
            continue
        off = sum(a * int(b) for a, b in zip(nrm, pts[simp[0]]))
        vals = [sum(a * int(b) for a, b in zip(nrm, p)) for p in pts]
        if all(v <= off for v in vals):
            planes[(nrm, off)] = None
        elif all(v >= off for v in vals):
            planes[(tuple(-x for x in nrm), -off)] = None
    normals = [nrm for nrm, _ in planes]
    offsets = [off for _, off in planes]
    incident = np.array(
        [[sum(a * int(b) for a, b in zip(nrm, p)) == off for nrm, off in zip(normals, offsets)] for p in pts]
    )
    vertex_idx = _classify_vertices(range(n_pts), normals, incident, k)
    # triangulate each facet by recursion on its vertex set
    simplices: list[tuple[int, ...]] = []
    for f in range(len(normals)):
        fverts = [i for i in vertex_idx if incident[i, f]]
        simplices.extend(_triangulate_facet(pts, fverts, k))
    abs_det = _pyramid_sum(pts, vertex_idx[0], simplices)
    return _HullData(tuple(vertex_idx), tuple(normals), tuple(offsets), tuple(simplices), abs_det)


def _triangulate_facet(pts: np.ndarray, fverts: list[int], k: int) -> list[tuple[int, ...]]:
    """Triangulate a (k-1)-dimensional facet given by its vertices (pulling from the first vertex)."""
    if len(fverts) == k:
        return [tuple(fverts)]
    sub = pts[fverts]
    base = sub[0]
    diffs = [[Fraction(int(x)) for x in (p - base)] for p in sub[1:]]
    _, piv = _row_echelon(diffs, k)
    proj = np.array([[int(p[c]) for c in piv] for p in sub], dtype=object)
    inner = _hull_lowdim(proj)
    apex = 0
    out = []
    if inner is None:
        return out
    for s in inner:
        if apex in s:
            continue
        out.append(tuple([fverts[apex]] + [fverts[i] for i in s]))
    return out


def _hull_lowdim(pts: np.ndarray):
    """Boundary simplices of the hull of full-dimensional points in ℤ^j (j ≥ 1)."""
    j = pts.shape[1]
    if j == 1:
        vals = [int(x[0]) for x in pts]
        return [(vals.index(min(vals)),), (vals.index(max(vals)),)]
    data = _hull_bruteforce(pts.astype(object)) if len(pts) <= 12 else _hull_full(_as_int_array([tuple(int(x) for x in p) for p in pts]))
    return list(data.simplices)


# ---------------------------------------------------------------------------
# polytope type


@dataclass(frozen=True)
class _Chart:
    """Exact affine chart of the affine hull: a coordinate projection that is injective on it."""

    pivots: tuple[int, ...]
    base: RationalVector
    lift: tuple[tuple[Fraction, ...], ...]  # ambient_dim rows × k columns: x = base + lift·(y − base[pivots])


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of finitely many rational points; vertices irredundant and lexicographically sorted."""

    ambient_dim: int
    vertices: tuple[RationalVector, ...]
    _hull: object = field(default=None, repr=False, compare=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polytope) and self.ambient_dim == other.ambient_dim and self.vertices == other.vertices

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.ambient_dim, self.vertices))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        vs = ", ".join("(" + ",".join(str(c) for c in v) + ")" for v in self.vertices)
        return f"Polytope(dim={self.ambient_dim}, vertices=[{vs}])"

    @property
    def dim(self) -> int:
        """Dimension of the affine hull."""
        return len(self._info["chart"].pivots)

    @property
    def is_full_dimensional(self) -> bool:
        return self.dim == self.ambient_dim

    @cached_property
    def _info(self) -> dict:
        if self._hull is not None:
            return self._hull
        return _analyse(self.vertices, self.ambient_dim)

    @property
    def chart(self) -> _Chart:
        return self._info["chart"]

    def facets(self) -> list[tuple[RationalVector, Fraction]]:
        """Inequalities a·x ≤ b of the facets, in chart coordinates when not full-dimensional."""
        info = self._info
        data: _HullData | None = info["hull"]
        scale = info["scale"]
        k = self.dim
        if k == 0:
            return []
        if k == 1:
            piv = self.chart.pivots[0]
            lo = min(v[piv] for v in self.vertices)
            hi = max(v[piv] for v in self.vertices)
            return [((Fraction(-1),), -lo), ((Fraction(1),), hi)]
        return [(tuple(Fraction(a) for a in nrm), Fraction(off, scale)) for nrm, off in zip(data.normals, data.offsets)]

    def equalities(self) -> list[tuple[RationalVector, Fraction]]:
        """Equations a·x = b cutting out the affine hull."""
        ch = self.chart
        n = self.ambient_dim
        out = []
        piv = set(ch.pivots)
        for i in range(n):
            if i in piv:
                continue
            # x_i = base_i + Σ_j lift[i][j] (x_{p_j} − base_{p_j})
            a = [Fraction(0)] * n
            a[i] = Fraction(1)
            b = ch.base[i]
            for j, p in enumerate(ch.pivots):
                a[p] -= ch.lift[i][j]
                b -= ch.lift[i][j] * ch.base[p]
            out.append((tuple(a), b))
        return out

    def to_chart(self, x: Sequence) -> RationalVector:
        return tuple(to_fraction(x[p]) for p in self.chart.pivots)

    def from_chart(self, y: Sequence) -> RationalVector:
        ch = self.chart
        d = [to_fraction(yj) - ch.base[p] for yj, p in zip(y, ch.pivots)]
        return tuple(ch.base[i] + sum((ch.lift[i][j] * d[j] for j in range(len(d))), Fraction(0)) for i in range(self.ambient_dim))

    def contains(self, x: Sequence) -> bool:
        x = to_vector(x)
        if len(x) != self.ambient_dim:
            raise ValueError("dimension mismatch")
        for a, b in self.equalities():
            if sum((ai * xi for ai, xi in zip(a, x)), Fraction(0)) != b:
                return False
        y = self.to_chart(x)
        return all(sum((ai * yi for ai, yi in zip(a, y)), Fraction(0)) <= b for a, b in self.facets())

    def volume(self) -> Fraction:
        return volume(self)

    def translate(self, t: Sequence) -> "Polytope":
        t = to_vector(t)
        return convex_hull([tuple(a + b for a, b in zip(v, t)) for v in self.vertices], self.ambient_dim)

    def scale(self, c) -> "Polytope":
        c = to_fraction(c)
        if c < 0:
            raise ValueError("dilation factor must be nonnegative")
        return convex_hull([tuple(c * a for a in v) for v in self.vertices], self.ambient_dim)

    def bounding_box(self) -> tuple[RationalVector, RationalVector]:
        lo = tuple(min(v[i] for v in self.vertices) for i in range(self.ambient_dim))
        hi = tuple(max(v[i] for v in self.vertices) for i in range(self.ambient_dim))
        return lo, hi

    def to_json(self) -> dict:
        return {"dim": self.ambient_dim, "vertices": [[_frac_str(c) for c in v] for v in self.vertices]}

    @staticmethod
    def from_json(obj: dict) -> "Polytope":
        if not isinstance(obj, dict) or "dim" not in obj or "vertices" not in obj:
            raise ValueError("polytope JSON needs 'dim' and 'vertices'")
        dim = obj["dim"]
        if not isinstance(dim, int) or dim < 0:
            raise ValueError("'dim' must be a natural number")
        return convex_hull([to_vector(v) for v in obj["vertices"]], dim)


def _frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x)


def _analyse(points: Sequence[RationalVector], n: int) -> dict:
    """Chart, integer scaling and certified hull data for a finite point set."""
    pts = list(points)
    scale = _lcm_den(c for p in pts for c in p)
    ints = [tuple(c.numerator * (scale // c.denominator) for c in p) for p in pts]
    return _analyse_ints(ints, scale, n, pts[0])


def _analyse_ints(ints: Sequence[tuple[int, ...]], scale: int, n: int, first: RationalVector) -> dict:
    """As ``_analyse`` for points already written as ints / scale."""
    p0 = ints[0]
    basis = _IntBasis(n)
    for q in ints[1:]:
        if basis.add([a - b for a, b in zip(q, p0)]) and len(basis.rows) == n:
            break
    k = len(basis.rows)
    if k == n:
        piv = list(range(n))
        lift = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
    else:
        echelon, piv = _row_echelon([[Fraction(x) for x in r] for r in basis.rows], n)
        lift = tuple(tuple(echelon[j][i] for j in range(k)) for i in range(n))
    chart = _Chart(tuple(piv), tuple(first), lift)
    info = {"chart": chart, "scale": scale, "hull": None}
    if k >= 2:
        ipts = _as_int_array([tuple(p[c] for c in piv) for p in ints])
        info["hull"] = _hull_full(ipts)
    return info


def convex_hull(points: Iterable[Sequence], dim: int) -> Polytope:
    """Irredundant vertex set of the hull, lexicographically ordered."""
    # first-occurrence order keeps the result deterministic without sorting every input point
    pts = list(dict.fromkeys(map(to_vector, points)))
    if not pts:
        raise ValueError("convex_hull of an empty set")
    for p in pts:
        if len(p) != dim:
            raise ValueError(f"point {p} has length {len(p)}, expected {dim}")
    info = _analyse(pts, dim)
    k = len(info["chart"].pivots)
    if k == 0:
        verts = [pts[0]]
    elif k == 1:
        c = info["chart"].pivots[0]
        verts = sorted({min(pts, key=lambda p: p[c]), max(pts, key=lambda p: p[c])})
    else:
        data: _HullData = info["hull"]
        verts = sorted(pts[i] for i in data.vertex_idx)
    # chart, scale, facets and volume describe the hull, so they stay valid for the vertex subset
    return Polytope(dim, tuple(verts), info)


def minkowski_sum(P: Polytope, Q: Polytope) -> Polytope:
    if P.ambient_dim != Q.ambient_dim:
        raise ValueError("Minkowski sum of polytopes in different dimensions")
    n = P.ambient_dim
    if len(P.vertices) * len(Q.vertices) <= 8:
        return convex_hull({tuple(a + b for a, b in zip(p, q)) for p in P.vertices for q in Q.vertices}, n)
    # sum on a common integer grid; only the hull vertices go back to Fractions
    scale = _lcm_den(c for R in (P, Q) for v in R.vertices for c in v)

    def grid(R):
        return [tuple(c.numerator * (scale // c.denominator) for c in v) for v in R.vertices]

    ints = list(dict.fromkeys(tuple(a + b for a, b in zip(p, q)) for p in grid(P) for q in grid(Q)))
    return _hull_of_ints(ints, scale, n)[0]


def _hull_of_ints(ints: Sequence[tuple[int, ...]], scale: int, n: int) -> tuple[Polytope, list[int]]:
    """Hull of the distinct points ints / scale, with the indices of its vertices."""
    info = _analyse_ints(ints, scale, n, tuple(Fraction(c, scale) for c in ints[0]))
    idx = _vertex_indices(info, ints)
    return Polytope(n, tuple(sorted(tuple(Fraction(c, scale) for c in ints[i]) for i in idx)), info), idx


def _vertex_indices(info: dict, ints: Sequence[tuple[int, ...]]) -> list[int]:
    piv = info["chart"].pivots
    if len(piv) == 0:
        return [0]
    if len(piv) == 1:
        c = piv[0]
        return sorted({min(range(len(ints)), key=lambda i: ints[i][c]), max(range(len(ints)), key=lambda i: ints[i][c])})
    return list(info["hull"].vertex_idx)


def minkowski_sum_many(Ps: Sequence[Polytope]) -> Polytope:
    if not Ps:
        raise ValueError("empty Minkowski sum")
    out = Ps[0]
    for Q in Ps[1:]:
        out = minkowski_sum(out, Q)
    return out


def volume(P: Polytope) -> Fraction:
    """Lebesgue volume in ℝ^ambient_dim (ℤⁿ covolume 1); 0 if lower-dimensional."""
    n = P.ambient_dim
    if n == 0:
        return Fraction(1)
    if P.dim < n:
        return Fraction(0)
    info = P._info
    if n == 1:
        return P.vertices[-1][0] - P.vertices[0][0]
    data: _HullData = info["hull"]
    return Fraction(data.abs_det_sum, math.factorial(n) * info["scale"] ** n)


def mixed_volume(Ps: Sequence[Polytope]) -> Fraction:
    """Σ_{∅≠S} (−1)^{n−|S|} vol(Σ_S P); the empty tuple in ℝ⁰ has mixed volume 1."""
    Ps = list(Ps)
    n = len(Ps)
    for P in Ps:
        if P.ambient_dim != n:
            raise ValueError(f"mixed volume in ℝ^{n} needs {n} polytopes of ambient dimension {n}")
    if n == 0:
        return Fraction(1)
    total = Fraction(0)
    for mask in range(1, 1 << n):
        members = [P for i, P in enumerate(Ps) if mask >> i & 1]
        total += (-1) ** (n - len(members)) * volume(_fold_minkowski(tuple(sorted(members, key=hash))))
    return total


@lru_cache(maxsize=4096)
def _fold_minkowski(Ps: tuple) -> Polytope:
    # sorted by hash upstream, so permutations reuse partial sums
    return Ps[0] if len(Ps) == 1 else minkowski_sum(_fold_minkowski(Ps[:-1]), Ps[-1])


@dataclass(frozen=True)
class LinearMapQ:
    """Rational matrix acting on column vectors: target_dim × source_dim."""

    matrix: tuple[tuple[Fraction, ...], ...]
    source_dim: int
    target_dim: int

    def __post_init__(self):
        if len(self.matrix) != self.target_dim or any(len(r) != self.source_dim for r in self.matrix):
            raise ValueError("matrix shape does not match declared dimensions")

    @staticmethod
    def from_rows(rows: Sequence[Sequence], source_dim: int | None = None) -> "LinearMapQ":
        mat = tuple(to_vector(r) for r in rows)
        if source_dim is None:
            if not mat:
                raise ValueError("cannot infer source dimension of an empty matrix")
            source_dim = len(mat[0])
        return LinearMapQ(mat, source_dim, len(mat))

    @staticmethod
    def identity(n: int) -> "LinearMapQ":
        return LinearMapQ(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)), n, n)

    @staticmethod
    def coordinate_projection(n: int, keep: Sequence[int]) -> "LinearMapQ":
        return LinearMapQ(tuple(tuple(Fraction(int(j == i)) for j in range(n)) for i in keep), n, len(keep))

    def apply(self, v: Sequence) -> RationalVector:
        v = to_vector(v)
        if len(v) != self.source_dim:
            raise ValueError("vector length does not match the source dimension")
        return tuple(sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in self.matrix)

    def transpose(self) -> "LinearMapQ":
        return LinearMapQ(tuple(tuple(self.matrix[i][j] for i in range(self.target_dim)) for j in range(self.source_dim)), self.target_dim, self.source_dim)

    def rank(self) -> int:
        return len(_row_echelon([list(r) for r in self.matrix], self.source_dim)[1]) if self.target_dim else 0


def project(P: Polytope, gamma: LinearMapQ) -> Polytope:
    if gamma.source_dim != P.ambient_dim:
        raise ValueError("map source dimension differs from the polytope's ambient dimension")
    return convex_hull({gamma.apply(v) for v in P.vertices}, gamma.target_dim)


def newton_polytope(f) -> Polytope:
    """Hull of the exponent vectors carrying a nonzero coefficient."""
    exps = [e for e, c in f.terms.items() if c != 0]
    if not exps:
        raise ValueError("Newton polytope of the zero polynomial")
    return convex_hull(exps, f.nvars)


def box(lo: Sequence, hi: Sequence) -> Polytope:
    lo, hi = to_vector(lo), to_vector(hi)
    return convex_hull(itertools.product(*[(a, b) for a, b in zip(lo, hi)]), len(lo))


def simplex(n: int, k=1) -> Polytope:
    """k times the standard unit simplex in ℝⁿ."""
    k = to_fraction(k)
    pts = [tuple(Fraction(0) for _ in range(n))]
    for i in range(n):
        pts.append(tuple(k if j == i else Fraction(0) for j in range(n)))
    return convex_hull(pts, n)
