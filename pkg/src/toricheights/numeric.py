"""Shared numeric plumbing: estimates with error fields, seeded batches, rank-1 lattice rules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = ["Estimate", "QuadratureConfig", "fmt_real", "batch_rngs", "lattice_rule", "lattice_points"]


def fmt_real(x: float) -> str:
    """12 significant digits, the serialization used for all reals."""
    if x is None:
        return "nan"
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class Estimate:
    """A real value with an error field.

    ``kind`` is "bound" for a deterministic error bound and "stderr" for a
    batch standard error of a stochastic estimate.
    """

    value: float
    error: float
    kind: str = "bound"

    def __float__(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        return {"value": fmt_real(self.value), "error": fmt_real(self.error), "error_kind": self.kind}

    def __add__(self, other: "Estimate | float") -> "Estimate":
        if isinstance(other, Estimate):
            if self.kind == other.kind == "stderr":
                return Estimate(self.value + other.value, math.hypot(self.error, other.error), "stderr")
            return Estimate(self.value + other.value, self.error + other.error, "bound")
        return Estimate(self.value + float(other), self.error, self.kind)

    __radd__ = __add__

    def scaled(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.error * abs(c), self.kind)


@dataclass(frozen=True)
class QuadratureConfig:
    """Sampling budget and grid parameters for every stochastic or sampled computation.

    budget  -- quadrature nodes per evaluation (split over ``batches`` random shifts)
    u_step / m_step -- grid steps for sampled Ronkin functions and their conjugates
                       (None selects a default by dimension)
    window_margin -- extra radius added to the sampling window beyond the tropical kinks
    """

    budget: int = 1024
    seed: int = 0
    scheme: str = "rank1-lattice"
    batches: int = 4
    u_step: float | None = None
    m_step: float | None = None
    window_margin: float = 14.0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.batches < 2:
            raise ValueError("at least two batches are needed for an error estimate")
        if self.scheme not in ("rank1-lattice", "mc"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.u_step is not None and self.u_step <= 0 or self.m_step is not None and self.m_step <= 0:
            raise ValueError("grid steps must be positive")

    def replace(self, **kw) -> "QuadratureConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return QuadratureConfig(**d)


def batch_rngs(seed: int, batches: int, stream: int = 0) -> list[np.random.Generator]:
    """Independent generators derived deterministically from (seed, stream, batch index)."""
    return [np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, stream, b])) for b in range(batches)]


def _fibonacci_upto(n: int) -> tuple[int, int]:
    a, b = 1, 2
    while b + a <= n:
        a, b = b, a + b
    return b, a


def _korobov_score(n: int, a: int, dim: int) -> float:
    k = np.arange(n, dtype=np.int64)
    prod = np.ones(n)
    z = 1
    for _ in range(dim):
        x = (k * z % n) / n
        prod *= 1.0 + 2.0 * math.pi**2 * (x * x - x + 1.0 / 6.0)
        z = z * a % n
    return float(prod.mean() - 1.0)


@lru_cache(maxsize=64)
def lattice_rule(budget: int, dim: int) -> tuple[int, tuple[int, ...]]:
    """A rank-1 lattice (npts, generating vector) with npts ≤ budget.

    dim 1: equispaced; dim 2: Fibonacci lattice; dim ≥ 3: Korobov vector chosen
    by a small search on the P_2 criterion.
    """
    budget = max(1, int(budget))
    if dim <= 1:
        return budget, (1,)
    if dim == 2:
        if budget < 3:
            return budget, (1, 1)
        n, f = _fibonacci_upto(budget)
        return n, (1, f)
    n = budget
    if n < 5:
        return n, tuple([1] * dim)
    cands = sorted({max(2, int(round(n * t))) % n for t in np.linspace(0.05, 0.5, 48)} - {0, 1})
    best = min(cands, key=lambda a: (_korobov_score(n, a, dim), a))
    z, out = 1, []
    for _ in range(dim):
        out.append(z)
        z = z * best % n
    return n, tuple(out)


def lattice_points(npts: int, z: tuple[int, ...], shift: np.ndarray) -> np.ndarray:
    k = np.arange(npts, dtype=np.float64)[:, None]
    return np.mod(k * np.asarray(z, dtype=np.float64)[None, :] / npts + shift[None, :], 1.0)
