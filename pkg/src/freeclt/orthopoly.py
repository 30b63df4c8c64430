"""Probabilists' Hermite and monic second-kind Chebyshev polynomials.

Both families are monic. ``H_n`` is orthogonal for the standard normal law
with ``E[H_n^2] = n!``; ``U_n`` lives on ``[-2, 2]`` and is orthonormal for the
semicircle density ``sqrt(4 - x^2) / (2 pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DegenerateFunctionalError, NumericError, SizeLimitError

MAX_DEGREE = 60
RANK_TOL = 1e-12


class Basis(str, Enum):
    HERMITE = "hermite"
    CHEBYSHEV = "chebyshev"

    @property
    def world(self) -> str:
        return "classical" if self is Basis.HERMITE else "free"

    @classmethod
    def for_world(cls, world: str) -> "Basis":
        if world == "classical":
            return cls.HERMITE
        if world == "free":
            return cls.CHEBYSHEV
        raise ContractError(f"unknown world {world!r}")


def _check_degree(n):
    if n < 0:
        raise ContractError("polynomial degree must be nonnegative")
    if n > MAX_DEGREE:
        raise SizeLimitError(f"degree {n} exceeds the cap {MAX_DEGREE}", cap=MAX_DEGREE)


def hermite_eval(n: int, x):
    """``H_n(x)`` via ``H_{n+1} = x H_n - n H_{n-1}``."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def chebyshev_eval(n: int, x):
    """``U_n(x)`` via ``x U_k = U_{k-1} + U_{k+1}``."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        return prev if prev.ndim else float(prev)
    for _ in range(1, n):
        prev, cur = cur, x * cur - prev
    return cur if cur.ndim else float(cur)


def basis_eval(basis: Basis, n: int, x):
    return hermite_eval(n, x) if Basis(basis) is Basis.HERMITE else chebyshev_eval(n, x)


def norm_squared(basis: Basis, n: int) -> float:
    return float(math.factorial(n)) if Basis(basis) is Basis.HERMITE else 1.0


@lru_cache(maxsize=64)
def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes and weights for the standard normal law (weights sum to 1)."""
    if order < 1:
        raise ContractError("quadrature order must be positive")
    off = np.sqrt(np.arange(1, order, dtype=float))
    nodes = np.linalg.eigvalsh(np.diag(off, 1) + np.diag(off, -1))
    # Christoffel weights 1 / sum_k p_k(x)^2 with orthonormal p_k = He_k / sqrt(k!);
    # eigenvector components lose relative accuracy on the tiny outer weights
    prev, cur = np.zeros_like(nodes), np.ones_like(nodes)
    total = np.ones_like(nodes)
    for k in range(order - 1):
        prev, cur = cur, (nodes * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
        total += cur * cur
    weights = 1.0 / total
    return nodes, weights / weights.sum()


@lru_cache(maxsize=64)
def gauss_chebyshev_u(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the semicircle law on [-2, 2]; exact to degree ``2*order - 1``."""
    if order < 1:
        raise ContractError("quadrature order must be positive")
    j = np.arange(1, order + 1)
    theta = j * np.pi / (order + 1)
    return 2.0 * np.cos(theta), (2.0 / (order + 1)) * np.sin(theta) ** 2


def quadrature(basis: Basis, order: int):
    return gauss_hermite(order) if Basis(basis) is Basis.HERMITE else gauss_chebyshev_u(order)


@dataclass(frozen=True)
class FunctionalSeries:
    basis: Basis
    coeffs: tuple[float, ...]
    dropped_c0: float = 0.0
    tail_mass: float = 0.0
    tol: float = RANK_TOL

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        c = tuple(float(v) for v in self.coeffs)
        if not c:
            c = (0.0,)
        if c[0] != 0.0:
            raise ContractError("c_0 must be 0; use FunctionalSeries.centered to drop the mean")
        if not all(math.isfinite(v) for v in c):
            raise NumericError("non-finite expansion coefficient")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def centered(cls, basis, coeffs: Sequence[float], **kw) -> "FunctionalSeries":
        c = list(coeffs) or [0.0]
        c0, c[0] = float(c[0]), 0.0
        return cls(basis, tuple(c), dropped_c0=c0, **kw)

    @classmethod
    def pure(cls, basis, n: int, c: float = 1.0) -> "FunctionalSeries":
        coeffs = [0.0] * (n + 1)
        coeffs[n] = c
        return cls(basis, tuple(coeffs))

    @property
    def max_degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def rank(self) -> int:
        return rank(self)

    def weights(self) -> np.ndarray:
        """``c_k^2 ||P_k||^2``: the coefficient of ``r(t)^k`` in the induced covariance."""
        return np.array([c * c * norm_squared(self.basis, k) for k, c in enumerate(self.coeffs)])

    def norm_squared(self) -> float:
        return float(self.weights().sum())

    def support(self) -> list[int]:
        return [k for k, c in enumerate(self.coeffs) if k >= 1 and abs(c) > self.tol]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, c in enumerate(self.coeffs):
            if c:
                out = out + c * basis_eval(self.basis, k, x)
        return out

    def truncated(self, n: int) -> "FunctionalSeries":
        return FunctionalSeries(self.basis, self.coeffs[: n + 1], tol=self.tol)

    def to_json(self) -> dict:
        try:
            r = self.rank
        except DegenerateFunctionalError:
            r = None
        return {"basis": self.basis.value, "coeffs": list(self.coeffs), "rank": r,
                "dropped_c0": self.dropped_c0, "tail_mass": self.tail_mass}

    @classmethod
    def from_json(cls, d: dict) -> "FunctionalSeries":
        return cls(Basis(d["basis"]), tuple(d["coeffs"]), dropped_c0=d.get("dropped_c0", 0.0),
                   tail_mass=d.get("tail_mass", 0.0))


def expand(f: Callable, basis, max_deg: int, quad_order: int | None = None) -> FunctionalSeries:
    """Project ``f`` onto ``P_0..P_max_deg`` by Gaussian quadrature.

    The mean coefficient is removed and reported as ``dropped_c0``; the L2 mass
    of ``f`` not captured by the kept coefficients is ``tail_mass``.
    """
    basis = Basis(basis)
    _check_degree(max_deg)
    if quad_order is None:
        quad_order = max(2 * max_deg + 1, 128)
    if quad_order < 2 * max_deg + 1:
        raise ContractError(f"quad_order {quad_order} < 2*max_deg+1 = {2 * max_deg + 1}")
    x, w = quadrature(basis, quad_order)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        raise NumericError("f is not finite at a quadrature node")
    coeffs = []
    captured = 0.0
    for k in range(max_deg + 1):
        nk = norm_squared(basis, k)
        ck = float(np.sum(w * fx * basis_eval(basis, k, x))) / nk
        coeffs.append(ck)
        captured += ck * ck * nk
    total = float(np.sum(w * fx * fx))
    tail = max(total - captured, 0.0)
    return FunctionalSeries.centered(basis, coeffs, tail_mass=tail)


def rank(s: FunctionalSeries, tol: float | None = None) -> int:
    """Smallest ``k >= 1`` with ``|c_k| > tol``."""
    tol = s.tol if tol is None else tol
    for k, c in enumerate(s.coeffs):
        if k >= 1 and abs(c) > tol:
            return k
    raise DegenerateFunctionalError("every coefficient is below the rank tolerance; the functional is constant")

