"""Diagram-formula cumulants of Hermite / Chebyshev functionals.

In the classical world (Gaussian ``X``, Hermite ``H_n``) the joint cumulant of
``H_{n_1}(X_{t_1}), ..., H_{n_k}(X_{t_k})`` is a sum over connected pairings of
the row table ``(n_1, ..., n_k)`` with no pair inside a row. In the free world
(semicircular ``X``, Chebyshev ``U_n``) the same sum runs over the subset of
such pairings that are also non-crossing. Each pair joining rows ``i`` and
``j`` contributes ``r(t_i - t_j)``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz

from .covariance import CovarianceModel, functional_covariance, sigma_squared
from .errors import ContractError, HypothesisViolation, SizeLimitError
from .orthopoly import Basis, FunctionalSeries
from .partitions import (
    Partition,
    RowTable,
    edge_matrix,
    enumerate_classical_diagrams,
    enumerate_free_diagrams,
)

WORLDS = ("classical", "free")
DEFAULT_BUDGET = 10**9
MAX_ROWS = 6
UNDERFLOW = 1e-300
_BLOCK_ELEMS = 1 << 21


def evaluation_budget() -> int:
    env = os.environ.get("FREECLT_BUDGET")
    return int(float(env)) if env else DEFAULT_BUDGET


def _check_world(world):
    if world not in WORLDS:
        raise ContractError(f"world must be one of {WORLDS}, got {world!r}")


@dataclass(frozen=True)
class CumulantRequest:
    degrees: tuple[int, ...]
    times: tuple[int, ...]
    world: str
    model: CovarianceModel

    def __post_init__(self):
        degrees = tuple(int(n) for n in self.degrees)
        times = tuple(int(t) for t in self.times)
        if not degrees or any(n < 1 for n in degrees):
            raise ContractError("degrees must be a non-empty list of positive integers")
        if len(degrees) != len(times):
            raise ContractError("degrees and times must have the same length")
        _check_world(self.world)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "times", times)


def diagrams(row_sizes: Sequence[int], world: str, connected: bool = True) -> list[Partition]:
    _check_world(world)
    if world == "classical":
        if not connected:
            raise ContractError("non-connected classical diagrams are only used by the oracle")
        return enumerate_classical_diagrams(tuple(row_sizes))
    return enumerate_free_diagrams(tuple(row_sizes), connected_only=connected)


def _diagram_sum(degrees, times, model, world, connected) -> float:
    parts = diagrams(degrees, world, connected)
    if not parts:
        return 0.0
    rof = RowTable(degrees).row_of
    times = np.asarray(times)
    a = np.array([[b[0] for b in p.blocks] for p in parts])
    b = np.array([[b[1] for b in p.blocks] for p in parts])
    rows = np.asarray(rof)
    lags = times[rows[a]] - times[rows[b]]
    return float(np.sum(np.prod(model(lags), axis=1)))


def joint_cumulant(req: CumulantRequest) -> float:
    """Joint (classical or free) cumulant of ``P_{n_i}(X_{t_i})`` by the diagram formula."""
    return _diagram_sum(req.degrees, req.times, req.model, req.world, True)


def joint_moment_free(degrees: Sequence[int], times: Sequence[int], model: CovarianceModel) -> float:
    """``phi(U_{n_1}(X_{t_1}) ... U_{n_k}(X_{t_k}))``; connectivity is not required."""
    req = CumulantRequest(tuple(degrees), tuple(times), "free", model)
    return _diagram_sum(req.degrees, req.times, model, "free", False)


# -- edge matrices -----------------------------------------------------------

def _canonical(L: np.ndarray) -> tuple:
    k = L.shape[0]
    return min(tuple(L[np.ix_(p, p)].ravel()) for p in itertools.permutations(range(k)))


@lru_cache(maxsize=1024)
def edge_classes(row_sizes: tuple[int, ...], world: str) -> tuple[tuple[tuple, int], ...]:
    """Diagrams grouped by edge matrix (up to a relabelling of rows), with multiplicities."""
    t = RowTable(row_sizes)
    counts: dict[tuple, int] = {}
    for p in diagrams(row_sizes, world, True):
        key = _canonical(edge_matrix(p, t))
        counts[key] = counts.get(key, 0) + 1
    return tuple(sorted(counts.items()))


def _as_edge_matrix(l) -> np.ndarray:
    L = np.asarray(l)
    if L.ndim == 1:
        k = math.isqrt(L.size)
        L = L.reshape(k, k)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ContractError("edge matrix must be square")
    if not np.array_equal(L, L.T) or np.any(np.diag(L) != 0) or np.any(L < 0):
        raise ContractError("edge matrix must be symmetric, nonnegative, with zero diagonal")
    if np.any(L.sum(axis=1) == 0):
        raise ContractError("every row of the edge matrix needs at least one edge (row sum = n_i > 0)")
    if L.shape[0] > MAX_ROWS:
        raise SizeLimitError(f"{L.shape[0]} rows exceed the cap {MAX_ROWS}", cap=MAX_ROWS)
    return L.astype(np.int64)


# -- J_N ---------------------------------------------------------------------

def _grid_sum(values, pairs, model, weight=None, threads=1) -> float:
    """Sum over the grid ``values[0] x ... x values[k-1]`` of ``weight * prod r(v_i - v_j)^l``.

    Leading variables are enumerated explicitly; trailing ones are broadcast in
    blocks of at most ``_BLOCK_ELEMS`` entries.
    """
    k = len(values)
    d = 0
    while d < k and math.prod(len(v) for v in values[d:]) > _BLOCK_ELEMS:
        d += 1
    rest = list(range(d, k))
    shape = [len(values[i]) for i in rest]

    def axis(i, v):
        s = [1] * len(rest)
        s[rest.index(i)] = len(v)
        return np.asarray(v).reshape(s)

    inner = [(i, j, l) for i, j, l in pairs if i >= d and j >= d]
    inner_block = np.ones(shape)
    for i, j, l in inner:
        inner_block = inner_block * model(axis(i, values[i]) - axis(j, values[j])) ** l

    def one(prefix):
        fixed = 1.0
        for i, j, l in pairs:
            if j < d:
                fixed *= model(prefix[i] - prefix[j]) ** l
        if abs(fixed) < UNDERFLOW:
            return 0.0
        block = inner_block
        for i, j, l in pairs:
            if i < d <= j:
                block = block * model(prefix[i] - axis(j, values[j])) ** l
        if weight is not None:
            block = block * weight(prefix, [axis(i, values[i]) for i in rest])
        return fixed * float(np.sum(block))

    prefixes = list(itertools.product(*values[:d])) if d else [()]
    if threads > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, prefixes, chunksize=max(1, len(prefixes) // (4 * threads))))
    else:
        parts = [one(p) for p in prefixes]
    # pairwise summation in a fixed order, independent of the thread count
    return float(np.sum(np.asarray(parts)))


def _pairs(L):
    k = L.shape[0]
    return [(i, j, int(L[i, j])) for i in range(k) for j in range(i + 1, k) if L[i, j]]


def _einsum_plan(L, N):
    letters = "abcdefghij"
    pairs = _pairs(L)
    subs = ",".join(letters[i] + letters[j] for i, j, _ in pairs) + "->"
    dummies = [np.empty((N, N)) for _ in pairs]
    path, info = np.einsum_path(subs, *dummies, optimize="optimal" if len(pairs) <= 8 else "greedy")
    flops = float(re.search(r"Optimized FLOP count:\s*([0-9.eE+-]+)", info).group(1))
    return subs, pairs, path, flops


def J_N(l, N: int, model: CovarianceModel, method: str = "auto", budget: int | None = None,
        threads: int = 1) -> float:
    """``sum_{t_1..t_k = 1..N} prod_{i<j} r(t_i - t_j)^{l_ij}``.

    ``direct`` loops over all ``N^k`` index tuples. ``reduced`` sums over the
    differences ``s_i = t_i - t_k`` weighted by ``N - range(s)``. ``contract``
    (the default) contracts the Toeplitz factor matrices as a tensor network.
    """
    L = _as_edge_matrix(l)
    k = L.shape[0]
    if N < 1:
        raise ContractError("N must be positive")
    budget = evaluation_budget() if budget is None else budget
    pairs = _pairs(L)
    if method == "auto":
        reduced_cost = (2 * N - 1) ** (k - 1)
        if k <= 2 or reduced_cost <= _einsum_plan(L, N)[3]:
            method = "reduced"
        else:
            method = "contract"
    if method == "direct":
        cost = N**k
        _check_budget(cost, budget, N, k)
        t = np.arange(1, N + 1)
        return _grid_sum([t] * k, pairs, model, threads=threads)
    if method == "reduced":
        cost = (2 * N - 1) ** (k - 1)
        _check_budget(cost, budget, N, k)
        s = np.arange(-(N - 1), N)
        values = [s] * (k - 1) + [np.array([0])]

        def weight(prefix, axes):
            parts = [*(np.asarray(p) for p in prefix), *axes]
            hi = parts[0]
            lo = parts[0]
            for p in parts[1:]:
                hi = np.maximum(hi, p)
                lo = np.minimum(lo, p)
            return np.maximum(N - (hi - lo), 0)

        return _grid_sum(values, pairs, model, weight=weight, threads=threads)
    if method == "contract":
        subs, pairs, path, flops = _einsum_plan(L, N)
        _check_budget(flops, budget, N, k)
        lag = np.asarray(model(np.arange(N)), dtype=float)
        mats = [toeplitz(lag**lij) for _, _, lij in pairs]
        return float(np.einsum(subs, *mats, optimize=path))
    raise ContractError(f"unknown J_N method {method!r}")


def _check_budget(cost, budget, N, k):
    if cost > budget:
        raise SizeLimitError(
            f"J_N with k={k}, N={N} needs ~{cost:.3g} evaluations, over the budget {budget:.3g}; "
            "use a smaller N or fewer rows (or raise FREECLT_BUDGET)", cap=budget)


# -- cumulants of S_N --------------------------------------------------------

def _world_of(s: FunctionalSeries, world):
    if world is None:
        return s.basis.world
    _check_world(world)
    if Basis.for_world(world) is not s.basis:
        raise ContractError(f"a {s.basis.value} series cannot be used in the {world} world")
    return world


def kappa_R_SN(s: FunctionalSeries, m: CovarianceModel, N: int, R: int, world: str | None = None,
               method: str = "auto", budget: int | None = None, threads: int = 1) -> float:
    """Raw ``R``-th (classical or free) cumulant of ``S_N = sum_{i=1}^N P(X_i)``.

    Multilinearity expands it over degree tuples; each tuple contributes its
    coefficient product times ``J_N`` of every diagram's edge matrix.
    """
    world = _world_of(s, world)
    if R < 2:
        raise ContractError("R must be at least 2")
    c = s.coeffs
    support = s.support()
    Jcache: dict[tuple, float] = {}
    terms = []
    for tup in itertools.product(support, repeat=R):
        if sum(tup) % 2:
            continue
        coef = math.prod(c[n] for n in tup)
        if coef == 0.0:
            continue
        for key, mult in edge_classes(tuple(tup), world):
            if key not in Jcache:
                Jcache[key] = J_N(np.array(key), N, m, method=method, budget=budget, threads=threads)
            terms.append(coef * mult * Jcache[key])
    return math.fsum(terms)


def kappa2_SN_closed(s: FunctionalSeries, m: CovarianceModel, N: int) -> float:
    """``N sum_{|t|<=N} rho(t) - 2 sum_{t=1}^N t rho(t)`` with ``rho`` the induced covariance."""
    if N < 1:
        raise ContractError("N must be positive")
    t = np.arange(1, N + 1)
    rho = np.asarray(functional_covariance(s, m, t))
    rho0 = functional_covariance(s, m, 0)
    return math.fsum([N * rho0, *(2 * N * rho), *(-2 * t * rho)])


@dataclass
class CumulantScan:
    N_values: list[int]
    R_max: int
    world: str
    sigma2_ref: float
    table: list[list[float]] = field(default_factory=list)

    def rows(self):
        for N, row in zip(self.N_values, self.table):
            for R, raw in zip(range(2, self.R_max + 1), row):
                yield {"N": N, "R": R, "kappa_raw": raw, "kappa_normalized": raw / N ** (R / 2),
                       "sigma2_ref": self.sigma2_ref}

    def normalized(self, R: int) -> list[float]:
        return [row[R - 2] / N ** (R / 2) for N, row in zip(self.N_values, self.table)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["N", "R", "kappa_raw", "kappa_normalized", "sigma2_ref"],
                           lineterminator="\r\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"schema": 1, "world": self.world, "N_values": self.N_values, "R_max": self.R_max,
                "sigma2_ref": self.sigma2_ref, "rows": list(self.rows())}


def cumulant_scan(s: FunctionalSeries, m: CovarianceModel, N_values: Sequence[int], R_max: int,
                  method: str = "auto", budget: int | None = None, threads: int = 1) -> CumulantScan:
    sig = sigma_squared(s, m)
    if sig.vanishing:
        raise HypothesisViolation(f"long-run variance vanishes (sigma^2 = {sig.value:.3g}); the CLT needs sigma^2 != 0")
    scan = CumulantScan(list(N_values), R_max, s.basis.world, sig.value)
    for N in scan.N_values:
        scan.table.append([kappa_R_SN(s, m, N, R, method=method, budget=budget, threads=threads)
                           for R in range(2, R_max + 1)])
    return scan
