"""Brute-force joint cumulants, used to check the diagram formulas.

Each polynomial slot is expanded into monomials from the closed-form
coefficient sums. Mixed moments of the underlying Gaussian (or semicircular)
family come from summing pair covariances over all pairings (or non-crossing
pairings) of the resulting word. Moments are then turned into classical (or
free) cumulants by Moebius inversion on the lattice of all (or non-crossing)
set partitions of the slots.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

from .covariance import CovarianceModel
from .diagram import CumulantRequest, joint_cumulant
from .errors import SizeLimitError

MAX_TOTAL_DEGREE = 12
MAX_SLOTS = 6


def hermite_monomials(n: int) -> dict[int, int]:
    """``He_n(x) = sum_j (-1)^j n! / (j! (n-2j)! 2^j) x^(n-2j)``."""
    return {n - 2 * j: (-1) ** j * math.factorial(n) // (math.factorial(j) * math.factorial(n - 2 * j) * 2**j)
            for j in range(n // 2 + 1)}


def chebyshev_monomials(n: int) -> dict[int, int]:
    """Monic ``U_n`` on [-2, 2]: ``sum_j (-1)^j C(n-j, j) x^(n-2j)``."""
    return {n - 2 * j: (-1) ** j * math.comb(n - j, j) for j in range(n // 2 + 1)}


def set_partitions(k: int) -> list[tuple[frozenset, ...]]:
    """All set partitions of ``range(k)`` via restricted growth strings."""
    out = []

    def grow(prefix, top):
        if len(prefix) == k:
            blocks = {}
            for i, b in enumerate(prefix):
                blocks.setdefault(b, []).append(i)
            out.append(tuple(frozenset(v) for v in blocks.values()))
            return
        for b in range(top + 2):
            grow(prefix + [b], max(top, b))

    if k == 0:
        return [()]
    grow([0], 0)
    return out


def crosses(blocks) -> bool:
    for x in blocks:
        for y in blocks:
            if x is y:
                continue
            for a in x:
                for c in x:
                    if a < c and any(a < b < c for b in y) and any(d > c for d in y):
                        return True
    return False


@lru_cache(maxsize=16)
def _lattice(k: int, free: bool):
    parts = [p for p in set_partitions(k) if not (free and crosses(p))]
    return tuple(parts)


def _refines(p, q) -> bool:
    return all(any(b <= c for c in q) for b in p)


@lru_cache(maxsize=16)
def mobius_to_top(k: int, free: bool) -> tuple[tuple[tuple[frozenset, ...], int], ...]:
    """``mu(pi, 1)`` on the (non-crossing) partition lattice, by the defining recursion."""
    parts = sorted(_lattice(k, free), key=len)
    mu: dict = {}
    for p in parts:
        if len(p) == 1:
            mu[p] = 1
        else:
            mu[p] = -sum(mu[q] for q in mu if len(q) < len(p) and _refines(p, q))
    return tuple((p, mu[p]) for p in parts)


def pairing_sum(word: tuple[int, ...], cov: Callable[[int], float], free: bool, memo: dict) -> float:
    """Sum over (non-crossing, if ``free``) pairings of ``word`` of the product of ``cov(t_a - t_b)``."""
    key = word if free else tuple(sorted(word))
    if key in memo:
        return memo[key]
    if not word:
        return 1.0
    if len(word) % 2:
        memo[key] = 0.0
        return 0.0
    first = word[0]
    total = 0.0
    if free:
        for j in range(1, len(word), 2):
            inner = pairing_sum(word[1:j], cov, free, memo)
            if inner:
                total += cov(first - word[j]) * inner * pairing_sum(word[j + 1:], cov, free, memo)
    else:
        for j in range(1, len(word)):
            total += cov(first - word[j]) * pairing_sum(word[1:j] + word[j + 1:], cov, free, memo)
    memo[key] = total
    return total


def oracle_cumulant(req: CumulantRequest) -> float:
    total_deg = sum(req.degrees)
    if total_deg > MAX_TOTAL_DEGREE:
        raise SizeLimitError(f"oracle handles total degree <= {MAX_TOTAL_DEGREE}, got {total_deg}",
                             cap=MAX_TOTAL_DEGREE)
    k = len(req.degrees)
    if k > MAX_SLOTS:
        raise SizeLimitError(f"oracle handles at most {MAX_SLOTS} slots, got {k}", cap=MAX_SLOTS)
    free = req.world == "free"
    expand = chebyshev_monomials if free else hermite_monomials
    polys = [sorted(expand(n).items()) for n in req.degrees]
    model = req.model
    cache_r: dict[int, float] = {}

    def cov(lag):
        if lag not in cache_r:
            cache_r[lag] = float(model(lag))
        return cache_r[lag]

    memo: dict = {}
    moment_cache: dict = {}

    def moment(slots: tuple[int, ...]) -> float:
        if slots in moment_cache:
            return moment_cache[slots]
        acc = [0.0]

        def walk(i, word, coef):
            if i == len(slots):
                acc[0] += coef * pairing_sum(word, cov, free, memo)
                return
            s = slots[i]
            for power, c in polys[s]:
                walk(i + 1, word + (req.times[s],) * power, coef * c)

        walk(0, (), 1)
        moment_cache[slots] = acc[0]
        return acc[0]

    total = 0.0
    for pi, mu in mobius_to_top(k, free):
        term = float(mu)
        for block in pi:
            term *= moment(tuple(sorted(block)))
            if term == 0.0:
                break
        total += term
    return total


class GridResult(NamedTuple):
    requests: int
    max_abs_err: float
    worst: CumulantRequest | None


def degree_tuples(max_total: int, max_rows: int, min_rows: int = 1):
    for k in range(min_rows, max_rows + 1):
        for tup in itertools.product(range(1, max_total + 1), repeat=k):
            if sum(tup) <= max_total:
                yield tup


def equivalence_grid(models: Sequence[CovarianceModel], max_total: int = 8, max_rows: int = 4,
                     times: Sequence[int] = (0, 1, 2), worlds: Sequence[str] = ("classical", "free")) -> GridResult:
    """Compare the diagram engine with the brute-force oracle on every small request."""
    count, worst_err, worst = 0, 0.0, None
    for model in models:
        for world in worlds:
            for deg in degree_tuples(max_total, max_rows):
                for ts in itertools.product(times, repeat=len(deg)):
                    req = CumulantRequest(deg, ts, world, model)
                    err = abs(joint_cumulant(req) - oracle_cumulant(req))
                    count += 1
                    if err > worst_err or worst is None:
                        worst_err, worst = err, req
    return GridResult(count, worst_err, worst)
