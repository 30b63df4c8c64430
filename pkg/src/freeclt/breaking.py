"""Breaking graphs, their optimal breaking value, and spectral cumulants of linear processes.

A pair (row table, partition) becomes a bipartite multigraph with one vertex
per row, one vertex per block, and one edge per table element. Each edge
carries the cost ``z = 1 - 1/p`` of its block's size. The breaking profit of
an edge set ``A`` is the number of connected components left after deleting
``A`` (isolated vertices included) minus the total cost of ``A``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .covariance import CovarianceModel
from .diagram import J_N
from .errors import ConfigurationError, ContractError, SizeLimitError
from .partitions import Partition, RowTable, edge_matrix

MAX_EDGES = 24
_CHUNK = 1 << 16
INF = math.inf


def cost_from_p(p: float) -> float:
    """``z = 1 - 1/p`` with ``p = inf`` giving exactly 1."""
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ConfigurationError(f"p must lie in [1, inf], got {p}")
    return 1.0 if math.isinf(p) else 1.0 - 1.0 / p


def parse_p_values(items: Sequence[str] | str) -> dict[int, float]:
    """``["2:inf", "3:4"]`` (or ``"2:inf,3:4"``) -> ``{2: inf, 3: 4.0}``."""
    if isinstance(items, str):
        items = [s for s in items.split(",") if s.strip()]
    out = {}
    for item in items:
        k, sep, p = item.partition(":")
        if not sep:
            raise ConfigurationError(f"expected k:p, got {item!r}")
        try:
            k_int = int(k)
            p_val = INF if p.strip().lower() in ("inf", "infinity") else float(p)
        except ValueError:
            raise ConfigurationError(f"cannot parse p value {item!r}") from None
        cost_from_p(p_val)
        out[k_int] = p_val
    return out


@dataclass(frozen=True)
class BreakingGraph:
    n_rows: int
    subsets: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        for row, sub, z in self.edges:
            if not (0 <= row < self.n_rows and 0 <= sub < len(self.subsets)):
                raise ContractError(f"edge ({row}, {sub}) leaves the vertex set")
            if not 0.0 <= z <= 1.0:
                raise ContractError(f"edge cost {z} outside [0, 1]")

    @property
    def n_vertices(self) -> int:
        return self.n_rows + len(self.subsets)

    def endpoints(self) -> list[tuple[int, int]]:
        # subset vertices follow the row vertices
        return [(row, self.n_rows + sub) for row, sub, _ in self.edges]

    def costs(self) -> list[float]:
        return [z for _, _, z in self.edges]

    def to_json(self) -> dict:
        return {"rows": list(range(self.n_rows)), "subsets": [list(b) for b in self.subsets],
                "edges": [{"row": r, "subset": s, "cost": z} for r, s, z in self.edges]}

    @classmethod
    def from_json(cls, d: dict) -> "BreakingGraph":
        rows = d["rows"]
        n_rows = rows if isinstance(rows, int) else len(rows)
        subs = d["subsets"]
        subsets = tuple(() for _ in range(subs)) if isinstance(subs, int) else tuple(tuple(b) for b in subs)
        edges = tuple((int(e["row"]), int(e["subset"]), float(e["cost"])) for e in d["edges"])
        return cls(n_rows, subsets, edges)


def build_breaking_graph(t: RowTable | Sequence[int], p: Partition,
                         p_values: Mapping[int, float]) -> BreakingGraph:
    t = t if isinstance(t, RowTable) else RowTable(tuple(t))
    if p.M != t.total:
        raise ContractError(f"partition of 1..{p.M} does not match a table of size {t.total}")
    rof = t.row_of
    edges = []
    for bi, block in enumerate(p.blocks):
        size = len(block)
        if size not in p_values:
            raise ConfigurationError(f"no p value given for blocks of size {size}")
        z = cost_from_p(p_values[size])
        edges.extend((rof[e], bi, z) for e in block)
    edges.sort()
    return BreakingGraph(t.k, p.blocks, tuple(edges))


def components(n_vertices: int, endpoints: Sequence[tuple[int, int]]) -> int:
    """Connected components of a multigraph, isolated vertices included."""
    parent = list(range(n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    count = n_vertices
    for u, v in endpoints:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            count -= 1
    return count


def alpha(g: BreakingGraph, removed: Sequence[int]) -> float:
    """Breaking profit ``C(G minus A) - sum_{e in A} z_e`` of the edge indices ``removed``."""
    removed = set(removed)
    ends = g.endpoints()
    kept = [ends[i] for i in range(len(ends)) if i not in removed]
    return components(g.n_vertices, kept) - math.fsum(g.edges[i][2] for i in removed)


class AlphaResult(NamedTuple):
    value: float
    witness: tuple[int, ...]


def _chunk_best(start, stop, ends, costs, V):
    masks = np.arange(start, stop, dtype=np.int64)
    lab = np.tile(np.arange(V, dtype=np.int16), (len(masks), 1))
    cost = np.zeros(len(masks))
    for e, (u, v) in enumerate(ends):
        bit = ((masks >> e) & 1).astype(bool)
        cost += costs[e] * bit
        lu, lv = lab[:, u], lab[:, v]
        sel = np.nonzero(~bit & (lu != lv))[0]
        if not len(sel):
            continue
        lo = np.minimum(lu[sel], lv[sel])[:, None]
        hi = np.maximum(lu[sel], lv[sel])[:, None]
        sub = lab[sel]
        lab[sel] = np.where(sub == hi, lo, sub)
    comps = (lab == np.arange(V, dtype=np.int16)).sum(axis=1)
    val = comps - cost
    i = int(np.argmax(val))
    return float(val[i]), int(masks[i])


@lru_cache(maxsize=256)
def _alpha_search(V: int, ends: tuple, costs: tuple, threads: int) -> tuple[float, int]:
    E = len(ends)
    total = 1 << E
    bounds = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]

    def run(b):
        return _chunk_best(b[0], b[1], ends, costs, V)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, bounds))
    else:
        results = [run(b) for b in bounds]
    # ties go to the lowest mask, so the empty set wins whenever it is optimal
    best_val, best_mask = results[0]
    for val, mask in results[1:]:
        if val > best_val + 1e-12:
            best_val, best_mask = val, mask
    return best_val, best_mask


def alpha_G(g: BreakingGraph, threads: int = 1) -> AlphaResult:
    """Maximum breaking profit over all ``2^|E|`` edge subsets, with a maximizing subset."""
    E = len(g.edges)
    if E > MAX_EDGES:
        raise SizeLimitError(f"exhaustive breaking search is capped at {MAX_EDGES} edges, got {E}", cap=MAX_EDGES)
    _, mask = _alpha_search(g.n_vertices, tuple(g.endpoints()), tuple(g.costs()), max(1, threads))
    witness = tuple(e for e in range(E) if mask >> e & 1)
    return AlphaResult(alpha(g, witness), witness)


# -- threshold on the costs ----------------------------------------------------

def threshold_case(m: int, k: int) -> tuple[int, Fraction]:
    """Which branch applies at ``(m, k)`` and the smallest admissible ``z_k``.

    At ``k = m + 1`` the first two branches overlap and agree in value; the
    second branch is reported there.
    """
    if m < 1 or k < 2:
        raise ContractError(f"need m >= 1 and k >= 2, got m={m}, k={k}")
    if m + 1 <= k < 2 * m:
        return 2, Fraction(k, 2 * m * (k - m))
    if k * (k - 1) > 2 * m and k <= m + 1:
        return 1, Fraction(k, 2 * m)
    return 3, Fraction(1, k) + Fraction(1, 2 * m)


def required_p(z: Fraction) -> float:
    return INF if z >= 1 else float(1 / (1 - z))


@dataclass
class ThresholdReport:
    m: int
    rows: list[dict]
    satisfied: bool

    def to_json(self) -> dict:
        def enc(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        return {"schema": 1, "m": self.m, "satisfied": self.satisfied,
                "rows": [{key: enc(v) for key, v in row.items()} for row in self.rows]}


def theorem53_check(m: int, p_values: Mapping[int, float]) -> ThresholdReport:
    """Compare ``1 - 1/p_k`` with the required ``z_k`` for every supplied ``k``."""
    if m < 1:
        raise ContractError("m must be at least 1")
    if not p_values:
        raise ConfigurationError("no p values supplied")
    rows = []
    for k in sorted(p_values):
        case, zreq = threshold_case(m, k)
        z = cost_from_p(p_values[k])
        ok = z >= float(zreq) - 1e-12
        rows.append({"k": k, "case": case, "required_z": float(zreq), "required_p": required_p(zreq),
                     "p": float(p_values[k]), "z": z, "satisfied": ok})
    return ThresholdReport(m, rows, all(r["satisfied"] for r in rows))


# -- spectral cumulants of linear processes ----------------------------------------

@dataclass(frozen=True)
class LinearProcessSpec:
    """``X_j = sum_i c_{j-i} xi_i`` with i.i.d. ``xi`` whose ``k``-th cumulant is ``d[k]``."""

    c_coeffs: tuple[float, ...]
    d: tuple[tuple[int, float], ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.c_coeffs)
        if not c or not all(math.isfinite(v) for v in c):
            raise ContractError("c_coeffs must be a non-empty finite vector")
        d = self.d.items() if isinstance(self.d, Mapping) else self.d
        object.__setattr__(self, "c_coeffs", c)
        object.__setattr__(self, "d", tuple(sorted((int(k), float(v)) for k, v in d)))
        if 2 in dict(self.d) and dict(self.d)[2] <= 0:
            raise ContractError("d_2 is a variance and must be positive")

    def cumulant(self, k: int) -> float:
        table = dict(self.d)
        if k not in table:
            raise ConfigurationError(f"no base cumulant d_{k} given")
        return table[k]

    def transfer(self, x):
        """``c(x) = sum_j c_j exp(-2 pi i j x)``."""
        x = np.asarray(x, dtype=float)
        j = np.arange(len(self.c_coeffs))
        return np.exp(-2j * np.pi * np.multiply.outer(x, j)) @ np.asarray(self.c_coeffs)


def spectral_cumulant_linear(spec: LinearProcessSpec, k: int, x: Sequence[float]):
    """``d_k c(x_1) ... c(x_{k-1}) c(-x_1 - ... - x_{k-1})``; real when the imaginary part is negligible."""
    if k < 2:
        raise ContractError("k must be at least 2")
    x = np.asarray(x, dtype=float)
    if x.shape != (k - 1,):
        raise ContractError(f"need {k - 1} frequencies, got shape {x.shape}")
    if np.any((x < 0) | (x >= 1)):
        raise ContractError("frequencies must lie in [0, 1)")
    val = spec.cumulant(k) * np.prod(spec.transfer(x)) * spec.transfer(-x.sum())
    val = complex(val)
    if abs(val.imag) <= 1e-10 * max(1.0, abs(val)):
        return val.real
    return val


class SpectralCheck(NamedTuple):
    lhs: float
    rhs: float
    abs_err: float
    coarse: bool


def _direct_cumulant(spec: LinearProcessSpec, j: Sequence[int]) -> float:
    c = spec.c_coeffs
    L = len(c) - 1
    lo, hi = max(j) - L, min(j)
    terms = [math.prod(c[ja - i] for ja in j) for i in range(lo, hi + 1)]
    return spec.cumulant(len(j)) * math.fsum(terms)


def verify_spectral_representation(spec: LinearProcessSpec, k: int, j: Sequence[int],
                                   quad_grid: int = 256) -> SpectralCheck:
    """Joint cumulant by direct convolution versus the uniform-grid spectral integral."""
    if k not in (2, 3, 4):
        raise ContractError("k must be 2, 3 or 4")
    j = [int(v) for v in j]
    if len(j) != k:
        raise ContractError(f"need {k} time indices, got {len(j)}")
    if quad_grid < 2:
        raise ContractError("quad_grid must be at least 2")
    lhs = _direct_cumulant(spec, j)

    G = quad_grid
    grid = np.arange(G) / G
    cg = spec.transfer(grid)
    n = [ja - j[-1] for ja in j[:-1]]
    phase = [cg * np.exp(2j * np.pi * grid * na) for na in n]
    # c(-sum x) on the grid is cg[(-sum idx) mod G]
    acc = 0.0 + 0.0j
    idx = np.arange(G)
    if k == 2:
        acc = np.sum(phase[0] * cg[(-idx) % G])
    else:
        inner = phase[1:]
        for i0 in range(G):
            if k == 3:
                acc += phase[0][i0] * np.sum(inner[0] * cg[(-i0 - idx) % G])
            else:
                s = (-i0 - idx[:, None] - idx[None, :]) % G
                acc += phase[0][i0] * np.sum(np.outer(inner[0], inner[1]) * cg[s])
    rhs_c = spec.cumulant(k) * acc / G ** (k - 1)
    rhs = float(rhs_c.real)
    err = abs(complex(rhs_c) - lhs)
    return SpectralCheck(lhs, rhs, err, err > 1e-3)


# -- empirical growth exponent --------------------------------------------------------

@dataclass
class SlopeReport:
    N_values: list[int]
    values: list[float]
    slope: float
    alpha_G: float
    tol: float

    @property
    def within(self) -> bool:
        return abs(self.slope - self.alpha_G) <= self.tol

    def to_json(self) -> dict:
        return {"schema": 1, "N_values": self.N_values, "values": self.values, "slope": self.slope,
                "alpha_G": self.alpha_G, "tol": self.tol, "within": self.within}


def slope_experiment(t: RowTable | Sequence[int], p: Partition, model: CovarianceModel,
                     N_values: Sequence[int], p_values: Mapping[int, float] | None = None,
                     tol: float = 0.15, budget: int | None = None) -> SlopeReport:
    """Fit ``log |J_N| ~ slope * log N`` for the pairing ``p`` and compare with ``alpha_G``."""
    t = t if isinstance(t, RowTable) else RowTable(tuple(t))
    if len(N_values) < 2:
        raise ContractError("need at least two values of N")
    L = edge_matrix(p, t)
    vals = [J_N(L, int(N), model, budget=budget) for N in N_values]
    if any(v == 0 for v in vals):
        raise ContractError("J_N vanished; the log-log fit is undefined")
    slope = float(np.polyfit(np.log(N_values), np.log(np.abs(vals)), 1)[0])
    g = build_breaking_graph(t, p, {2: INF} if p_values is None else p_values)
    return SlopeReport([int(N) for N in N_values], vals, slope, alpha_G(g).value, tol)
