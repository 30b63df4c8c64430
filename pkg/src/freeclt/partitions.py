"""Set partitions of a row table.

Elements of the ground set are 1-based (``1..M``); rows are 0-based. Row ``i``
of a table with sizes ``(n_0, n_1, ...)`` holds the consecutive elements
``sum(n_<i) + 1 .. sum(n_<=i)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import accumulate
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ContractError, SizeLimitError

DEFAULT_CAP = 16


@dataclass(frozen=True)
class RowTable:
    row_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.row_sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise ContractError(f"row sizes must be positive and non-empty, got {self.row_sizes!r}")
        object.__setattr__(self, "row_sizes", sizes)

    @property
    def k(self) -> int:
        return len(self.row_sizes)

    @property
    def total(self) -> int:
        return sum(self.row_sizes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return (0, *accumulate(self.row_sizes))

    def index(self, row: int, pos: int) -> int:
        """Linear (1-based) index of position ``pos`` (1-based) in ``row`` (0-based)."""
        if not (0 <= row < self.k and 1 <= pos <= self.row_sizes[row]):
            raise ContractError(f"no cell ({row}, {pos}) in table {self.row_sizes}")
        return self.offsets[row] + pos

    def cell(self, element: int) -> tuple[int, int]:
        row = self.row_of[element]
        return row, element - self.offsets[row]

    @cached_property
    def row_of(self) -> tuple[int, ...]:
        # row_of[e] for e in 1..M; slot 0 unused
        out = [-1]
        for i, n in enumerate(self.row_sizes):
            out.extend([i] * n)
        return tuple(out)

    def rows(self) -> list[tuple[int, ...]]:
        o = self.offsets
        return [tuple(range(o[i] + 1, o[i + 1] + 1)) for i in range(self.k)]

    def as_partition(self) -> "Partition":
        return Partition(tuple(self.rows()), self.total)


@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[int, ...], ...]
    M: int

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(e) for e in b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        seen = [e for b in blocks for e in b]
        if any(not b for b in blocks):
            raise ContractError("empty block")
        if sorted(seen) != list(range(1, self.M + 1)):
            raise ContractError(f"blocks {self.blocks!r} do not partition 1..{self.M}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], M: int | None = None) -> "Partition":
        blocks = [tuple(b) for b in blocks]
        if M is None:
            M = sum(len(b) for b in blocks)
        return cls(tuple(blocks), M)

    def is_pairing(self) -> bool:
        return all(len(b) == 2 for b in self.blocks)

    def block_of(self) -> list[int]:
        lab = [-1] * (self.M + 1)
        for bi, b in enumerate(self.blocks):
            for e in b:
                lab[e] = bi
        return lab

    def to_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def _check_cap(M: int, cap: int | None):
    cap = DEFAULT_CAP if cap is None else cap
    if M > cap:
        raise SizeLimitError(f"ground set of size {M} exceeds the enumeration cap {cap}", cap=cap)


def _pairings(elems: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other), *tail]


def enumerate_pair_partitions(M: int, cap: int | None = None) -> list[Partition]:
    """All pairings of ``{1..M}``, in lexicographic canonical order.

    Odd ``M`` has no pairings and yields an empty list.
    """
    if M < 0:
        raise ContractError("M must be nonnegative")
    _check_cap(M, cap)
    if M % 2:
        return []
    return [Partition(tuple(p), M) for p in _pairings(tuple(range(1, M + 1)))]


def is_noncrossing(p: Partition) -> bool:
    lab = p.block_of()
    nb = len(p.blocks)
    for a in range(nb):
        for b in range(a + 1, nb):
            # an ABAB pattern exists iff the merged label sequence alternates at least 4 times
            merged = sorted(p.blocks[a] + p.blocks[b])
            runs, prev = 0, None
            for e in merged:
                if lab[e] != prev:
                    runs += 1
                    prev = lab[e]
            if runs >= 4:
                return False
    return True


def _check_sizes(p: Partition, t: RowTable):
    if p.M != t.total:
        raise ContractError(f"partition of {p.M} points does not fit table of {t.total}")


def is_nonhomogeneous(p: Partition, t: RowTable) -> bool:
    """No block lies entirely inside one row."""
    _check_sizes(p, t)
    rof = t.row_of
    return all(len({rof[e] for e in b}) > 1 for b in p.blocks)


def is_inhomogeneous(p: Partition, t: RowTable) -> bool:
    """Every block meets every row at most once (meet with the row partition is the finest partition)."""
    _check_sizes(p, t)
    rof = t.row_of
    return all(len({rof[e] for e in b}) == len(b) for b in p.blocks)


def is_connected(p: Partition, t: RowTable) -> bool:
    """Row/block incidence graph is connected, checked by union-find over rows."""
    _check_sizes(p, t)
    parent = list(range(t.k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rof = t.row_of
    for b in p.blocks:
        r0 = find(rof[b[0]])
        for e in b[1:]:
            r = find(rof[e])
            if r != r0:
                parent[r] = r0
    return len({find(i) for i in range(t.k)}) == 1


def join(p: Partition, q: Partition) -> Partition:
    """Lattice join: the finest partition coarser than both ``p`` and ``q``."""
    if p.M != q.M:
        raise ContractError("join of partitions on different ground sets")
    blocks = [set(b) for b in p.blocks] + [set(b) for b in q.blocks]
    merged = True
    while merged:
        merged = False
        out: list[set[int]] = []
        for b in blocks:
            for o in out:
                if o & b:
                    o |= b
                    merged = True
                    break
            else:
                out.append(set(b))
        blocks = out
    return Partition(tuple(tuple(b) for b in blocks), p.M)


def meet(p: Partition, q: Partition) -> Partition:
    if p.M != q.M:
        raise ContractError("meet of partitions on different ground sets")
    blocks = [set(a) & set(b) for a in p.blocks for b in q.blocks]
    return Partition(tuple(tuple(b) for b in blocks if b), p.M)


def _inhomogeneous_pairings(elems: tuple[int, ...], rof: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for i, other in enumerate(rest):
        if rof[other] == rof[first]:
            continue
        for tail in _inhomogeneous_pairings(rest[:i] + rest[i + 1:], rof):
            yield [(first, other), *tail]


def _nc_pairings(elems: tuple[int, ...], rof: tuple[int, ...] | None) -> Iterator[list[tuple[int, int]]]:
    # first element pairs with an element at odd offset; inside and outside pair separately
    if not elems:
        yield []
        return
    first = elems[0]
    for j in range(1, len(elems), 2):
        other = elems[j]
        if rof is not None and rof[other] == rof[first]:
            continue
        for inner in _nc_pairings(elems[1:j], rof):
            for outer in _nc_pairings(elems[j + 1:], rof):
                yield [(first, other), *inner, *outer]


@lru_cache(maxsize=512)
def _classical(row_sizes: tuple[int, ...], cap: int) -> tuple[Partition, ...]:
    t = RowTable(row_sizes)
    _check_cap(t.total, cap)
    if t.total % 2:
        return ()
    out = []
    for pr in _inhomogeneous_pairings(tuple(range(1, t.total + 1)), t.row_of):
        p = Partition(tuple(pr), t.total)
        if is_connected(p, t):
            out.append(p)
    return tuple(sorted(out, key=lambda q: q.blocks))


@lru_cache(maxsize=512)
def _free(row_sizes: tuple[int, ...], connected_only: bool, cap: int) -> tuple[Partition, ...]:
    t = RowTable(row_sizes)
    _check_cap(t.total, cap)
    if t.total % 2:
        return ()
    out = []
    for pr in _nc_pairings(tuple(range(1, t.total + 1)), t.row_of):
        p = Partition(tuple(pr), t.total)
        if not connected_only or is_connected(p, t):
            out.append(p)
    return tuple(sorted(out, key=lambda q: q.blocks))


def enumerate_noncrossing_pairings(M: int, cap: int | None = None) -> list[Partition]:
    _check_cap(M, cap)
    if M % 2:
        return []
    out = [Partition(tuple(p), M) for p in _nc_pairings(tuple(range(1, M + 1)), None)]
    return sorted(out, key=lambda q: q.blocks)


def enumerate_classical_diagrams(t: RowTable | Sequence[int], cap: int | None = None) -> list[Partition]:
    """Connected pairings of ``t`` with no pair inside a row."""
    t = _as_table(t)
    return list(_classical(t.row_sizes, DEFAULT_CAP if cap is None else cap))


def enumerate_free_diagrams(t: RowTable | Sequence[int], connected_only: bool = True,
                            cap: int | None = None) -> list[Partition]:
    """Non-crossing pairings of ``t`` with no pair inside a row, optionally only the connected ones."""
    t = _as_table(t)
    return list(_free(t.row_sizes, bool(connected_only), DEFAULT_CAP if cap is None else cap))


def edge_matrix(p: Partition, t: RowTable | Sequence[int]) -> np.ndarray:
    """Symmetric ``k x k`` matrix counting pairs that join row ``i`` to row ``j``."""
    t = _as_table(t)
    _check_sizes(p, t)
    if not p.is_pairing():
        raise ContractError(f"edge matrix needs a pair partition, got {p}")
    rof = t.row_of
    L = np.zeros((t.k, t.k), dtype=np.int64)
    for a, b in p.blocks:
        i, j = rof[a], rof[b]
        if i == j:
            raise ContractError(f"block {{{a},{b}}} lies inside row {i}")
        L[i, j] += 1
        L[j, i] += 1
    return L


def _as_table(t) -> RowTable:
    return t if isinstance(t, RowTable) else RowTable(tuple(t))


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out
