import itertools
import math

import numpy as np
import pytest

from freeclt.breaking import (
    BreakingGraph,
    LinearProcessSpec,
    alpha,
    alpha_G,
    build_breaking_graph,
    parse_p_values,
    slope_experiment,
    spectral_cumulant_linear,
    theorem53_check,
    threshold_case,
    verify_spectral_representation,
)
from freeclt.covariance import CovarianceModel
from freeclt.errors import ConfigurationError, ContractError, SizeLimitError
from freeclt.partitions import Partition, RowTable, enumerate_classical_diagrams

INF = math.inf
CROSS = Partition.from_blocks([(1, 3), (2, 4)])
T22 = RowTable((2, 2))


def brute_alpha(g: BreakingGraph) -> float:
    """Independent reference: plain DFS component count over every edge subset."""
    V = g.n_vertices
    ends = [(r, g.n_rows + s) for r, s, _ in g.edges]
    best = -math.inf
    for A in itertools.chain.from_iterable(itertools.combinations(range(len(ends)), n)
                                           for n in range(len(ends) + 1)):
        adj = {v: set() for v in range(V)}
        for i, (u, v) in enumerate(ends):
            if i not in A:
                adj[u].add(v)
                adj[v].add(u)
        seen, comps = set(), 0
        for v in range(V):
            if v in seen:
                continue
            comps += 1
            stack = [v]
            while stack:
                w = stack.pop()
                if w not in seen:
                    seen.add(w)
                    stack.extend(adj[w] - seen)
        best = max(best, comps - sum(g.edges[i][2] for i in A))
    return best


def test_graph_construction():
    g = build_breaking_graph(T22, CROSS, {2: INF})
    assert g.n_rows == 2 and len(g.subsets) == 2
    assert len(g.edges) == 4 == T22.total
    assert g.costs() == [1.0] * 4
    assert build_breaking_graph(T22, CROSS, {2: 2}).costs() == [0.5] * 4


def test_graph_is_bipartite_with_one_edge_per_element():
    t = RowTable((3, 2, 1))
    p = Partition.from_blocks([(1, 4, 6), (2, 5), (3,)])
    g = build_breaking_graph(t, p, {1: 1, 2: 4, 3: INF})
    assert len(g.edges) == t.total
    costs = {len(p.blocks[s]): z for _, s, z in g.edges}
    assert costs == {1: 0.0, 2: 0.75, 3: 1.0}


def test_missing_or_invalid_p():
    with pytest.raises(ConfigurationError):
        build_breaking_graph(T22, CROSS, {3: INF})
    with pytest.raises(ConfigurationError):
        build_breaking_graph(T22, CROSS, {2: 0.5})
    with pytest.raises(ContractError):
        build_breaking_graph(RowTable((2, 3)), CROSS, {2: INF})


def test_parse_p_values():
    assert parse_p_values(["2:inf", "3:4"]) == {2: INF, 3: 4.0}
    assert parse_p_values("2:inf,4:1.5") == {2: INF, 4: 1.5}
    with pytest.raises(ConfigurationError):
        parse_p_values(["2"])
    with pytest.raises(ConfigurationError):
        parse_p_values(["2:abc"])


def test_alpha_examples():
    res = alpha_G(build_breaking_graph(T22, CROSS, {2: INF}))
    assert abs(res.value - 1) <= 1e-12 and res.witness == ()
    res = alpha_G(build_breaking_graph(T22, CROSS, {2: 4 / 3}))
    assert abs(res.value - 3) <= 1e-12 and res.witness == (0, 1, 2, 3)
    single = BreakingGraph(1, ((1,),), ((0, 0, 1.0),))
    res = alpha_G(single)
    assert abs(res.value - 1) <= 1e-12 and res.witness == ()


def random_graphs(n, max_edges, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        rows = int(rng.integers(1, 4))
        subs = int(rng.integers(1, 5))
        E = int(rng.integers(1, max_edges + 1))
        edges = tuple((int(rng.integers(rows)), int(rng.integers(subs)), float(rng.choice([0, 0.25, 0.5, 1])))
                      for _ in range(E))
        yield BreakingGraph(rows, tuple(() for _ in range(subs)), edges)


def test_alpha_matches_independent_brute_force():
    for g in random_graphs(60, 9, seed=1):
        assert abs(alpha_G(g).value - brute_alpha(g)) <= 1e-12


def test_witness_reproduces_value_and_bounds_empty_set():
    for g in random_graphs(40, 10, seed=2):
        res = alpha_G(g)
        assert alpha(g, res.witness) == res.value
        assert alpha(g, ()) <= res.value + 1e-12


def test_alpha_non_increasing_in_p():
    grid = [1.0, 1.25, 2.0, 4.0, INF]
    tables = [((2, 2), [(1, 3), (2, 4)]), ((2, 2, 2), [(1, 6), (2, 3), (4, 5)]),
              ((3, 3), [(1, 4), (2, 6), (3, 5)]), ((2, 3, 1), [(1, 3, 6), (2, 4), (5,)]),
              ((1, 2, 2), [(1, 2), (3, 4, 5)])]
    for rows, blocks in tables:
        t, p = RowTable(rows), Partition.from_blocks(blocks)
        sizes = sorted({len(b) for b in p.blocks})
        for combo in itertools.product(grid, repeat=len(sizes)):
            base = dict(zip(sizes, combo))
            a0 = alpha_G(build_breaking_graph(t, p, base)).value
            for s in sizes:
                for higher in grid:
                    if higher > base[s]:
                        raised = {**base, s: higher}
                        assert alpha_G(build_breaking_graph(t, p, raised)).value <= a0 + 1e-12


@pytest.mark.parametrize("R,n", [(r, n) for r in (2, 3, 4) for n in (1, 2, 3)])
def test_gaussian_diagrams_satisfy_clt_bound(R, n):
    rows = (n,) * R
    for p in enumerate_classical_diagrams(rows):
        g = build_breaking_graph(rows, p, {2: INF})
        assert alpha_G(g).value <= R / 2 + 1e-12


def test_edge_cap():
    g = BreakingGraph(1, ((),), tuple((0, 0, 1.0) for _ in range(25)))
    with pytest.raises(SizeLimitError):
        alpha_G(g)


def test_graph_json_round_trip():
    g = build_breaking_graph(T22, CROSS, {2: 2})
    doc = g.to_json()
    assert set(doc) == {"rows", "subsets", "edges"}
    assert set(doc["edges"][0]) == {"row", "subset", "cost"}
    assert BreakingGraph.from_json(doc) == g


# -- threshold ---------------------------------------------------------------------

BRANCHES = {
    1: [3, 3, 3],
    2: [3, 2, 3, 3, 3],
    3: [3, 3, 2, 2, 3, 3, 3],
    4: [3, 3, 1, 2, 2, 2, 3, 3, 3],
    5: [3, 3, 1, 1, 2, 2, 2, 2, 3, 3, 3],
}


def test_branch_snapshot():
    for m, expected in BRANCHES.items():
        assert [threshold_case(m, k)[0] for k in range(2, 2 * m + 3)] == expected


def test_branches_agree_on_their_overlap():
    from fractions import Fraction

    for m in range(2, 12):
        k = m + 1
        assert Fraction(k, 2 * m) == Fraction(k, 2 * m * (k - m))


def test_threshold_examples():
    rep = theorem53_check(1, {2: INF})
    assert rep.satisfied and rep.rows[0]["required_p"] == INF and rep.rows[0]["case"] == 3
    assert not theorem53_check(1, {2: 1e6}).satisfied
    rep = theorem53_check(2, {2: 4})
    assert rep.rows[0]["required_z"] == 0.75 and rep.rows[0]["required_p"] == 4.0 and rep.satisfied
    assert not theorem53_check(2, {2: 3.9}).satisfied
    rep = theorem53_check(3, {4: 3})
    assert rep.rows[0]["case"] == 2 and rep.rows[0]["required_z"] == pytest.approx(2 / 3)
    assert rep.satisfied


def test_threshold_gaussian_corollary():
    # p_2 >= 2m/(m-1) is exactly the k=2 requirement for m >= 2
    for m in range(2, 8):
        need = 2 * m / (m - 1)
        assert theorem53_check(m, {2: need * (1 + 1e-9)}).satisfied
        assert not theorem53_check(m, {2: need * (1 - 1e-6)}).satisfied


def test_threshold_json_encodes_infinity():
    doc = theorem53_check(1, {2: INF}).to_json()
    assert doc["schema"] == 1 and doc["rows"][0]["p"] == "inf"


# -- spectral cumulants -----------------------------------------------------------

MA1 = LinearProcessSpec((1.0, 1.0), {2: 1.0})


@pytest.mark.parametrize("x", [0.0, 0.1, 0.37, 0.5, 0.9])
def test_ma1_spectral_density(x):
    assert spectral_cumulant_linear(MA1, 2, [x]) == pytest.approx(2 + 2 * math.cos(2 * math.pi * x), abs=1e-12)


def test_ma1_integrals():
    x = np.arange(512) / 512
    f = np.array([spectral_cumulant_linear(MA1, 2, [v]) for v in x])
    assert np.mean(f) == pytest.approx(2.0, abs=1e-12)
    assert np.mean(f * np.exp(2j * np.pi * x)).real == pytest.approx(1.0, abs=1e-12)


def test_spectral_representation_examples():
    chk = verify_spectral_representation(MA1, 2, (0, 1), 256)
    assert chk.lhs == 1.0 and chk.abs_err < 1e-8
    spec = LinearProcessSpec((1.0, 0.5), {3: 2.0})
    chk = verify_spectral_representation(spec, 3, (0, 0, 0), 256)
    assert chk.lhs == 2.25 and chk.abs_err < 1e-6


def test_spectral_representation_asymmetric_indices():
    spec = LinearProcessSpec((1.0, 0.5, -0.3), {3: 2.0, 4: 1.5})
    for j in [(0, 0, 1), (2, 0, 1), (0, 1, 2)]:
        assert verify_spectral_representation(spec, 3, j, 32).abs_err < 1e-12
    for j in [(0, 0, 0, 1), (0, 2, 1, 1), (3, 0, 1, 2)]:
        assert verify_spectral_representation(spec, 4, j, 32).abs_err < 1e-12


def test_spectral_shift_invariance():
    spec = LinearProcessSpec((0.7, -0.2, 0.4, 0.1), {2: 1.0, 3: -0.5, 4: 2.0})
    for j in [(0, 1), (0, 2, 1), (1, 0, 3, 2)]:
        base = verify_spectral_representation(spec, len(j), j, 16).lhs
        for c in (-5, 3, 11):
            assert verify_spectral_representation(spec, len(j), [v + c for v in j], 16).lhs == base


def test_spectral_quadrature_converges():
    spec = LinearProcessSpec(tuple(0.8**j for j in range(60)), {3: 1.0})
    errs = [verify_spectral_representation(spec, 3, (0, 1, 3), G).abs_err for G in (8, 16, 32, 64)]
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 2 or b < 1e-13
    assert verify_spectral_representation(spec, 3, (0, 1, 3), 4).coarse


def test_spectral_validation():
    with pytest.raises(ContractError):
        verify_spectral_representation(MA1, 5, (0, 0, 0, 0, 0), 8)
    with pytest.raises(ContractError):
        spectral_cumulant_linear(MA1, 2, [1.0])
    with pytest.raises(ConfigurationError):
        spectral_cumulant_linear(MA1, 3, [0.1, 0.2])
    with pytest.raises(ContractError):
        LinearProcessSpec((1.0,), {2: -1.0})


def test_slope_experiment():
    rep = slope_experiment(T22, CROSS, CovarianceModel.geometric(0.5), [64, 128, 256, 512, 1024])
    assert rep.alpha_G == 1.0
    assert rep.within and abs(rep.slope - 1) < 0.15
