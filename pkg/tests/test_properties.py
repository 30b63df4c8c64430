import math
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from freeclt.breaking import BreakingGraph, alpha, alpha_G, threshold_case
from freeclt.covariance import CovarianceModel, functional_covariance
from freeclt.diagram import CumulantRequest, J_N, joint_cumulant
from freeclt.oracle import oracle_cumulant
from freeclt.orthopoly import Basis, FunctionalSeries, expand
from freeclt.partitions import (
    RowTable,
    enumerate_classical_diagrams,
    enumerate_free_diagrams,
    is_connected,
    is_noncrossing,
)

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

models = st.one_of(
    st.floats(0.0, 0.9).map(CovarianceModel.geometric),
    st.floats(0.3, 3.0).map(CovarianceModel.power),
    st.lists(st.floats(-0.3, 0.3), min_size=0, max_size=3).map(lambda tail: CovarianceModel.tabulated([1, *tail])),
)


@st.composite
def requests(draw):
    k = draw(st.integers(1, 4))
    degrees = draw(st.lists(st.integers(1, 3), min_size=k, max_size=k))
    times = draw(st.lists(st.integers(0, 4), min_size=k, max_size=k))
    world = draw(st.sampled_from(["classical", "free"]))
    return CumulantRequest(tuple(degrees), tuple(times), world, draw(models))


@SETTINGS
@given(requests())
def test_diagram_engine_matches_oracle(req):
    assert abs(joint_cumulant(req) - oracle_cumulant(req)) <= 1e-10


@SETTINGS
@given(requests(), st.integers(-3, 3))
def test_cumulants_are_shift_invariant(req, c):
    shifted = CumulantRequest(req.degrees, tuple(t + c for t in req.times), req.world, req.model)
    assert joint_cumulant(shifted) == joint_cumulant(req) or \
        math.isclose(joint_cumulant(shifted), joint_cumulant(req), rel_tol=1e-12, abs_tol=1e-15)


@SETTINGS
@given(st.lists(st.integers(1, 3), min_size=2, max_size=4))
def test_diagram_classes_satisfy_their_definitions(rows):
    if sum(rows) % 2:
        return
    t = RowTable(tuple(rows))
    free = enumerate_free_diagrams(t)
    for p in free:
        assert is_noncrossing(p) and is_connected(p, t)
    classical = {p.blocks for p in enumerate_classical_diagrams(t)}
    # a connected non-crossing pairing with no block inside a row is also a classical diagram
    assert all(p.blocks in classical for p in free)


@st.composite
def edge_matrices(draw):
    k = draw(st.integers(2, 4))
    L = np.zeros((k, k), dtype=int)
    for i in range(k):
        for j in range(i + 1, k):
            L[i, j] = L[j, i] = draw(st.integers(0, 2))
    for i in range(k):
        if not L[i].any():
            j = (i + 1) % k
            L[i, j] = L[j, i] = 1
    return L


@SETTINGS
@given(edge_matrices(), st.integers(1, 12), models)
def test_J_N_routes_agree(L, N, model):
    d = J_N(L, N, model, method="direct")
    for method in ("reduced", "contract"):
        assert math.isclose(J_N(L, N, model, method=method), d, rel_tol=1e-10, abs_tol=1e-12)


@SETTINGS
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=5), models, st.integers(0, 30))
def test_functional_covariance_bounded_by_variance(coeffs, model, t):
    s = FunctionalSeries(Basis.HERMITE, (0.0, *coeffs))
    assert abs(functional_covariance(s, model, t)) <= functional_covariance(s, model, 0) + 1e-12


@SETTINGS
@given(st.sampled_from(list(Basis)), st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_expand_inverts_evaluation(basis, coeffs):
    s = FunctionalSeries(basis, (0.0, *coeffs))
    back = expand(s, basis, len(coeffs))
    assert np.max(np.abs(np.array(back.coeffs) - np.array(s.coeffs))) <= 1e-9 * (1 + max(map(abs, coeffs)))


@st.composite
def graphs(draw):
    rows = draw(st.integers(1, 3))
    subs = draw(st.integers(1, 4))
    edges = draw(st.lists(st.tuples(st.integers(0, rows - 1), st.integers(0, subs - 1),
                                    st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])), min_size=1, max_size=10))
    return BreakingGraph(rows, tuple(() for _ in range(subs)), tuple(edges))


@SETTINGS
@given(graphs())
def test_alpha_witness_is_optimal_and_reproducible(g):
    res = alpha_G(g)
    assert alpha(g, res.witness) == res.value
    assert alpha(g, ()) <= res.value
    # removing every edge is always a candidate
    assert alpha(g, tuple(range(len(g.edges)))) <= res.value + 1e-12


@SETTINGS
@given(graphs(), st.integers(0, 9))
def test_alpha_monotone_in_single_edge_cost(g, i):
    i %= len(g.edges)
    r, s, z = g.edges[i]
    cheaper = BreakingGraph(g.n_rows, g.subsets, g.edges[:i] + ((r, s, z / 2),) + g.edges[i + 1:])
    assert alpha_G(cheaper).value >= alpha_G(g).value - 1e-12


@given(st.integers(1, 30), st.integers(2, 70))
def test_threshold_cases_partition_the_plane(m, k):
    case, z = threshold_case(m, k)
    assert case in (1, 2, 3)
    assert 0 < z <= 1
    if case == 3:
        assert z == Fraction(1, k) + Fraction(1, 2 * m)
