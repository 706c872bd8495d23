import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from bnmcmc.data import Dataset, build_score_context
from bnmcmc.errors import GraphError
from bnmcmc.graph import sample_dag
from bnmcmc.scoring import batch_scores, local_score, simulate_data, total_score


@pytest.fixture(scope="module")
def gauss():
    rng = np.random.default_rng(3)
    adj = sample_dag(5, 1.5, rng)
    return simulate_data(adj, "linear-gaussian", 50, rng)


@pytest.fixture(scope="module")
def cat():
    rng = np.random.default_rng(4)
    adj = sample_dag(4, 1.5, rng)
    return simulate_data(adj, "categorical-cpt", 80, rng, n_levels=[2, 3, 2, 3])


parent_sets = st.tuples(st.integers(0, 4), st.sets(st.integers(0, 4), max_size=4))


@given(parent_sets)
@settings(max_examples=40, deadline=None)
def test_bge_matches_oracle(gauss, case):
    node, pa = case
    pa = sorted(pa - {node})
    ctx = build_score_context(gauss, "bge")
    assert math.isclose(local_score(ctx, node, pa), oracles.bge_local(gauss.values, node, pa),
                        rel_tol=0, abs_tol=1e-9)


@given(parent_sets)
@settings(max_examples=40, deadline=None)
def test_bdecat_matches_oracle(cat, case):
    node, pa = case
    node %= 4
    pa = sorted({p % 4 for p in pa} - {node})
    ctx = build_score_context(cat, "bdecat", chi=0.7, edgepf=3.0)
    want = oracles.bde_local(cat.codes(), [2, 3, 2, 3], node, pa, chi=0.7, edgepf=3.0)
    assert math.isclose(local_score(ctx, node, pa), want, abs_tol=1e-9)


def test_aw_and_am_are_passed_through(gauss):
    ctx = build_score_context(gauss, am=2.5, aw=9.0)
    assert math.isclose(local_score(ctx, 1, [0, 3]),
                        oracles.bge_local(gauss.values, 1, [0, 3], am=2.5, aw=9.0), abs_tol=1e-9)


def test_batch_agrees_with_local(gauss):
    ctx = build_score_context(gauss)
    P = np.array([[0, 2], [3, 1], [1, 2]])
    want = [local_score(ctx, 4, p) for p in P]
    assert np.allclose(batch_scores(ctx, 4, P), want, atol=1e-10)


def test_unit_weights_change_nothing(gauss):
    a = build_score_context(gauss)
    b = build_score_context(gauss, weights=np.ones(gauss.n_rows))
    assert math.isclose(local_score(a, 0, [1, 2]), local_score(b, 0, [1, 2]), abs_tol=1e-9)


def test_integer_weights_equal_row_duplication(cat):
    w = np.arange(cat.n_rows) % 3
    rep = Dataset(np.repeat(cat.values, w, axis=0), cat.labels, cat.kinds, cat.levels)
    a = build_score_context(cat, weights=w)
    b = build_score_context(rep)
    assert math.isclose(local_score(a, 1, [0, 3]), local_score(b, 1, [0, 3]), abs_tol=1e-9)


def test_edge_penalty_is_subtracted(gauss):
    pen = np.full((5, 5), 4.0)
    a = build_score_context(gauss)
    b = build_score_context(gauss, edge_penalty=pen)
    assert math.isclose(local_score(a, 2, [0, 1]) - local_score(b, 2, [0, 1]), 2 * math.log(4.0))


def test_total_score_rejects_bad_graphs(gauss):
    ctx = build_score_context(gauss)
    cyc = np.zeros((5, 5), bool)
    cyc[0, 1] = cyc[1, 0] = True
    with pytest.raises(GraphError):
        total_score(ctx, cyc)
    with pytest.raises(GraphError):
        total_score(ctx, np.zeros((4, 4), bool))
    with pytest.raises(GraphError):
        local_score(ctx, 1, [1])


def test_background_nodes_are_not_scored(gauss):
    ctx = build_score_context(gauss, bgnodes=(0,))
    g = np.zeros((5, 5), bool)
    g[0, 1] = True
    assert math.isclose(total_score(ctx, g), sum(local_score(ctx, j, [0] if j == 1 else [])
                                                 for j in range(1, 5)))
    g[1, 0] = True
    g[0, 1] = False
    with pytest.raises(GraphError):
        total_score(ctx, g)


def test_simulation_recovers_regression_weights():
    rng = np.random.default_rng(0)
    adj = np.zeros((2, 2), bool)
    adj[0, 1] = True
    W = np.array([[0, 1.5], [0, 0]])
    d = simulate_data(adj, "linear-gaussian", 20000, rng, edge_weights=W)
    slope = np.polyfit(d.values[:, 0], d.values[:, 1], 1)[0]
    assert abs(slope - 1.5) < 0.05
