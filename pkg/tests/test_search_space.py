import numpy as np
import pytest

from bnmcmc.data import build_score_context
from bnmcmc.errors import DataError, GraphError
from bnmcmc.graph import sample_dag, skeleton
from bnmcmc.scoring import simulate_data
from bnmcmc.search_space import FisherZ, from_adjacency, full_space, merge_space, pc_skeleton


def chain_data(N=400, seed=0):
    rng = np.random.default_rng(seed)
    adj = np.zeros((3, 3), bool)
    adj[0, 1] = adj[1, 2] = True
    return adj, simulate_data(adj, "linear-gaussian", N, rng, edge_weights=adj * 1.0)


def test_full_space_and_blacklist():
    bl = np.zeros((3, 3), bool)
    bl[0, 2] = True
    s = full_space(3, blacklist=bl, bgnodes=(1,))
    assert s.candidates(2) == (1,)
    assert s.candidates(1) == ()
    assert s.candidates(0) == (1, 2)


def test_from_adjacency_shape_check():
    with pytest.raises(GraphError):
        from_adjacency(np.zeros((2, 3)))


def test_merge_modes():
    s = from_adjacency(np.zeros((3, 3), bool))
    g = np.zeros((3, 3), bool)
    g[0, 1] = g[2, 1] = True  # v-structure stays directed
    assert merge_space(s, g, "dag").core.sum() == 2
    assert merge_space(s, g, "cpdag").core.sum() == 2
    assert merge_space(s, g, "skeleton").core.sum() == 4
    with pytest.raises(DataError):
        merge_space(s, g, "bogus")


def test_merge_respects_hardlimit():
    s = from_adjacency(np.zeros((4, 4), bool), hardlimit=2)
    g = np.zeros((4, 4), bool)
    g[:3, 3] = True
    m = merge_space(s, g)
    assert m.saturated == (3,) and m.core[:, 3].sum() == 0


def test_fisher_z_detects_conditional_independence():
    _, d = chain_data()
    t = FisherZ(d.values, None)
    assert t.pvalue(0, 2, ()) < 1e-6
    assert t.pvalue(0, 2, (1,)) > 0.01


def test_pc_skeleton_recovers_chain():
    adj, d = chain_data()
    s = pc_skeleton(build_score_context(d))
    assert np.array_equal(s.core, skeleton(adj))
    assert s.origin == "pc"


def test_pc_is_order_independent():
    rng = np.random.default_rng(5)
    adj = sample_dag(8, 1.5, rng)
    d = simulate_data(adj, "linear-gaussian", 150, rng)
    perm = rng.permutation(8)
    s1 = pc_skeleton(build_score_context(d))
    s2 = pc_skeleton(build_score_context(d.select(perm)))
    assert np.array_equal(s1.core[np.ix_(perm, perm)], s2.core)


def test_pc_discrete_and_hardlimit():
    rng = np.random.default_rng(6)
    adj = sample_dag(6, 2, rng)
    d = simulate_data(adj, "categorical-cpt", 300, rng)
    s = pc_skeleton(build_score_context(d), hardlimit=1)
    assert s.core.sum(axis=0).max() <= 1
    with pytest.raises(DataError):
        pc_skeleton(build_score_context(d), alpha=1.5)
