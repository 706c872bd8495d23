import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from bnmcmc.errors import DataError, GraphError
from bnmcmc.graph import sample_dag
from bnmcmc.posterior import (
    METRIC_COLUMNS,
    burn,
    compare_dags,
    concordance,
    consensus_model,
    edge_posterior,
    edge_posterior_trace,
    samplecomp,
)


def graphs(n=5):
    return st.integers(0, 2**32 - 1).map(lambda s: sample_dag(n, 1.5, np.random.default_rng(s)))


def test_burn_drops_leading_fraction():
    s = np.zeros((10, 2, 2), bool)
    assert len(burn(s, 0.2)) == 8 and len(burn(s, 0.0)) == 10
    with pytest.raises(DataError):
        burn(s, 1.0)
    with pytest.raises(DataError):
        burn(np.zeros((3, 2)), 0.2)


def test_edge_posterior_and_consensus():
    s = np.zeros((5, 2, 2), bool)
    s[1:, 0, 1] = True
    s[3:, 1, 0] = True
    post = edge_posterior(s, burnin=0.2)
    assert post[0, 1] == 1.0 and post[1, 0] == 0.5
    assert consensus_model(post, 0.5).tolist() == [[False, True], [False, False]]
    with pytest.raises(DataError):
        consensus_model(post, 1.0)


def test_pdag_posterior_counts_both_directions():
    g = np.zeros((2, 2), bool)
    g[0, 1] = True
    post = edge_posterior(np.stack([g, g.T]), pdag=True, burnin=0)
    assert post[0, 1] == post[1, 0] == 1.0


def test_edge_posterior_trace():
    s = np.zeros((4, 2, 2), bool)
    s[:, 0, 1] = [1, 0, 1, 1]
    df = edge_posterior_trace(s, cutoff=0.2, labels=["a", "b"])
    assert list(df.columns) == ["a->b"]
    assert np.allclose(df["a->b"], [1, 0.5, 2 / 3, 0.75])


def test_concordance_flags():
    a = np.array([[0, 0.9], [0.1, 0]])
    b = np.array([[0, 0.4], [0.2, 0]])
    c = concordance(a, b, highlight=0.3)
    assert c.n_flagged == 1 and np.isclose(c.max_diff, 0.5)
    assert c.table["flag"].tolist() == [True, False]
    with pytest.raises(DataError):
        concordance(a, np.zeros((3, 3)))


@given(graphs(), graphs())
@settings(max_examples=80, deadline=None)
def test_compare_matches_oracle(est, tru):
    got = compare_dags(est, tru)
    want = oracles.compare_oracle(est, tru)
    assert all(got[k] == want[k] for k in want)
    cp = compare_dags(est, tru, as_cpdag=True)
    want = oracles.compare_oracle(oracles.cpdag(est), oracles.cpdag(tru))
    assert all(cp[k] == want[k] for k in want)


@given(graphs(), graphs())
@settings(max_examples=40, deadline=None)
def test_compare_symmetries(a, b):
    ab, ba = compare_dags(a, b), compare_dags(b, a)
    assert ab["TP"] == ba["TP"] and ab["FP"] == ba["FN"] and ab["SHD"] == ba["SHD"]
    assert compare_dags(a, a)["SHD"] == 0


def test_compare_edge_cases():
    z = np.zeros((3, 3), bool)
    m = compare_dags(z, z)
    assert m["TPR"] == m["FPR"] == m["FDR"] == 0.0
    with pytest.raises(GraphError):
        compare_dags(z, np.zeros((2, 2), bool))
    g = z.copy()
    g[0, 1] = True
    assert compare_dags(g, g.T)["SHD"] == 1 and compare_dags(g, g.T)["TP"] == 1


def test_samplecomp_columns():
    rng = np.random.default_rng(0)
    g = sample_dag(4, 1.5, rng)
    df = samplecomp(np.stack([g] * 10), g)
    assert list(df.columns) == METRIC_COLUMNS + ["p"]
    assert (df["SHD"] == 0).all() and len(df) == 4
