import math

import numpy as np
import pytest

import oracles
from bnmcmc.data import build_score_context
from bnmcmc.errors import DataError
from bnmcmc.graph import LabelledPartition, compatible_with_partition, sample_dag
from bnmcmc.order_mcmc import ChainConfig
from bnmcmc.partition_mcmc import partition_dag, partition_node_score, partition_score, run_partition_chain
from bnmcmc.scoring import simulate_data, total_score
from bnmcmc.search_space import full_space
from bnmcmc.tables import build_tables


def problem(n, seed, N=25):
    rng = np.random.default_rng(seed)
    data = simulate_data(sample_dag(n, 1.2, rng), "linear-gaussian", N, rng)
    ctx = build_score_context(data)
    return ctx, build_tables(ctx, full_space(n), plus1=True)


def test_partition_score_matches_enumeration():
    ctx, tables = problem(4, 31)
    dags = oracles.all_dags(4)
    scores = np.array([total_score(ctx, g) for g in dags])
    for parts in list(oracles.labelled_partitions(range(4)))[::5]:
        lp = LabelledPartition.from_parts(parts)
        fit = [s for g, s in zip(dags, scores) if oracles.fits_partition(g, parts)]
        assert math.isclose(partition_score(tables, lp), np.logaddexp.reduce(fit), abs_tol=1e-9)
        assert math.isclose(partition_score(tables, lp),
                            sum(partition_node_score(tables, lp, v) for v in range(4)))


def test_sampled_dags_fit_their_partition():
    ctx, tables = problem(5, 32)
    rng = np.random.default_rng(0)
    lp = LabelledPartition.from_parts([[0, 3], [1], [2, 4]])
    for _ in range(30):
        g, s = partition_dag(tables, lp, rng)
        assert compatible_with_partition(g, lp)
        assert math.isclose(s, total_score(ctx, g))


def test_chain_samples_posterior_n3():
    ctx, tables = problem(3, 33, N=12)
    dags = oracles.all_dags(3)
    sc = np.array([total_score(ctx, g) for g in dags])
    post = np.exp(sc - np.logaddexp.reduce(sc))
    res = run_partition_chain(tables, ChainConfig(iterations=60000, stepsave=4, seed=3))
    index = {g.tobytes(): k for k, g in enumerate(dags)}
    kept = res.dags[len(res.dags) // 5:]
    freq = np.bincount([index[g.tobytes()] for g in kept], minlength=len(dags)) / len(kept)
    assert np.abs(freq - post).max() < 0.02


def test_chain_bookkeeping():
    ctx, tables = problem(5, 34)
    res = run_partition_chain(tables, ChainConfig(iterations=3000, seed=1))
    assert res.n_saved == 1001
    assert math.isclose(res.max_score, res.trace.max())
    assert math.isclose(total_score(ctx, res.max_dag), res.max_score)
    assert sum(res.info["proposed"]) > 0
    assert math.isclose(res.state_trace[-1], partition_score(tables, res.final_state))
    again = run_partition_chain(tables, ChainConfig(iterations=3000, seed=1))
    assert np.array_equal(res.trace, again.trace)


def test_start_partition_and_errors():
    _, tables = problem(4, 35)
    start = LabelledPartition.from_parts([[0, 1, 2, 3]])
    res = run_partition_chain(tables, ChainConfig(iterations=0, start=start, seed=0))
    assert res.final_state.parts == ((0, 1, 2, 3),)
    with pytest.raises(DataError):
        run_partition_chain(tables, ChainConfig(mode="map"))
    with pytest.raises(DataError):
        run_partition_chain(tables, ChainConfig(start=LabelledPartition.from_parts([[0, 1]])))
