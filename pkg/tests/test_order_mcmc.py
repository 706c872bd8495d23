import itertools
import math

import numpy as np
import pytest

from bnmcmc.data import build_score_context
from bnmcmc.errors import DataError
from bnmcmc.graph import compatible_with_order, is_dag, sample_dag
from bnmcmc.order_mcmc import ChainConfig, default_iterations, order_dag, order_score, run_order_chain
from bnmcmc.scoring import simulate_data, total_score
from bnmcmc.search_space import full_space
from bnmcmc.tables import build_tables


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(21)
    adj = sample_dag(5, 1.5, rng)
    data = simulate_data(adj, "linear-gaussian", 40, rng)
    ctx = build_score_context(data)
    return ctx, build_tables(ctx, full_space(5), plus1=True)


def test_default_iterations():
    it, ss, raw = default_iterations(10, "order")
    assert math.isclose(raw, 6 * 100 * math.log(10))
    assert it == 1000 * ss and ss == int(raw // 1000)
    it, ss, raw = default_iterations(100, "iterative")
    assert (it, ss) == (161000, 161)
    it, ss, raw = default_iterations(10, "order", stepsave=7)
    assert ss == 7 and it % 7 == 0 and it >= raw
    assert default_iterations(2, "order")[1] == 1


def test_config_validation():
    for cfg in (ChainConfig(mode="bogus"), ChainConfig(moveprobs=(1, 0)),
                ChainConfig(moveprobs=(0.5, 0.6, -0.1)), ChainConfig(iterations=5, stepsave=6)):
        with pytest.raises(DataError):
            cfg.resolve(5, "order")
    it, ss, mp, meta = ChainConfig(iterations=5000).resolve(5, "order")
    assert ss == 5 and mp == (0.45, 0.45, 0.10)


def test_order_dag_is_compatible(small):
    ctx, tables = small
    rng = np.random.default_rng(0)
    for order in itertools.islice(itertools.permutations(range(5)), 0, 120, 13):
        g, s = order_dag(tables, order, "map")
        assert compatible_with_order(g, order) and math.isclose(s, total_score(ctx, g))
        assert math.isclose(s, order_score(tables, order, "map"))
        g, s = order_dag(tables, order, "sample", rng)
        assert compatible_with_order(g, order) and math.isclose(s, total_score(ctx, g))


def test_order_score_rejects_non_permutations(small):
    _, tables = small
    with pytest.raises(DataError):
        order_score(tables, [0, 1, 2])


def test_chain_is_reproducible(small):
    _, tables = small
    a = run_order_chain(tables, ChainConfig(iterations=2000, seed=5))
    b = run_order_chain(tables, ChainConfig(iterations=2000, seed=5))
    assert np.array_equal(a.trace, b.trace) and np.array_equal(a.dags, b.dags)
    assert a.n_saved == 1001 and a.dags.shape == (1001, 5, 5)
    assert all(is_dag(g) for g in a.dags[::50])


def test_map_chain_finds_best_order(small):
    ctx, tables = small
    best = max(order_score(tables, o, "map") for o in itertools.permutations(range(5)))
    res = run_order_chain(tables, ChainConfig(mode="map", iterations=3000, seed=1))
    assert math.isclose(res.max_score, best)
    assert math.isclose(res.max_score, res.trace.max())
    assert math.isclose(total_score(ctx, res.max_dag), res.max_score)


def test_sample_trace_scores_sampled_dags(small):
    ctx, tables = small
    res = run_order_chain(tables, ChainConfig(iterations=500, stepsave=50, seed=2))
    for g, s in zip(res.dags, res.trace):
        assert math.isclose(total_score(ctx, g), s)


def test_start_order_is_used(small):
    _, tables = small
    res = run_order_chain(tables, ChainConfig(iterations=0, start=(4, 3, 2, 1, 0), seed=0))
    assert tuple(res.final_state) == (4, 3, 2, 1, 0)


def test_state_trace_holds_order_scores(small):
    _, tables = small
    res = run_order_chain(tables, ChainConfig(iterations=0, start=(0, 1, 2, 3, 4), seed=0))
    assert math.isclose(res.state_trace[0], order_score(tables, (0, 1, 2, 3, 4)))
