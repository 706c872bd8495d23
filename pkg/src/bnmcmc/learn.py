"""End-to-end structure learning: core space, score tables, chain."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import ScoreContext
from .errors import DataError
from .iterative import IterativeConfig, IterativeResult, run_iterative
from .order_mcmc import ChainConfig, ChainResult, run_order_chain
from .partition_mcmc import run_partition_chain
from .search_space import SearchSpace, from_adjacency, pc_skeleton
from .tables import ScoreTableSet, build_tables, cached_tables, default_hardlimit

METHODS = ("order", "partition", "iterative")
DEFAULT_ALPHA = 0.05


@dataclass
class LearnResult:
    method: str
    mode: str
    chain: ChainResult
    space: SearchSpace
    start_space: SearchSpace
    tables: ScoreTableSet
    iterative: IterativeResult | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_dag(self) -> np.ndarray:
        if self.iterative is not None and self.iterative.max_score >= self.chain.max_score:
            return self.iterative.max_dag
        return self.chain.max_dag

    @property
    def max_score(self) -> float:
        if self.iterative is not None:
            return max(self.iterative.max_score, self.chain.max_score)
        return self.chain.max_score


def learn(ctx: ScoreContext, method: str = "order", mode: str = "sample", *,
          startspace=None, blacklist=None, alpha: float = DEFAULT_ALPHA,
          plus1: bool | None = None, hardlimit: int | None = None,
          iterations: int | None = None, stepsave: int | None = None, moveprobs=None,
          startorder=None, seed=None, expand: bool = True, max_expansions: int | None = None,
          merge_mode: str = "dag", posterior: float = 0.5, cache_dir=None,
          chainout: bool = True) -> LearnResult:
    """Learn a structure with order, partition or iterative MCMC.

    Without ``startspace`` the core space is the PC skeleton at level
    ``alpha``.  A partition chain without ``startspace`` first expands that
    skeleton iteratively (unless ``expand`` is false) and then samples on
    the final space.
    """
    if method not in METHODS:
        raise DataError(f"method must be one of {METHODS}")
    if mode not in ("map", "sample"):
        raise DataError("mode must be 'map' or 'sample'")
    if method == "partition" and mode != "sample":
        raise DataError("partition MCMC only samples")
    if plus1 is None:
        plus1 = True
    if method == "partition" and not plus1:
        raise DataError("partition MCMC always uses the plus-one extended space")
    if hardlimit is None:
        hardlimit = default_hardlimit(plus1)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    seeds = seed.spawn(2)
    timings = {}

    t0 = time.perf_counter()
    if startspace is None:
        space0 = pc_skeleton(ctx, alpha, hardlimit=hardlimit, blacklist=blacklist)
    elif isinstance(startspace, SearchSpace):
        space0 = startspace
    else:
        space0 = from_adjacency(startspace, blacklist, ctx, hardlimit=hardlimit)
    timings["space"] = time.perf_counter() - t0

    def tables_for(space):
        t = time.perf_counter()
        if cache_dir is not None:
            tab = cached_tables(cache_dir, ctx, space, plus1, hardlimit)
        else:
            tab = build_tables(ctx, space, plus1, hardlimit)
        timings["tables"] = timings.get("tables", 0.0) + time.perf_counter() - t
        return tab

    it_res = None
    space = space0
    if method == "iterative" or (method == "partition" and startspace is None and expand):
        it_cfg = IterativeConfig(
            mode=mode if method == "iterative" else "map",
            max_expansions=max_expansions, merge_mode=merge_mode, posterior=posterior,
            iterations=iterations if method == "iterative" else None,
            stepsave=stepsave if method == "iterative" else None,
            moveprobs=moveprobs, plus1=plus1, hardlimit=hardlimit,
            seed=seeds[0],
        )
        t = time.perf_counter()
        it_res = run_iterative(ctx, space0, it_cfg, tables=tables_for(space0))
        timings["iterative"] = time.perf_counter() - t
        space = it_res.final_space

    t = time.perf_counter()
    if method == "iterative":
        chain = it_res.last_chain
        tables = it_res.tables
    else:
        tables = it_res.tables if it_res is not None else tables_for(space)
        if it_res is not None:
            # the last expansion may have grown the space after the chain ran
            tables = tables.rebuild(space)
        cfg = ChainConfig(mode=mode, iterations=iterations, stepsave=stepsave, moveprobs=moveprobs,
                          start=startorder, seed=np.random.default_rng(seeds[1]), chainout=chainout)
        runner = run_order_chain if method == "order" else run_partition_chain
        chain = runner(tables, cfg)
    timings["chain"] = time.perf_counter() - t

    meta = {
        "method": method,
        "mode": mode,
        "plus1": plus1,
        "hardlimit": hardlimit,
        "alpha": alpha if startspace is None else None,
        "start_space": space0.origin,
        "start_space_edges": space0.n_edges(),
        "final_space_edges": space.n_edges(),
        "space_warnings": list(space0.warnings),
        "chain": chain.info,
        "timings": timings,
    }
    if it_res is not None:
        meta["iterative"] = {**it_res.info, "rounds": it_res.n_iterations,
                             "iterations_per_round": it_res.chain_iterations,
                             "added_edges": it_res.added_edges}
    return LearnResult(method, mode, chain, space, space0, tables, it_res, meta)


__all__ = ["DEFAULT_ALPHA", "LearnResult", "METHODS", "learn"]
