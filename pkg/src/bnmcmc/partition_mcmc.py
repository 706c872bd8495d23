"""Partition MCMC: unbiased DAG sampling over labelled partitions.

A state is an ordered list of parts.  A node in part ``j`` takes all its
parents from later parts, at least one of them from part ``j + 1``; nodes of
the last part have no parents among the ordered nodes.  Background nodes are
admissible parents everywhere.

Four proposal families are mixed with fixed probabilities, each one a
Metropolis-Hastings kernel in its own right:

0. swap two nodes from different parts
1. swap two nodes from adjacent parts
2. split a part in two or join two adjacent parts
3. move one node into another part or into a new singleton part
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError, ScoreError
from .graph import LabelledPartition, binom_log, mask_of, partition_of_dag
from .order_mcmc import ChainConfig, ChainResult, _rng, order_dag
from .tables import ScoreTableSet

Parts = list  # list[list[int]], each inner list sorted


def _canon(parts) -> Parts:
    return [sorted(p) for p in parts if p]


def _suffix_masks(parts: Parts, bg_mask: int) -> list[int]:
    """out[j] = background plus all nodes of parts j.. (out[p] = background)."""
    out = [bg_mask] * (len(parts) + 1)
    for j in range(len(parts) - 1, -1, -1):
        out[j] = out[j + 1] | mask_of(parts[j])
    return out


def partition_node_score(tables: ScoreTableSet, lp, node: int) -> float:
    parts = _as_parts(lp)
    where = {v: j for j, p in enumerate(parts) for v in p}
    suf = _suffix_masks(parts, tables.bg_mask)
    return _node_term(tables, parts, suf, where[node], node)


def _node_term(tables, parts, suf, j, node) -> float:
    if j == len(parts) - 1:
        return tables.restricted_sum(node, tables.bg_mask)
    return tables.restricted_sum_required(node, suf[j + 1], mask_of(parts[j + 1]))


def partition_score(tables: ScoreTableSet, lp) -> float:
    """Log of the summed exp-scores of all DAGs compatible with ``lp``."""
    parts = _as_parts(lp)
    suf = _suffix_masks(parts, tables.bg_mask)
    return math.fsum(_node_term(tables, parts, suf, j, v) for j, p in enumerate(parts) for v in p)


def partition_dag(tables: ScoreTableSet, lp, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw a DAG compatible with ``lp`` proportionally to its score."""
    parts = _as_parts(lp)
    suf = _suffix_masks(parts, tables.bg_mask)
    adj = np.zeros((tables.n, tables.n), dtype=bool)
    total = 0.0
    last = len(parts) - 1
    for j, part in enumerate(parts):
        for v in part:
            if j == last:
                pa = tables.sample_parents(v, tables.bg_mask, rng)
            else:
                pa = tables.sample_parents(v, suf[j + 1], rng, required=mask_of(parts[j + 1]))
            adj[list(pa), v] = True
            total += tables.entry(v, pa)
    return adj, total


def _as_parts(lp) -> Parts:
    if isinstance(lp, LabelledPartition):
        return [list(p) for p in lp.parts]
    return _canon(lp)


def _to_lp(parts: Parts) -> LabelledPartition:
    return LabelledPartition.from_parts(parts)


# proposals ----------------------------------------------------------------------
# each returns (new_parts, log q(reverse) - log q(forward)) or None to stay

def _swap_any(parts: Parts, rng):
    if len(parts) < 2:
        return None
    flat = [(v, j) for j, p in enumerate(parts) for v in p]
    while True:
        a, b = rng.choice(len(flat), 2, replace=False)
        (x, jx), (y, jy) = flat[a], flat[b]
        if jx != jy:
            break
    new = [p[:] for p in parts]
    new[jx][new[jx].index(x)] = y
    new[jy][new[jy].index(y)] = x
    return _canon(new), 0.0


def _swap_adjacent(parts: Parts, rng):
    if len(parts) < 2:
        return None
    w = np.array([len(parts[j]) * len(parts[j + 1]) for j in range(len(parts) - 1)], float)
    j = int(rng.choice(len(w), p=w / w.sum()))
    x = parts[j][int(rng.integers(len(parts[j])))]
    y = parts[j + 1][int(rng.integers(len(parts[j + 1])))]
    new = [p[:] for p in parts]
    new[j][new[j].index(x)] = y
    new[j + 1][new[j + 1].index(y)] = x
    return _canon(new), 0.0


def _split_join(parts: Parts, rng):
    n = sum(len(p) for p in parts)
    if n < 2:
        return None
    # n - p split options (part j, first-part size m) and p - 1 joins
    r = int(rng.integers(n - 1))
    for j, part in enumerate(parts):
        k = len(part)
        if r < k - 1:
            m = r + 1
            chosen = sorted(int(v) for v in rng.choice(part, m, replace=False))
            rest = [v for v in part if v not in set(chosen)]
            new = parts[:j] + [chosen, rest] + parts[j + 1:]
            return _canon(new), binom_log(k, m)
        r -= k - 1
    j = r
    a, b = len(parts[j]), len(parts[j + 1])
    new = parts[:j] + [parts[j] + parts[j + 1]] + parts[j + 2:]
    return _canon(new), -binom_log(a + b, a)


def _n_targets(parts: Parts, where: dict, x: int) -> int:
    p = len(parts)
    return 2 * p if len(parts[where[x]]) > 1 else 2 * p - 2


def _drop(parts: Parts, y: int):
    return [tuple(v for v in p if v != y) for p in parts if any(v != y for v in p)]


def _move_node(parts: Parts, rng):
    n = sum(len(p) for p in parts)
    where = {v: j for j, p in enumerate(parts) for v in p}
    x = int(rng.integers(n))
    x = sorted(where)[x]
    T = _n_targets(parts, where, x)
    if T == 0:
        return None
    i = where[x]
    p = len(parts)
    single = len(parts[i]) == 1
    # targets: existing parts l != i, then gaps g in 0..p (before part g)
    targets = [("part", l) for l in range(p) if l != i]
    targets += [("gap", g) for g in range(p + 1) if not (single and g in (i, i + 1))]
    kind, l = targets[int(rng.integers(len(targets)))]
    new = [[v for v in q if v != x] for q in parts]
    if kind == "part":
        new[l].append(x)
    else:
        new.insert(l, [x])
    new = _canon(new)
    new_where = {v: j for j, q in enumerate(new) for v in q}

    def rel(w, a, b):
        return (w[a] > w[b]) - (w[a] < w[b])

    changed = [z for z in where if z != x and rel(where, x, z) != rel(new_where, x, z)]
    fwd = 1.0 / T
    rev = 1.0 / _n_targets(new, new_where, x)
    if len(changed) == 1:
        y = changed[0]
        if _drop(parts, y) == _drop(new, y):
            fwd += 1.0 / _n_targets(parts, where, y)
            rev += 1.0 / _n_targets(new, new_where, y)
    return new, math.log(rev) - math.log(fwd)


_MOVES = (_swap_any, _swap_adjacent, _split_join, _move_node)


def run_partition_chain(tables: ScoreTableSet, cfg: ChainConfig | None = None) -> ChainResult:
    """Sample DAGs with partition MCMC on plus-one tables."""
    cfg = cfg or ChainConfig()
    if cfg.mode != "sample":
        raise DataError("partition MCMC only samples")
    nodes = tables.nodes
    iterations, stepsave, moveprobs, meta = cfg.resolve(len(nodes), "partition", n_moves=4)
    rng = _rng(cfg.seed)
    if cfg.start is None:
        order = [int(nodes[i]) for i in rng.permutation(len(nodes))]
        adj, _ = order_dag(tables, order, "sample", rng)
        parts = _as_parts(partition_of_dag(adj, tables.bgnodes))
    else:
        parts = _as_parts(cfg.start)
        if sorted(v for p in parts for v in p) != list(nodes):
            raise DataError("start partition must cover the non-background nodes exactly")
    score = partition_score(tables, parts)
    if not math.isfinite(score):
        raise ScoreError("start partition has no compatible DAG in the search space")

    n_save = iterations // stepsave + 1
    trace = np.empty(n_save)
    ptrace = np.empty(n_save)
    dags = np.zeros((n_save, tables.n, tables.n), dtype=bool) if cfg.chainout else None
    best = (-math.inf, None, None)
    proposed = np.zeros(4, dtype=np.int64)
    accepted = np.zeros(4, dtype=np.int64)
    cum = np.cumsum(moveprobs)

    def save(idx):
        nonlocal best
        adj, s = partition_dag(tables, parts, rng)
        trace[idx] = s
        ptrace[idx] = score
        if dags is not None:
            dags[idx] = adj
        if s > best[0]:
            best = (s, adj, _to_lp(parts))

    save(0)
    for it in range(1, iterations + 1):
        move = min(int(np.searchsorted(cum, rng.random(), side="right")), 3)
        prop = _MOVES[move](parts, rng)
        if prop is not None:
            proposed[move] += 1
            new, log_q = prop
            new_score = partition_score(tables, new)
            log_a = new_score - score + log_q
            if log_a >= 0 or math.log(rng.random()) < log_a:
                parts, score = new, new_score
                accepted[move] += 1
        if it % stepsave == 0:
            save(it // stepsave)

    meta.update(kind="partition", mode="sample", proposed=proposed.tolist(),
                accepted=accepted.tolist(), space_edges=tables.space.n_edges(), plus1=tables.plus1)
    return ChainResult("partition", "sample", trace, ptrace, dags, best[1], float(best[0]),
                       best[2], _to_lp(parts), meta)


__all__ = [
    "partition_dag",
    "partition_node_score",
    "partition_score",
    "run_partition_chain",
]
