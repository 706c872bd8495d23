"""Graphs, node orders and labelled partitions.

Graphs are square numpy boolean adjacency matrices: ``adj[i, j]`` is the
edge ``i -> j``, so column ``j`` holds the parents of node ``j``.  A pair of
symmetric entries denotes an undirected edge (skeletons, CPDAGs, search
spaces).  Node orders list nodes so that parents come *after* their
children, and labelled partitions split such an order into parts.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphError

__all__ = [
    "as_adjacency",
    "is_acyclic",
    "topological_order",
    "parents",
    "n_edges",
    "skeleton",
    "v_structures",
    "compatible_with_order",
    "LabelledPartition",
    "compatible_with_partition",
    "partition_of_dag",
    "count_linear_extensions",
    "dag_to_cpdag",
    "is_dag",
    "sample_dag",
]


def as_adjacency(adj, *, allow_loops: bool = False) -> np.ndarray:
    """Validate ``adj`` and return it as a boolean matrix."""
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {a.shape}")
    a = a.astype(bool)
    if not allow_loops and a.diagonal().any():
        raise GraphError("adjacency has self-loops on the diagonal")
    return a


def topological_order(adj) -> list[int] | None:
    """Kahn's algorithm; returns a topological order or None if cyclic.

    Ties are resolved by smallest node index so the result is deterministic.
    Symmetric (undirected) entries count as a 2-cycle.
    """
    a = as_adjacency(adj)
    n = a.shape[0]
    indeg = a.sum(axis=0).astype(int)
    ready = [j for j in range(n) if indeg[j] == 0]
    order = []
    heapq.heapify(ready)
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in np.flatnonzero(a[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, int(c))
    if len(order) < n:
        return None
    return order


def is_acyclic(adj) -> bool:
    return topological_order(adj) is not None


def is_dag(adj) -> bool:
    """True for an acyclic matrix without self-loops (never raises)."""
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.astype(bool).diagonal().any():
        return False
    return is_acyclic(a)


def parents(adj, j: int) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(np.asarray(adj)[:, j]))


def n_edges(adj) -> int:
    """Number of edges, counting an undirected pair once."""
    a = np.asarray(adj).astype(bool)
    sym = a & a.T
    return int(a.sum() - sym.sum() // 2)


def skeleton(adj) -> np.ndarray:
    a = np.asarray(adj).astype(bool)
    return a | a.T


def v_structures(adj) -> set[tuple[int, int, int]]:
    """Unshielded colliders ``(a, c, b)`` with ``a -> c <- b``, ``a < b``."""
    a = as_adjacency(adj)
    skel = skeleton(a)
    out = set()
    for c in range(a.shape[0]):
        pa = np.flatnonzero(a[:, c] & ~a[c, :])
        for x, y in combinations(pa, 2):
            if not skel[x, y]:
                out.add((int(x), c, int(y)))
    return out


def _check_order(order: Sequence[int], n: int, bgnodes: Iterable[int]) -> None:
    bg = set(bgnodes)
    if sorted(order) != sorted(set(range(n)) - bg):
        raise GraphError(
            f"order must be a permutation of the {n - len(bg)} non-root nodes"
        )


def compatible_with_order(adj, order: Sequence[int], bgnodes: Iterable[int] = ()) -> bool:
    """True iff every parent of every ordered node appears later in ``order``.

    Root (background) nodes are not part of the order and are always
    admissible parents.
    """
    a = as_adjacency(adj)
    bg = set(bgnodes)
    _check_order(order, a.shape[0], bg)
    pos = {v: k for k, v in enumerate(order)}
    for v in order:
        for p in np.flatnonzero(a[:, v]):
            p = int(p)
            if p in bg:
                continue
            if pos[p] <= pos[v]:
                return False
    return True


@dataclass(frozen=True)
class LabelledPartition:
    """An ordered sequence of disjoint node sets (parts).

    ``perm`` lists the nodes part by part; ``sizes`` gives the part sizes.
    Nodes inside a part are kept sorted so equal partitions compare equal.
    """

    perm: tuple[int, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        sizes = tuple(int(k) for k in self.sizes)
        if not sizes or any(k < 1 for k in sizes):
            raise GraphError(f"part sizes must be positive, got {sizes}")
        if sum(sizes) != len(perm) or len(set(perm)) != len(perm):
            raise GraphError("sizes must sum to the number of distinct nodes in perm")
        canon = []
        start = 0
        for k in sizes:
            canon.extend(sorted(perm[start:start + k]))
            start += k
        object.__setattr__(self, "perm", tuple(canon))
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_parts(cls, parts: Sequence[Iterable[int]]) -> "LabelledPartition":
        parts = [sorted(p) for p in parts]
        return cls(tuple(v for p in parts for v in p), tuple(len(p) for p in parts))

    @property
    def parts(self) -> tuple[tuple[int, ...], ...]:
        out = []
        start = 0
        for k in self.sizes:
            out.append(self.perm[start:start + k])
            start += k
        return tuple(out)

    def __len__(self) -> int:
        return len(self.sizes)

    def part_index(self) -> dict[int, int]:
        return {v: j for j, part in enumerate(self.parts) for v in part}


def compatible_with_partition(adj, lp: LabelledPartition, bgnodes: Iterable[int] = ()) -> bool:
    """Check the three partition-compatibility conditions for every node.

    For a node in part ``j`` (0-based, ``p`` parts): all ordered parents lie
    in later parts, at least one lies in part ``j + 1`` unless ``j`` is the
    last part, and nodes of the last part have no ordered parents.
    Background nodes are ignored as parents.
    """
    a = as_adjacency(adj)
    bg = set(bgnodes)
    _check_order(lp.perm, a.shape[0], bg)
    where = lp.part_index()
    p = len(lp)
    for v, j in where.items():
        pj = [where[int(u)] for u in np.flatnonzero(a[:, v]) if int(u) not in bg]
        if j == p - 1:
            if pj:
                return False
            continue
        if not pj or min(pj) <= j or (j + 1) not in pj:
            return False
    return True


def partition_of_dag(adj, bgnodes: Iterable[int] = ()) -> LabelledPartition:
    """The unique labelled partition a DAG is compatible with.

    A node's part is fixed by the length of the longest directed path that
    reaches it from a parentless node: parentless nodes form the last part.
    """
    a = as_adjacency(adj)
    bg = set(bgnodes)
    if not is_acyclic(a):
        raise GraphError("graph is cyclic")
    nodes = [v for v in range(a.shape[0]) if v not in bg]
    level: dict[int, int] = {}
    # depth = longest path to a parentless node, counted over ordered nodes
    topo = [v for v in topological_order(a) if v not in bg]
    for v in topo:
        pa = [int(u) for u in np.flatnonzero(a[:, v]) if int(u) not in bg]
        level[v] = 0 if not pa else 1 + max(level[u] for u in pa)
    if not nodes:
        raise GraphError("no ordered nodes")
    depth = max(level.values())
    parts = [[v for v in nodes if level[v] == d] for d in range(depth, -1, -1)]
    return LabelledPartition.from_parts(parts)


def count_linear_extensions(adj, limit: int = 12) -> int:
    """Number of node orders the DAG is compatible with (exponential DP)."""
    a = as_adjacency(adj)
    n = a.shape[0]
    if n > limit:
        raise GraphError(f"count_linear_extensions is limited to n <= {limit}")
    if not is_acyclic(a):
        raise GraphError("graph is cyclic")
    # Fill the order from its end: a node may be placed (before the already
    # placed suffix) once all its parents are in that suffix.
    pmask = [sum(1 << int(u) for u in np.flatnonzero(a[:, v])) for v in range(n)]
    ways = [0] * (1 << n)
    ways[0] = 1
    for s in range(1 << n):
        if not ways[s]:
            continue
        for v in range(n):
            if not (s >> v) & 1 and pmask[v] & ~s == 0:
                ways[s | (1 << v)] += ways[s]
    return ways[(1 << n) - 1]


def dag_to_cpdag(adj) -> np.ndarray:
    """CPDAG of the Markov equivalence class of a DAG.

    Keeps v-structures directed and orients the remaining edges with Meek's
    rules 1-3; everything left is returned as symmetric entries.
    """
    a = as_adjacency(adj)
    if not is_acyclic(a):
        raise GraphError("cannot convert a cyclic graph to a CPDAG")
    n = a.shape[0]
    skel = skeleton(a)
    g = skel.copy()
    for x, c, y in v_structures(a):
        g[c, x] = False
        g[c, y] = False

    def undirected(i, j):
        return g[i, j] and g[j, i]

    def directed(i, j):
        return g[i, j] and not g[j, i]

    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                if not undirected(i, j):
                    continue
                # R1: k -> i - j, k and j nonadjacent
                r = any(directed(k, i) and not skel[k, j] for k in range(n) if k != j)
                # R2: i -> k -> j
                if not r:
                    r = any(directed(i, k) and directed(k, j) for k in range(n))
                # R3: i - k1 -> j, i - k2 -> j, k1 and k2 nonadjacent
                if not r:
                    ks = [k for k in range(n) if undirected(i, k) and directed(k, j)]
                    r = any(not skel[k1, k2] for k1, k2 in combinations(ks, 2))
                if r:
                    g[j, i] = False
                    changed = True
    return g


def sample_dag(n: int, avg_parents: float, rng: np.random.Generator) -> np.ndarray:
    """Random DAG with about ``n * avg_parents`` edges.

    A uniform random order is drawn and every edge consistent with it is
    included independently with probability ``2 * avg_parents / (n - 1)``.
    """
    if n < 1 or avg_parents < 0:
        raise GraphError("need n >= 1 and avg_parents >= 0")
    adj = np.zeros((n, n), dtype=bool)
    if n == 1 or avg_parents == 0:
        return adj
    prob = min(1.0, 2.0 * avg_parents / (n - 1))
    perm = rng.permutation(n)
    draws = rng.random((n, n)) < prob
    # perm[k] may take any perm[m], m > k, as parent
    for k in range(n):
        for m in range(k + 1, n):
            if draws[k, m]:
                adj[perm[m], perm[k]] = True
    return adj


def binom_log(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def order_allowed_masks(order: Sequence[int], bg_mask: int = 0) -> list[int]:
    """Bitmask of admissible parents for each position of an order."""
    out = [0] * len(order)
    acc = bg_mask
    for k in range(len(order) - 1, -1, -1):
        out[k] = acc
        acc |= 1 << order[k]
    return out


def mask_of(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m


def mask_nodes(mask: int) -> tuple[int, ...]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


def random_order(nodes: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(nodes[i]) for i in rng.permutation(len(nodes)))


def dag_from_parents(n: int, parent_sets: dict[int, Iterable[int]]) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    for j, pa in parent_sets.items():
        for i in pa:
            adj[i, j] = True
    return adj

