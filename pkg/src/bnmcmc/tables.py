"""Precomputed local-score tables over a search space and its plus-one extension.

For node ``i`` with candidate parents ``C`` (its column of the core space)
the table holds one row of ``2**len(C)`` scores per *layer*: layer 0 is
every subset of ``C``; with ``plus1`` there is one more layer per node ``u``
outside ``C`` holding every subset of ``C`` joined with ``u``.

Next to the raw scores each layer keeps its subset-sum transform
(``zsum[r, M]`` = log-sum-exp of ``raw[r, S]`` over ``S`` within ``M``) and,
on demand, the subset-max transform.  An order- or partition-restricted
query then reduces to one lookup per admissible layer.

Node sets are passed around as integer bitmasks over all ``n`` nodes.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import ScoreContext
from .errors import DataError, HardLimitError
from .graph import mask_nodes, parents as graph_parents
from .scoring import batch_scores, local_score
from .search_space import SearchSpace

FORMAT_VERSION = 1
NEG_INF = -math.inf
# log-diff-exp falls back to direct summation when more than this fraction
# of the mass cancels
_CANCEL = 1.0 - 1e-6
_CHUNK = 1 << 15


def default_hardlimit(plus1: bool) -> int:
    return 14 if plus1 else 20


def _lse(v: np.ndarray) -> float:
    m = v.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + math.log(np.exp(v - m).sum()))


def subset_logsumexp(raw: np.ndarray) -> np.ndarray:
    """Subset-sum (zeta) transform in the log domain, along the last axis."""
    F = np.array(raw, dtype=float, copy=True)
    L, size = F.shape
    k = size.bit_length() - 1
    for b in range(k):
        v = F.reshape(L, -1, 2, 1 << b)
        v[:, :, 1, :] = np.logaddexp(v[:, :, 1, :], v[:, :, 0, :])
    return F


def subset_max(raw: np.ndarray) -> np.ndarray:
    F = np.array(raw, dtype=float, copy=True)
    L, size = F.shape
    k = size.bit_length() - 1
    for b in range(k):
        v = F.reshape(L, -1, 2, 1 << b)
        np.maximum(v[:, :, 1, :], v[:, :, 0, :], out=v[:, :, 1, :])
    return F


class NodeTable:
    """Score layers of one node."""

    def __init__(self, node: int, candidates: tuple[int, ...], others: tuple[int, ...], raw: np.ndarray):
        self.node = node
        self.candidates = tuple(candidates)
        self.others = tuple(others)
        self.k = len(self.candidates)
        self.raw = raw
        self.zsum = subset_logsumexp(raw)
        self._zmax = None
        self._cand_bits = [(1 << c, 1 << b) for b, c in enumerate(self.candidates)]
        self._other_bits = [1 << u for u in self.others]
        self._other_row = {u: r + 1 for r, u in enumerate(self.others)}
        self._idx = np.arange(1 << self.k)

    @property
    def zmax(self) -> np.ndarray:
        if self._zmax is None:
            self._zmax = subset_max(self.raw)
        return self._zmax

    @property
    def n_entries(self) -> int:
        return self.raw.size

    def local_mask(self, nodes_mask: int) -> int:
        m = 0
        for gb, lb in self._cand_bits:
            if nodes_mask & gb:
                m |= lb
        return m

    def rows(self, allowed: int) -> list[int]:
        return [0] + [r + 1 for r, ob in enumerate(self._other_bits) if allowed & ob]

    def submasks(self, M: int) -> np.ndarray:
        idx = self._idx
        return idx[(idx & ~M) == 0]

    def parent_set(self, row: int, s: int) -> tuple[int, ...]:
        pa = [c for b, c in enumerate(self.candidates) if (s >> b) & 1]
        if row:
            pa.append(self.others[row - 1])
        return tuple(sorted(pa))

    def locate(self, parents: Iterable[int]) -> tuple[int, int] | None:
        """(row, subset) of a parent set, or None if outside the table."""
        s = 0
        extra = []
        cand = {c: b for b, c in enumerate(self.candidates)}
        for p in parents:
            if p in cand:
                s |= 1 << cand[p]
            else:
                extra.append(p)
        if not extra:
            return 0, s
        if len(extra) == 1 and extra[0] in self._other_row:
            return self._other_row[extra[0]], s
        return None


def _subset_bits(k: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << k)
    bits = ((idx[:, None] >> np.arange(k)) & 1).astype(bool)
    return bits, bits.sum(axis=1)


def compute_node_table(ctx: ScoreContext, node: int, candidates, others) -> NodeTable:
    cand = np.array(candidates, dtype=np.int64)
    oth = np.array(others, dtype=np.int64)
    k = len(cand)
    bits, pop = _subset_bits(k)
    raw = np.empty((1 + len(oth), 1 << k))
    for p in range(k + 1):
        ms = np.flatnonzero(pop == p)
        P = np.broadcast_to(cand, (len(ms), k))[bits[ms]].reshape(len(ms), p)
        raw[0, ms] = batch_scores(ctx, node, P)
        if len(oth) == 0:
            continue
        # every (other, subset) pair, chunked to bound memory
        total = len(oth) * len(ms)
        for start in range(0, total, _CHUNK):
            sel = np.arange(start, min(total, start + _CHUNK))
            ui, si = np.divmod(sel, len(ms))
            Q = np.concatenate([P[si], oth[ui][:, None]], axis=1)
            raw[1 + ui, ms[si]] = batch_scores(ctx, node, Q)
    if not np.all(np.isfinite(raw)):
        raise DataError(f"non-finite local score for node {ctx.labels[node]!r}")
    return NodeTable(node, tuple(int(c) for c in cand), tuple(int(u) for u in oth), raw)


class ScoreTableSet:
    """Score tables for every ordered node plus memoised restricted queries."""

    cache_limit = 1_000_000

    def __init__(self, ctx: ScoreContext, space: SearchSpace, plus1: bool, hardlimit: int,
                 tables: dict[int, NodeTable]):
        self.ctx = ctx
        self.space = space
        self.plus1 = plus1
        self.hardlimit = hardlimit
        self.tables = tables
        self.n = ctx.n
        self.bgnodes = tuple(ctx.bgnodes)
        self.bg_mask = ctx.bg_mask
        self.nodes = tuple(sorted(tables))
        self._sum: dict = {}
        self._max: dict = {}
        self._req: dict = {}

    def __getitem__(self, node: int) -> NodeTable:
        return self.tables[node]

    def _trim(self, cache: dict) -> None:
        if len(cache) > self.cache_limit:
            cache.clear()

    # queries -------------------------------------------------------------

    def restricted_sum(self, node: int, allowed) -> float:
        """log of the summed exp-scores of parent sets within ``allowed``."""
        allowed = _as_mask(allowed)
        key = (node, allowed)
        v = self._sum.get(key)
        if v is None:
            t = self.tables[node]
            v = _lse(t.zsum[t.rows(allowed), t.local_mask(allowed)])
            self._trim(self._sum)
            self._sum[key] = v
        return v

    def restricted_max_score(self, node: int, allowed) -> float:
        allowed = _as_mask(allowed)
        key = (node, allowed)
        v = self._max.get(key)
        if v is None:
            t = self.tables[node]
            v = float(t.zmax[t.rows(allowed), t.local_mask(allowed)].max())
            self._trim(self._max)
            self._max[key] = v
        return v

    def restricted_max(self, node: int, allowed) -> tuple[float, tuple[int, ...]]:
        """Best admissible parent set; ties go to the lexicographically
        smallest sorted tuple of parent indices."""
        allowed = _as_mask(allowed)
        t = self.tables[node]
        M = t.local_mask(allowed)
        rows = t.rows(allowed)
        vals = t.zmax[rows, M]
        best = float(vals.max())
        subs = t.submasks(M)
        found = []
        for r, v in zip(rows, vals):
            if v == best:
                hits = subs[t.raw[r, subs] == best]
                found.extend(t.parent_set(r, int(s)) for s in hits)
        return best, min(found)

    def term(self, node: int, allowed: int, use_max: bool) -> float:
        if use_max:
            return self.restricted_max_score(node, allowed)
        return self.restricted_sum(node, allowed)

    def _required_masses(self, t: NodeTable, allowed: int, required: int):
        M = t.local_mask(allowed)
        V = t.local_mask(required)
        rows = t.rows(allowed)
        masses = np.empty(len(rows))
        for i, r in enumerate(rows):
            if r and (required >> t.others[r - 1]) & 1:
                masses[i] = t.zsum[r, M]
                continue
            if not M & V:
                masses[i] = NEG_INF
                continue
            a = t.zsum[r, M]
            b = t.zsum[r, M & ~V]
            ratio = math.exp(b - a) if b > NEG_INF else 0.0
            if ratio < _CANCEL:
                masses[i] = a + math.log1p(-ratio)
            else:
                subs = t.submasks(M)
                subs = subs[(subs & V) != 0]
                masses[i] = _lse(t.raw[r, subs])
        return M, V, rows, masses

    def restricted_sum_required(self, node: int, allowed, required) -> float:
        """Like :meth:`restricted_sum` but every parent set must contain at
        least one node of ``required`` (a subset of ``allowed``)."""
        allowed = _as_mask(allowed)
        required = _as_mask(required)
        key = (node, allowed, required)
        v = self._req.get(key)
        if v is None:
            t = self.tables[node]
            v = _lse(self._required_masses(t, allowed, required)[3])
            self._trim(self._req)
            self._req[key] = v
        return v

    def sample_parents(self, node: int, allowed, rng: np.random.Generator, required=0) -> tuple[int, ...]:
        """Draw a parent set with probability proportional to exp(score)."""
        allowed = _as_mask(allowed)
        required = _as_mask(required)
        t = self.tables[node]
        if required:
            M, V, rows, masses = self._required_masses(t, allowed, required)
        else:
            M, V = t.local_mask(allowed), 0
            rows = t.rows(allowed)
            masses = t.zsum[rows, M]
        i = _draw(masses, rng)
        if i is None:
            raise DataError(f"no admissible parent set for node {self.ctx.labels[node]!r}")
        r = rows[i]
        subs = t.submasks(M)
        if required and not (r and (required >> t.others[r - 1]) & 1):
            subs = subs[(subs & V) != 0]
        j = _draw(t.raw[r, subs], rng)
        return t.parent_set(r, int(subs[j]))

    # scoring helpers -------------------------------------------------------

    def entry(self, node: int, parents: Iterable[int]) -> float:
        pa = tuple(int(p) for p in parents)
        t = self.tables[node]
        loc = t.locate(pa)
        if loc is None:
            return local_score(self.ctx, node, pa)
        return float(t.raw[loc])

    def dag_score(self, adj) -> float:
        return float(sum(self.entry(j, graph_parents(adj, j)) for j in self.nodes))

    def n_entries(self, node: int) -> int:
        return self.tables[node].n_entries

    def rebuild(self, space: SearchSpace) -> "ScoreTableSet":
        """Tables for a new space, recomputing only nodes whose candidate
        sets changed."""
        new = {}
        for node, t in self.tables.items():
            cand = space.candidates(node)
            if cand == t.candidates:
                new[node] = t
            else:
                new[node] = _node_table(self.ctx, space, node, self.plus1, self.hardlimit)
        return ScoreTableSet(self.ctx, space, self.plus1, self.hardlimit, new)


def _draw(logw: np.ndarray, rng: np.random.Generator) -> int | None:
    logw = np.asarray(logw, dtype=float)
    m = logw.max()
    if m == NEG_INF:
        return None
    c = np.cumsum(np.exp(logw - m))
    return min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), len(c) - 1)


def _as_mask(nodes) -> int:
    if isinstance(nodes, (int, np.integer)):
        return int(nodes)
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m


def _node_table(ctx, space, node, plus1, hardlimit) -> NodeTable:
    cand = space.candidates(node)
    if len(cand) > hardlimit:
        raise HardLimitError(node, len(cand), hardlimit, ctx.labels[node])
    others = ()
    if plus1:
        cs = set(cand)
        others = tuple(u for u in range(ctx.n)
                       if u != node and u not in cs and not space.blacklist[u, node])
    return compute_node_table(ctx, node, cand, others)


def build_tables(ctx: ScoreContext, space: SearchSpace, plus1: bool = True,
                 hardlimit: int | None = None) -> ScoreTableSet:
    """Score tables for all ordered nodes of ``ctx`` over ``space``."""
    if space.n != ctx.n:
        raise DataError(f"search space has {space.n} nodes, data has {ctx.n}")
    if hardlimit is None:
        hardlimit = default_hardlimit(plus1)
    tables = {v: _node_table(ctx, space, v, plus1, hardlimit) for v in ctx.ordered_nodes}
    return ScoreTableSet(ctx, space, plus1, hardlimit, tables)


# on-disk cache -------------------------------------------------------------------

def table_key(ctx: ScoreContext, space: SearchSpace, plus1: bool, hardlimit: int) -> str:
    h = hashlib.sha256()
    h.update(f"v{FORMAT_VERSION}".encode())
    h.update(np.ascontiguousarray(ctx.data.values).tobytes())
    if ctx.weights is not None:
        h.update(np.ascontiguousarray(ctx.weights).tobytes())
    h.update(np.ascontiguousarray(ctx.log_penalty).tobytes())
    h.update(json.dumps({**ctx.options(), "plus1": plus1, "hardlimit": hardlimit},
                        sort_keys=True).encode())
    h.update(np.packbits(space.core).tobytes())
    h.update(np.packbits(space.blacklist).tobytes())
    return h.hexdigest()


def save_tables(tables: ScoreTableSet, path) -> None:
    arrays = {
        "version": np.array(FORMAT_VERSION),
        "key": np.array(table_key(tables.ctx, tables.space, tables.plus1, tables.hardlimit)),
    }
    for v, t in tables.tables.items():
        arrays[f"cand_{v}"] = np.array(t.candidates, dtype=np.int64)
        arrays[f"others_{v}"] = np.array(t.others, dtype=np.int64)
        arrays[f"raw_{v}"] = t.raw
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_tables(path, ctx: ScoreContext, space: SearchSpace, plus1: bool,
                hardlimit: int | None = None) -> ScoreTableSet | None:
    """Tables from ``path`` if it matches this configuration, else None."""
    if hardlimit is None:
        hardlimit = default_hardlimit(plus1)
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path) as z:
        if int(z["version"]) != FORMAT_VERSION:
            return None
        if str(z["key"]) != table_key(ctx, space, plus1, hardlimit):
            return None
        tables = {}
        for v in ctx.ordered_nodes:
            tables[v] = NodeTable(v, tuple(int(x) for x in z[f"cand_{v}"]),
                                  tuple(int(x) for x in z[f"others_{v}"]), z[f"raw_{v}"])
    return ScoreTableSet(ctx, space, plus1, hardlimit, tables)


def cached_tables(cache_dir, ctx: ScoreContext, space: SearchSpace, plus1: bool = True,
                  hardlimit: int | None = None) -> ScoreTableSet:
    """Load tables from ``cache_dir`` or build and store them."""
    if hardlimit is None:
        hardlimit = default_hardlimit(plus1)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"tables-{table_key(ctx, space, plus1, hardlimit)[:24]}.npz"
    tables = load_tables(path, ctx, space, plus1, hardlimit)
    if tables is None:
        tables = build_tables(ctx, space, plus1, hardlimit)
        save_tables(tables, path)
    return tables


__all__ = [
    "NodeTable",
    "ScoreTableSet",
    "build_tables",
    "cached_tables",
    "default_hardlimit",
    "load_tables",
    "mask_nodes",
    "save_tables",
    "subset_logsumexp",
    "subset_max",
    "table_key",
]
