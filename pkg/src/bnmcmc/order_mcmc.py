"""Order MCMC in sampling or maximisation mode."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError
from .graph import order_allowed_masks
from .tables import ScoreTableSet

MODES = ("map", "sample")
DEFAULT_MOVEPROBS = (0.45, 0.45, 0.10)
# c in c * n^2 * ln(n) for the default chain length
LENGTH_FACTOR = {"order": 6.0, "partition": 20.0, "iterative": 3.5}
N_SAVED = 1000


def default_iterations(n: int, kind: str = "order", stepsave: int | None = None) -> tuple[int, int, float]:
    """(iterations, stepsave, unrounded length) for an ``n``-node chain.

    Without an explicit ``stepsave`` the chain length is rounded down to
    ``1000 * stepsave`` so that exactly 1001 states are saved.
    """
    raw = LENGTH_FACTOR[kind] * n * n * math.log(max(n, 1))
    if stepsave is None:
        stepsave = max(1, int(raw // N_SAVED))
        return N_SAVED * stepsave, stepsave, raw
    if stepsave < 1:
        raise DataError("stepsave must be at least 1")
    return int(math.ceil(raw / stepsave)) * stepsave, stepsave, raw


@dataclass
class ChainConfig:
    mode: str = "sample"
    iterations: int | None = None
    stepsave: int | None = None
    moveprobs: Sequence[float] | None = None
    start: object = None
    seed: int | np.random.SeedSequence | None = None
    chainout: bool = True

    def resolve(self, n: int, kind: str, n_moves: int = 3) -> tuple[int, int, tuple[float, ...], dict]:
        """Fill in defaults; returns (iterations, stepsave, moveprobs, meta)."""
        if self.mode not in MODES:
            raise DataError(f"mode must be one of {MODES}")
        meta = {}
        if self.iterations is None:
            it, ss, raw = default_iterations(n, kind, self.stepsave)
            meta["iterations_formula"] = raw
        else:
            it = int(self.iterations)
            if it < 0:
                raise DataError("iterations must be nonnegative")
            ss = self.stepsave if self.stepsave is not None else max(1, it // N_SAVED)
        ss = int(ss)
        if ss < 1:
            raise DataError("stepsave must be at least 1")
        if it and ss > it:
            raise DataError("stepsave cannot exceed iterations")
        if self.moveprobs is None:
            mp = DEFAULT_MOVEPROBS if n_moves == 3 else (1.0 / n_moves,) * n_moves
        else:
            mp = tuple(float(x) for x in self.moveprobs)
            if len(mp) != n_moves or min(mp) < 0 or abs(sum(mp) - 1.0) > 1e-9:
                raise DataError(f"moveprobs must be {n_moves} nonnegative numbers summing to 1")
        meta.update(iterations=it, stepsave=ss, moveprobs=list(mp))
        return it, ss, mp, meta


@dataclass
class ChainResult:
    kind: str
    mode: str
    trace: np.ndarray
    state_trace: np.ndarray
    dags: np.ndarray | None
    max_dag: np.ndarray
    max_score: float
    best_state: object
    final_state: object
    info: dict = field(default_factory=dict)

    @property
    def n_saved(self) -> int:
        return len(self.trace)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def order_score(tables: ScoreTableSet, order: Sequence[int], mode: str = "sample") -> float:
    """Log score of an order: summed (or maximised) over compatible DAGs."""
    _check_order(tables, order)
    use_max = mode == "map"
    masks = order_allowed_masks(order, tables.bg_mask)
    return float(sum(tables.term(v, masks[k], use_max) for k, v in enumerate(order)))


def _check_order(tables: ScoreTableSet, order) -> None:
    if sorted(order) != list(tables.nodes):
        raise DataError("order must be a permutation of the non-background nodes")


def order_dag(tables: ScoreTableSet, order: Sequence[int], mode: str,
              rng: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
    """Best (map) or sampled DAG compatible with ``order`` and its score."""
    adj = np.zeros((tables.n, tables.n), dtype=bool)
    masks = order_allowed_masks(order, tables.bg_mask)
    total = 0.0
    for k, v in enumerate(order):
        if mode == "map":
            s, pa = tables.restricted_max(v, masks[k])
        else:
            pa = tables.sample_parents(v, masks[k], rng)
            s = tables.entry(v, pa)
        adj[list(pa), v] = True
        total += s
    return adj, total


class _OrderState:
    def __init__(self, tables: ScoreTableSet, order, use_max: bool):
        self.t = tables
        self.use_max = use_max
        self.order = list(order)
        self.masks = order_allowed_masks(self.order, tables.bg_mask)
        self.terms = [tables.term(v, self.masks[k], use_max) for k, v in enumerate(self.order)]
        self.score = math.fsum(self.terms)

    def refresh_score(self):
        self.score = math.fsum(self.terms)

    def local_swap(self, rng) -> bool:
        m = len(self.order)
        k = int(rng.integers(m - 1))
        return self._swap(k, k + 1, rng)

    def global_swap(self, rng) -> bool:
        m = len(self.order)
        i, j = sorted(rng.choice(m, 2, replace=False).tolist())
        return self._swap(i, j, rng)

    def _swap(self, i: int, j: int, rng) -> bool:
        o, t = self.order, self.t
        new = o[:]
        new[i], new[j] = new[j], new[i]
        masks = self.masks[:]
        terms = []
        acc = masks[j]
        for k in range(j, i - 1, -1):
            masks[k] = acc
            terms.append(t.term(new[k], acc, self.use_max))
            acc |= 1 << new[k]
        terms.reverse()
        delta = math.fsum(terms) - math.fsum(self.terms[i:j + 1])
        if delta >= 0 or math.log(rng.random()) < delta:
            self.order = new
            self.masks = masks
            self.terms[i:j + 1] = terms
            self.refresh_score()
            return True
        return False

    def relocate(self, rng) -> bool:
        """Remove one node and reinsert it at a position drawn in proportion
        to the score of each resulting order."""
        o, t, um = self.order, self.t, self.use_max
        m = len(o)
        i = int(rng.integers(m))
        x = o[i]
        rest = o[:i] + o[i + 1:]
        bx = 1 << x
        # suffix[s]: admissible parents for rest[s] when x comes earlier
        suffix = order_allowed_masks(rest, t.bg_mask)
        with_x = np.array([t.term(v, suffix[s] | bx, um) for s, v in enumerate(rest)])
        without_x = np.array([t.term(v, suffix[s], um) for s, v in enumerate(rest)])
        # x at position q sees rest[q:], i.e. suffix[q] plus rest[q]
        x_terms = np.empty(m)
        for q in range(m):
            x_terms[q] = t.term(x, (suffix[q] | (1 << rest[q])) if q < m - 1 else t.bg_mask, um)
        pre = np.concatenate([[0.0], np.cumsum(with_x)])
        post = np.concatenate([np.cumsum(without_x[::-1])[::-1], [0.0]])
        total = pre + post + x_terms
        w = np.exp(total - total.max())
        c = np.cumsum(w)
        q = min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), m - 1)
        if q == i:
            return True
        self.order = rest[:q] + [x] + rest[q:]
        self.masks = order_allowed_masks(self.order, t.bg_mask)
        self.terms = [t.term(v, self.masks[k], um) for k, v in enumerate(self.order)]
        self.refresh_score()
        return True


def run_order_chain(tables: ScoreTableSet, cfg: ChainConfig | None = None) -> ChainResult:
    """Run one order chain.

    In ``map`` mode each saved state records the order maximum and its
    highest-scoring DAG; in ``sample`` mode a DAG is drawn from the order's
    compatible family and its score recorded.
    """
    cfg = cfg or ChainConfig()
    m = len(tables.nodes)
    iterations, stepsave, moveprobs, meta = cfg.resolve(m, "order")
    rng = _rng(cfg.seed)
    use_max = cfg.mode == "map"
    if cfg.start is None:
        start = [int(tables.nodes[i]) for i in rng.permutation(m)]
    else:
        start = [int(v) for v in cfg.start]
        _check_order(tables, start)
    st = _OrderState(tables, start, use_max)

    n_save = iterations // stepsave + 1
    trace = np.empty(n_save)
    otrace = np.empty(n_save)
    dags = np.zeros((n_save, tables.n, tables.n), dtype=bool) if cfg.chainout else None
    best = (-math.inf, None, None)
    accepted = np.zeros(3, dtype=np.int64)
    proposed = np.zeros(3, dtype=np.int64)
    cum = np.cumsum(moveprobs)

    def save(idx):
        nonlocal best
        adj, s = order_dag(tables, st.order, cfg.mode, rng)
        trace[idx] = st.score if use_max else s
        otrace[idx] = st.score
        if dags is not None:
            dags[idx] = adj
        if s > best[0]:
            best = (s, adj, tuple(st.order))

    save(0)
    for it in range(1, iterations + 1):
        if m > 1:
            move = min(int(np.searchsorted(cum, rng.random(), side="right")), 2)
            proposed[move] += 1
            if move == 0:
                ok = st.local_swap(rng)
            elif move == 1:
                ok = st.global_swap(rng)
            else:
                ok = st.relocate(rng)
            accepted[move] += ok
        if it % stepsave == 0:
            save(it // stepsave)

    meta.update(kind="order", mode=cfg.mode, proposed=proposed.tolist(), accepted=accepted.tolist(),
                space_edges=tables.space.n_edges(), plus1=tables.plus1)
    return ChainResult("order", cfg.mode, trace, otrace, dags, best[1], float(best[0]),
                       best[2], tuple(st.order), meta)
