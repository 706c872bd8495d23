"""First-order homogeneous dynamic Bayesian networks.

Input data has ``b`` static columns followed by ``T`` groups of ``n``
dynamic columns, one group per time point.  The transition model is learned
on stacked pairs of consecutive slices, with the static and lagged columns
as background nodes, so they never receive parents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .data import Dataset, DbnLayout, build_score_context
from .errors import DataError, GraphError
from .graph import as_adjacency, is_acyclic
from .learn import LearnResult, learn
from .scoring import sample_cpts, sample_edge_weights, simulate_data

LAG = "lag."


def _dynamic_names(data: Dataset, layout: DbnLayout) -> list[str]:
    b, n = layout.n_static, layout.n_dynamic
    names = list(data.labels[b:b + n])
    stripped = [re.sub(r"\.1$", "", s) for s in names]
    if all(s != t for s, t in zip(stripped, names)) and len(set(stripped)) == n:
        return stripped
    return names


def _check_width(data: Dataset, layout: DbnLayout) -> None:
    if data.n_cols != layout.width:
        raise DataError(f"DBN layout expects {layout.width} columns (b + n*T), data has {data.n_cols}")


def transition_index_map(layout: DbnLayout, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Source (row, column) in the wide table for every cell of the stacked
    transition table; both arrays have the transition table's shape."""
    b, n, T = layout.n_static, layout.n_dynamic, layout.slices
    rows = np.empty((n_rows * (T - 1), b + 2 * n), dtype=np.int64)
    cols = np.empty_like(rows)
    for t in range(2, T + 1):
        block = slice((t - 2) * n_rows, (t - 1) * n_rows)
        src_cols = (list(range(b))
                    + [b + (t - 2) * n + k for k in range(n)]
                    + [b + (t - 1) * n + k for k in range(n)])
        rows[block] = np.arange(n_rows)[:, None]
        cols[block] = np.array(src_cols)[None, :]
    return rows, cols


def reshape_transition(data: Dataset, layout: DbnLayout) -> Dataset:
    """Stack consecutive slices into [statics | slice t-1 | slice t] rows, t = 2..T."""
    _check_width(data, layout)
    b = layout.n_static
    r, c = transition_index_map(layout, data.n_rows)
    values = data.values[r, c] if data.n_rows else np.zeros((0, b + 2 * layout.n_dynamic))
    names = _dynamic_names(data, layout)
    labels = list(data.labels[:b]) + [LAG + s for s in names] + names
    src = list(range(b)) + [b + k for k in range(layout.n_dynamic)] * 2
    kinds = [data.kinds[j] for j in src]
    levels = [data.levels[j] for j in src]
    return Dataset(values, tuple(labels), tuple(kinds), tuple(levels))


def first_slice(data: Dataset, layout: DbnLayout) -> Dataset:
    _check_width(data, layout)
    b, n = layout.n_static, layout.n_dynamic
    return data.select(list(range(b + n)), list(data.labels[:b]) + _dynamic_names(data, layout))


@dataclass
class DbnStructure:
    """Initial graph over [statics | slice 1] and transition graph over
    [statics | lagged slice | current slice]."""

    initial: np.ndarray
    transition: np.ndarray
    layout: DbnLayout
    static_labels: tuple[str, ...]
    dynamic_labels: tuple[str, ...]

    def __post_init__(self):
        b, n = self.layout.n_static, self.layout.n_dynamic
        self.initial = as_adjacency(self.initial)
        self.transition = as_adjacency(self.transition)
        if self.initial.shape[0] != b + n or self.transition.shape[0] != b + 2 * n:
            raise GraphError("graph sizes do not match the DBN layout")
        if self.transition[:, :b + n].any():
            raise GraphError("static and lagged nodes cannot have parents in the transition graph")
        if self.initial[:, :b].any():
            raise GraphError("static nodes cannot have parents in the initial graph")
        if not (is_acyclic(self.initial) and is_acyclic(self.transition)):
            raise GraphError("DBN graphs must be acyclic")

    @property
    def transition_labels(self) -> tuple[str, ...]:
        return self.static_labels + tuple(LAG + s for s in self.dynamic_labels) + self.dynamic_labels

    @property
    def initial_labels(self) -> tuple[str, ...]:
        return self.static_labels + self.dynamic_labels

    def unrolled(self, slices: int | None = None) -> np.ndarray:
        """DAG over the wide layout: statics then one group per slice."""
        T = slices or self.layout.slices
        b, n = self.layout.n_static, self.layout.n_dynamic
        out = np.zeros((b + n * T, b + n * T), dtype=bool)
        out[:b + n, :b + n] = self.initial
        for t in range(2, T + 1):
            idx = np.array(list(range(b)) + [b + (t - 2) * n + k for k in range(n)]
                           + [b + (t - 1) * n + k for k in range(n)])
            cur = idx[b + n:]
            out[np.ix_(idx, cur)] |= self.transition[:, b + n:]
        return out


def initial_from_transition(transition, layout: DbnLayout) -> np.ndarray:
    """Initial graph sharing the transition's within-slice and static edges."""
    b, n = layout.n_static, layout.n_dynamic
    tr = as_adjacency(transition)
    keep = list(range(b)) + list(range(b + n, b + 2 * n))
    return tr[np.ix_(keep, keep)].copy()


def random_dbn(layout: DbnLayout, avg_parents: float, rng: np.random.Generator,
               static_labels=None, dynamic_labels=None) -> DbnStructure:
    """Random DBN: each candidate edge into a dynamic node is drawn with a
    probability that gives roughly ``avg_parents`` parents per node."""
    b, n = layout.n_static, layout.n_dynamic
    m = b + 2 * n
    tr = np.zeros((m, m), dtype=bool)
    order = rng.permutation(n)
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    n_cand = b + n + (n - 1) / 2
    prob = min(1.0, avg_parents / max(n_cand, 1))
    for k in range(n):
        j = b + n + k
        for i in range(b + n):
            tr[i, j] = rng.random() < prob
        for k2 in range(n):
            if pos[k2] > pos[k]:
                tr[b + n + k2, j] = rng.random() < prob
    if layout.samestruct:
        init = initial_from_transition(tr, layout)
    else:
        init = np.zeros((b + n, b + n), dtype=bool)
        for k in range(n):
            for i in range(b):
                init[i, b + k] = rng.random() < prob
            for k2 in range(n):
                if pos[k2] > pos[k]:
                    init[b + k2, b + k] = rng.random() < prob
    sl = tuple(static_labels) if static_labels is not None else tuple(f"S{k + 1}" for k in range(b))
    dl = tuple(dynamic_labels) if dynamic_labels is not None else tuple(f"X{k + 1}" for k in range(n))
    return DbnStructure(init, tr, layout, sl, dl)


def simulate_dbn(structure: DbnStructure, model: str, N: int, rng: np.random.Generator,
                 n_levels: int = 2) -> Dataset:
    """Forward-sample ``N`` rows in the wide layout, with parameters shared
    across time points."""
    lay = structure.layout
    b, n, T = lay.n_static, lay.n_dynamic, lay.slices
    big = structure.unrolled()
    width = b + n * T
    labels = list(structure.static_labels) + [f"{s}.{t}" for t in range(1, T + 1)
                                              for s in structure.dynamic_labels]
    if model == "linear-gaussian":
        W0 = sample_edge_weights(structure.initial, rng)
        Wt = sample_edge_weights(structure.transition, rng)
        W = np.zeros((width, width))
        W[:b + n, :b + n] = W0
        for t in range(2, T + 1):
            idx = np.array(list(range(b)) + [b + (t - 2) * n + k for k in range(n)]
                           + [b + (t - 1) * n + k for k in range(n)])
            W[np.ix_(idx, idx[b + n:])] = Wt[:, b + n:]
        return simulate_data(big, model, N, rng, labels=labels, edge_weights=W)
    if model == "categorical-cpt":
        r0 = [n_levels] * (b + n)
        rt = [n_levels] * (b + 2 * n)
        c0 = sample_cpts(structure.initial, r0, rng)
        ct = sample_cpts(structure.transition, rt, rng)
        # parents keep their relative index order when mapped into the wide
        # layout, so each transition table applies unchanged
        cpts = list(c0) + [ct[b + n + k] for t in range(2, T + 1) for k in range(n)]
        return simulate_data(big, model, N, rng, labels=labels, n_levels=n_levels, cpts=cpts)
    raise DataError(f"unknown simulation model {model!r}")


@dataclass
class DbnResult:
    structure: DbnStructure
    transition: LearnResult
    initial: LearnResult | None


def learn_dbn(data: Dataset, layout: DbnLayout, method: str = "order", mode: str = "sample",
              score_type: str | None = None, score_options: dict | None = None,
              seed=None, **learn_options) -> DbnResult:
    """Learn initial and transition structures from wide-layout data."""
    _check_width(data, layout)
    opts = dict(score_options or {})
    b, n = layout.n_static, layout.n_dynamic
    trans = reshape_transition(data, layout)
    ctx = build_score_context(trans, score_type, bgnodes=tuple(range(b + n)), **opts)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_trans, s_init = ss.spawn(2)
    res = learn(ctx, method, mode, seed=s_trans, **learn_options)
    names = tuple(_dynamic_names(data, layout))
    if layout.samestruct:
        init = initial_from_transition(res.max_dag, layout)
        init_res = None
    else:
        d1 = first_slice(data, layout)
        ctx0 = build_score_context(d1, score_type, bgnodes=tuple(range(b)), **opts)
        init_res = learn(ctx0, method, mode, seed=s_init, **learn_options)
        init = init_res.max_dag
    structure = DbnStructure(init, res.max_dag, layout, tuple(data.labels[:b]), names)
    return DbnResult(structure, res, init_res)


__all__ = [
    "DbnResult",
    "DbnStructure",
    "LAG",
    "first_slice",
    "initial_from_transition",
    "learn_dbn",
    "random_dbn",
    "reshape_transition",
    "simulate_dbn",
    "transition_index_map",
]
