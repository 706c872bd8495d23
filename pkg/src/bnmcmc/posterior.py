"""Model averaging, consensus graphs, diagnostics and comparison with a truth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError, GraphError
from .graph import as_adjacency, dag_to_cpdag, is_dag

DEFAULT_BURNIN = 0.2
DEFAULT_HIGHLIGHT = 0.3
DEFAULT_CUTOFF = 0.2
METRIC_COLUMNS = ["TP", "FP", "FN", "TPR", "FPR", "FPRn", "FDR", "SHD"]


def as_sample(sample) -> np.ndarray:
    """Stack a chain result, list of graphs or array into an (M, n, n) bool array."""
    dags = getattr(sample, "dags", sample)
    if dags is None:
        raise DataError("chain was run without keeping its sampled graphs")
    arr = np.asarray(dags).astype(bool)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DataError(f"sample must have shape (M, n, n), got {arr.shape}")
    return arr


def burn(sample, burnin: float = DEFAULT_BURNIN) -> np.ndarray:
    arr = as_sample(sample)
    if not 0 <= burnin < 1:
        raise DataError("burnin must lie in [0, 1)")
    kept = arr[int(math.floor(burnin * len(arr))):]
    if len(kept) == 0:
        raise DataError("no graphs left after burn-in")
    return kept


def edge_posterior(sample, pdag: bool = False, burnin: float = DEFAULT_BURNIN) -> np.ndarray:
    """Fraction of kept graphs containing each directed edge.

    With ``pdag`` every graph is first replaced by its CPDAG, so an
    undirected edge counts in both directions.
    """
    kept = burn(sample, burnin)
    if pdag:
        kept = np.stack([dag_to_cpdag(g) for g in kept])
    return kept.mean(axis=0)


def consensus_model(post, p: float = 0.5) -> np.ndarray:
    """Edges with posterior probability strictly above ``p``; may be cyclic."""
    if not 0 < p < 1:
        raise DataError("threshold must lie in (0, 1)")
    return np.asarray(post, float) > p


def edge_posterior_trace(sample, cutoff: float = DEFAULT_CUTOFF, labels=None) -> pd.DataFrame:
    """Running posterior of each edge whose running mean ever exceeds ``cutoff``.

    One row per saved graph, one column per edge named ``from->to``.
    """
    arr = as_sample(sample).astype(float)
    M, n, _ = arr.shape
    running = np.cumsum(arr, axis=0) / np.arange(1, M + 1)[:, None, None]
    keep = np.argwhere((running > cutoff).any(axis=0))
    labels = _labels(labels, n)
    cols = {f"{labels[i]}->{labels[j]}": running[:, i, j] for i, j in keep}
    return pd.DataFrame(cols, index=pd.RangeIndex(M, name="step"))


@dataclass
class Concordance:
    table: pd.DataFrame
    max_diff: float
    n_flagged: int
    highlight: float


def concordance(post_a, post_b, highlight: float = DEFAULT_HIGHLIGHT, labels=None) -> Concordance:
    """Pairwise comparison of two edge-posterior matrices."""
    a, b = np.asarray(post_a, float), np.asarray(post_b, float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"posterior matrices differ in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    labels = _labels(labels, n)
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    diff = np.abs(a[i, j] - b[i, j])
    table = pd.DataFrame({
        "from": [labels[k] for k in i],
        "to": [labels[k] for k in j],
        "pA": a[i, j],
        "pB": b[i, j],
        "flag": diff > highlight,
    })
    return Concordance(table, float(diff.max()) if len(diff) else 0.0,
                       int((diff > highlight).sum()), highlight)


def _labels(labels, n):
    if labels is None:
        return [f"X{k + 1}" for k in range(n)]
    if len(labels) != n:
        raise DataError(f"expected {n} labels, got {len(labels)}")
    return list(labels)


def _as_graph(g) -> np.ndarray:
    return as_adjacency(g)


def compare_dags(estimate, truth, as_cpdag: bool = False) -> dict:
    """Skeleton-based TP/FP/FN rates plus structural Hamming distance.

    SHD counts every unordered node pair whose edge differs in presence or
    orientation (an undirected edge is its own orientation).  With
    ``as_cpdag`` DAG inputs are replaced by their CPDAGs first; inputs that
    are not DAGs are compared as given.
    """
    est, tru = _as_graph(estimate), _as_graph(truth)
    if est.shape != tru.shape:
        raise GraphError(f"graphs differ in size: {est.shape[0]} vs {tru.shape[0]} nodes")
    if as_cpdag:
        if is_dag(est):
            est = dag_to_cpdag(est)
        if is_dag(tru):
            tru = dag_to_cpdag(tru)
    n = est.shape[0]
    iu = np.triu_indices(n, 1)
    se, st = (est | est.T)[iu], (tru | tru.T)[iu]
    tp = int((se & st).sum())
    fp = int((se & ~st).sum())
    fn = int((~se & st).sum())
    n_true = int(st.sum())
    neg = n * (n - 1) // 2 - n_true
    shd = int(((est[iu] != tru[iu]) | (est.T[iu] != tru.T[iu])).sum())
    return {
        "TP": tp,
        "FP": fp,
        "FN": fn,
        "TPR": tp / n_true if n_true else 0.0,
        "FPR": fp / neg if neg else 0.0,
        "FPRn": fp / n_true if n_true else 0.0,
        "FDR": fp / (tp + fp) if tp + fp else 0.0,
        "SHD": shd,
    }


def samplecomp(sample, truth, thresholds: Sequence[float] = (0.5, 0.7, 0.9, 0.95),
               pdag: bool = True, burnin: float = DEFAULT_BURNIN) -> pd.DataFrame:
    """Consensus graphs at several thresholds compared with ``truth``."""
    post = edge_posterior(sample, pdag=pdag, burnin=burnin)
    rows = []
    for p in thresholds:
        m = compare_dags(consensus_model(post, p), truth, as_cpdag=pdag)
        m["p"] = p
        rows.append(m)
    return pd.DataFrame(rows, columns=METRIC_COLUMNS + ["p"])


__all__ = [
    "Concordance",
    "METRIC_COLUMNS",
    "as_sample",
    "compare_dags",
    "concordance",
    "consensus_model",
    "edge_posterior",
    "edge_posterior_trace",
    "samplecomp",
]
