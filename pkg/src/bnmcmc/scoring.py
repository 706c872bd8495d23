"""Decomposable local scores (BGe, BDe) and a forward data simulator.

Every local score is a log marginal likelihood term for a node given a
parent set, minus the structure-prior terms collected in
``ScoreContext.log_penalty``.  The total score of a DAG is the sum of its
local scores.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .data import BINARY, CATEGORICAL, CONTINUOUS, Dataset, ScoreContext
from .errors import DataError, GraphError, ScoreError
from .graph import as_adjacency, is_acyclic, topological_order

LOG_PI = math.log(math.pi)


def _lmvgamma(a: float, d: int) -> float:
    """Log multivariate gamma function; zero for d = 0."""
    out = d * (d - 1) / 4.0 * LOG_PI
    for j in range(1, d + 1):
        out += math.lgamma(a + (1 - j) / 2.0)
    return out


class BGeScorer:
    """Gaussian score under a normal-Wishart parameter prior.

    The prior mean is the (weighted) sample mean, so the posterior scale
    matrix is ``T0 + S_N`` with ``T0 = am (aw - n - 1) / (am + 1) * I``.
    The local score is the family difference ``m(Pa + i) - m(Pa)`` of log
    marginal likelihoods of column subsets.
    """

    def __init__(self, X: np.ndarray, weights: np.ndarray | None, am: float, aw: float):
        X = np.asarray(X, dtype=float)
        N, n = X.shape
        w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
        self.n = n
        self.am = am
        self.aw = aw
        self.N = float(w.sum())
        if N:
            mean = w @ X / self.N
            Xc = X - mean
            S = (Xc * w[:, None]).T @ Xc
        else:
            S = np.zeros((n, n))
        if self.N > 1:
            var = np.diag(S) / self.N
            flat = np.flatnonzero(var <= 1e-12 * max(1.0, float(np.max(np.abs(X)) ** 2)))
            if flat.size:
                raise ScoreError(f"columns {flat.tolist()} have zero variance; BGe is degenerate")
        self.t = am * (aw - n - 1) / (am + 1)
        self.R = self.t * np.eye(n) + S
        self.log_t = math.log(self.t)
        # const[p]: every term of the family score for |Pa| = p except the
        # determinant part -1/2 logdet R_PP - (N + aw - n + p + 1)/2 log c
        N_ = self.N
        self.const = np.empty(n)
        for p in range(n):
            a_f = aw - n + p + 1
            a_p = aw - n + p
            self.const[p] = (
                -N_ / 2.0 * LOG_PI
                + 0.5 * math.log(am / (am + N_))
                + _lmvgamma((N_ + a_f) / 2.0, p + 1) - _lmvgamma(a_f / 2.0, p + 1)
                - _lmvgamma((N_ + a_p) / 2.0, p) + _lmvgamma(a_p / 2.0, p)
                + a_f / 2.0 * (p + 1) * self.log_t - a_p / 2.0 * p * self.log_t
            )

    def log_marginal(self, cols: Sequence[int]) -> float:
        """Log marginal likelihood of the data restricted to ``cols``."""
        cols = list(cols)
        l = len(cols)
        if l == 0:
            return 0.0
        a = self.aw - self.n + l
        N_ = self.N
        sign, logdet = np.linalg.slogdet(self.R[np.ix_(cols, cols)])
        if sign <= 0:
            raise ScoreError(f"posterior scale matrix is singular on columns {cols}")
        return (
            -l * N_ / 2.0 * LOG_PI
            + l / 2.0 * math.log(self.am / (self.am + N_))
            + _lmvgamma((N_ + a) / 2.0, l) - _lmvgamma(a / 2.0, l)
            + a / 2.0 * l * self.log_t
            - (N_ + a) / 2.0 * logdet
        )

    def local(self, node: int, parents: Iterable[int]) -> float:
        pa = sorted(parents)
        return self.log_marginal(pa + [node]) - self.log_marginal(pa)

    def batch(self, node: int, P: np.ndarray) -> np.ndarray:
        """Local scores of ``node`` for each row of the (B, p) parent matrix."""
        P = np.asarray(P, dtype=np.int64)
        B, p = P.shape
        R = self.R
        if p == 0:
            c = np.full(B, R[node, node])
            logdet = np.zeros(B)
        else:
            RPP = R[P[:, :, None], P[:, None, :]]
            RPi = R[P, node]
            try:
                L = np.linalg.cholesky(RPP)
            except np.linalg.LinAlgError as exc:
                raise ScoreError(f"singular posterior matrix scoring node {node}") from exc
            logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
            y = np.linalg.solve(L, RPi[:, :, None])[:, :, 0]
            c = R[node, node] - np.einsum("bi,bi->b", y, y)
        if np.any(c <= 0):
            raise ScoreError(f"singular posterior matrix scoring node {node}")
        a_f = self.aw - self.n + p + 1
        return self.const[p] - 0.5 * logdet - (self.N + a_f) / 2.0 * np.log(c)


class BDeScorer:
    """Dirichlet-multinomial score with equivalent sample size ``chi``."""

    def __init__(self, codes: np.ndarray, n_levels: Sequence[int], weights: np.ndarray | None, chi: float):
        self.codes = np.asarray(codes, dtype=np.int64)
        N = self.codes.shape[0]
        self.w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
        self.r = np.asarray(n_levels, dtype=np.int64)
        self.chi = chi

    def counts(self, node: int, parents: Sequence[int]) -> np.ndarray:
        """Weighted counts N_ijk over observed parent configurations (rows)."""
        ri = int(self.r[node])
        x = self.codes[:, node]
        if len(parents) == 0:
            return np.bincount(x, weights=self.w, minlength=ri)[None, :]
        config = np.zeros(len(x), dtype=np.int64)
        span = 1
        for p in parents:
            config = config * self.r[p] + self.codes[:, p]
            span *= int(self.r[p])
        if span * ri <= 1 << 20:
            tab = np.bincount(config * ri + x, weights=self.w, minlength=span * ri)
            tab = tab.reshape(span, ri)
            return tab[tab.sum(axis=1) > 0]
        uniq, inv = np.unique(config, return_inverse=True)
        tab = np.bincount(inv * ri + x, weights=self.w, minlength=len(uniq) * ri)
        return tab.reshape(len(uniq), ri)

    def local(self, node: int, parents: Iterable[int]) -> float:
        pa = list(parents)
        ri = int(self.r[node])
        q = float(np.prod([float(self.r[p]) for p in pa])) if pa else 1.0
        tab = self.counts(node, pa)
        a_j = self.chi / q
        a_jk = self.chi / (ri * q)
        nij = tab.sum(axis=1)
        return float(
            np.sum(gammaln(a_j) - gammaln(a_j + nij))
            + np.sum(gammaln(a_jk + tab) - gammaln(a_jk))
        )

    def batch(self, node: int, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=np.int64)
        return np.array([self.local(node, row) for row in P], dtype=float).reshape(P.shape[0])


def make_scorer(data: Dataset, score_type: str, *, am, aw, chi, weights):
    if score_type == "bge":
        return BGeScorer(data.values, weights, am, aw)
    n_levels = data.n_levels()
    if score_type == "bde":
        n_levels = np.full(data.n_cols, 2)
    return BDeScorer(data.codes(), n_levels, weights, chi)


def local_score(ctx: ScoreContext, node: int, parents: Iterable[int]) -> float:
    """Log local score of ``node`` with ``parents``, prior terms included."""
    pa = sorted(int(p) for p in parents)
    if node in pa:
        raise GraphError(f"node {node} cannot be its own parent")
    if node in ctx.bgnodes:
        raise GraphError(f"background node {node} is never scored")
    if any(p < 0 or p >= ctx.n for p in pa) or not 0 <= node < ctx.n:
        raise GraphError("node index out of range")
    return float(ctx.scorer.local(node, pa)) - float(ctx.log_penalty[pa, node].sum())


def batch_scores(ctx: ScoreContext, node: int, P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.int64)
    out = np.asarray(ctx.scorer.batch(node, P), dtype=float)
    if P.shape[1]:
        out = out - ctx.log_penalty[P, node].sum(axis=1)
    return out


def total_score(ctx: ScoreContext, adj) -> float:
    """Sum of local scores over the ordered (non-background) nodes."""
    a = as_adjacency(adj)
    if a.shape[0] != ctx.n:
        raise GraphError(f"graph has {a.shape[0]} nodes, context has {ctx.n}")
    if not is_acyclic(a):
        raise GraphError("cannot score a cyclic graph")
    for v in ctx.bgnodes:
        if a[:, v].any():
            raise GraphError(f"background node {ctx.labels[v]!r} has parents")
    return sum(local_score(ctx, j, np.flatnonzero(a[:, j])) for j in ctx.ordered_nodes)


def sample_edge_weights(adj, rng: np.random.Generator, low: float = 0.4, high: float = 2.0) -> np.ndarray:
    a = np.asarray(adj).astype(bool)
    mag = rng.uniform(low, high, size=a.shape)
    sign = np.where(rng.random(a.shape) < 0.5, -1.0, 1.0)
    return np.where(a, mag * sign, 0.0)


def sample_cpts(adj, n_levels: Sequence[int], rng: np.random.Generator) -> list[np.ndarray]:
    """One Dirichlet(1)-distributed conditional table per node.

    Table ``j`` has shape (prod of parent levels, r_j); parent
    configurations are indexed with the first parent most significant.
    """
    a = np.asarray(adj).astype(bool)
    out = []
    for j in range(a.shape[0]):
        pa = np.flatnonzero(a[:, j])
        q = int(np.prod([n_levels[p] for p in pa])) if len(pa) else 1
        out.append(rng.dirichlet(np.ones(n_levels[j]), size=q))
    return out


def simulate_data(
    adj,
    model: str,
    N: int,
    rng: np.random.Generator,
    *,
    labels: Sequence[str] | None = None,
    n_levels: int | Sequence[int] = 2,
    edge_weights: np.ndarray | None = None,
    cpts: list[np.ndarray] | None = None,
) -> Dataset:
    """Forward-sample ``N`` rows from a Bayesian network on ``adj``.

    ``model`` is ``"linear-gaussian"`` (unit-variance noise, edge weights
    uniform on +-[0.4, 2] unless given) or ``"categorical-cpt"``
    (conditional tables drawn from a flat Dirichlet unless given).
    """
    a = as_adjacency(adj)
    n = a.shape[0]
    order = topological_order(a)
    if order is None:
        raise GraphError("cannot simulate from a cyclic graph")
    labels = tuple(labels) if labels is not None else tuple(f"X{j + 1}" for j in range(n))
    if model == "linear-gaussian":
        W = sample_edge_weights(a, rng) if edge_weights is None else np.asarray(edge_weights)
        X = np.zeros((N, n))
        noise = rng.standard_normal((N, n))
        for j in order:
            X[:, j] = X @ W[:, j] + noise[:, j]
        return Dataset(X, labels, (CONTINUOUS,) * n, (None,) * n)
    if model == "categorical-cpt":
        r = [int(n_levels)] * n if np.isscalar(n_levels) else [int(x) for x in n_levels]
        tables = sample_cpts(a, r, rng) if cpts is None else cpts
        X = np.zeros((N, n), dtype=np.int64)
        u = rng.random((N, n))
        for j in order:
            pa = np.flatnonzero(a[:, j])
            config = np.zeros(N, dtype=np.int64)
            for p in pa:
                config = config * r[p] + X[:, p]
            cdf = np.cumsum(tables[j][config], axis=1)
            X[:, j] = np.minimum((u[:, j:j + 1] > cdf).sum(axis=1), r[j] - 1)
        kinds = tuple(BINARY if k == 2 else CATEGORICAL for k in r)
        levels = tuple(tuple(str(s) for s in range(k)) for k in r)
        return Dataset(X.astype(float), labels, kinds, levels)
    raise DataError(f"unknown simulation model {model!r}")
