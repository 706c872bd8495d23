"""Core search spaces: PC-stable skeletons, user matrices and merging."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np
from scipy.special import ndtr
from scipy.stats import chi2

from .data import BINARY, CATEGORICAL, CONTINUOUS, ScoreContext
from .errors import DataError, GraphError
from .graph import dag_to_cpdag, skeleton

log = logging.getLogger(__name__)

MERGE_MODES = ("dag", "cpdag", "skeleton")


@dataclass(frozen=True, eq=False)
class SearchSpace:
    """Candidate parents: ``core[i, j]`` allows ``i`` as a parent of ``j``."""

    core: np.ndarray
    blacklist: np.ndarray
    hardlimit: int
    bgnodes: tuple[int, ...] = ()
    origin: str = "matrix"
    warnings: tuple[str, ...] = field(default=(), compare=False)
    saturated: tuple[int, ...] = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return self.core.shape[0]

    def candidates(self, j: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.core[:, j]))

    def n_edges(self) -> int:
        """Undirected pairs count once."""
        c = self.core
        return int(c.sum() - (c & c.T).sum() // 2)

    def max_parents(self) -> int:
        return int(self.core.sum(axis=0).max()) if self.n else 0


def _clean(core: np.ndarray, blacklist: np.ndarray, bgnodes) -> np.ndarray:
    core = core & ~blacklist
    np.fill_diagonal(core, False)
    for v in bgnodes:
        core[:, v] = False
    return core


def _square(mat, n: int | None, what: str) -> np.ndarray:
    m = np.asarray(mat)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (n is not None and m.shape[0] != n):
        raise GraphError(f"{what} must be {n}x{n}, got shape {m.shape}")
    return m.astype(bool)


def from_adjacency(matrix, blacklist=None, ctx: ScoreContext | None = None, *,
                   bgnodes=(), hardlimit: int = 20) -> SearchSpace:
    """Search space from a user matrix (symmetric entries allowed).

    Blacklisted entries and edges into background nodes are dropped.  Nodes
    above ``hardlimit`` are left as given; building score tables on such a
    space raises :class:`HardLimitError`.
    """
    n = ctx.n if ctx is not None else None
    core = _square(matrix, n, "start space").copy()
    n = core.shape[0]
    bl = np.zeros((n, n), bool) if blacklist is None else _square(blacklist, n, "blacklist")
    bg = tuple(ctx.bgnodes) if ctx is not None else tuple(bgnodes)
    core = _clean(core, bl, bg)
    return SearchSpace(core, bl.copy(), int(hardlimit), bg, origin="matrix")


def full_space(n: int, bgnodes=(), blacklist=None, hardlimit: int = 20) -> SearchSpace:
    core = ~np.eye(n, dtype=bool)
    return from_adjacency(core, blacklist, bgnodes=bgnodes, hardlimit=hardlimit)


def merge_space(space: SearchSpace, g, mode: str = "dag") -> SearchSpace:
    """Union of the core space with ``g`` (as DAG, CPDAG or skeleton).

    A node whose candidate set would grow beyond the hard limit keeps its
    previous candidates and is reported in ``saturated``.
    """
    if mode not in MERGE_MODES:
        raise DataError(f"merge mode must be one of {MERGE_MODES}")
    a = _square(g, space.n, "merged graph")
    if mode == "cpdag":
        a = dag_to_cpdag(a)
    elif mode == "skeleton":
        a = skeleton(a)
    new = _clean(space.core | a, space.blacklist, space.bgnodes)
    saturated = []
    for j in range(space.n):
        if new[:, j].sum() > space.hardlimit and new[:, j].sum() > space.core[:, j].sum():
            new[:, j] = space.core[:, j]
            saturated.append(j)
    return replace(space, core=new, saturated=tuple(saturated))


# conditional independence tests ------------------------------------------------

class FisherZ:
    """Partial-correlation test on (weighted) Gaussian data."""

    def __init__(self, X: np.ndarray, w: np.ndarray | None):
        N = X.shape[0]
        w = np.ones(N) if w is None else w
        self.n_eff = float(w.sum())
        mean = w @ X / self.n_eff
        Xc = X - mean
        cov = (Xc * w[:, None]).T @ Xc / self.n_eff
        sd = np.sqrt(np.diag(cov))
        sd[sd == 0] = 1.0
        self.corr = cov / np.outer(sd, sd)
        self.warnings: list[str] = []

    def pvalue(self, x: int, y: int, S: tuple[int, ...]) -> float:
        dof = self.n_eff - len(S) - 3
        if dof <= 0:
            self.warnings.append(f"fisher-z: too few observations for |S|={len(S)}")
            return 1.0
        if S:
            idx = [x, y, *S]
            P = np.linalg.pinv(self.corr[np.ix_(idx, idx)])
            denom = math.sqrt(abs(P[0, 0] * P[1, 1]))
            r = -P[0, 1] / denom if denom > 0 else 0.0
        else:
            r = self.corr[x, y]
        r = min(max(r, -1.0), 1.0)
        if abs(r) >= 1.0 - 1e-15:
            return 0.0
        z = math.sqrt(dof) * math.atanh(r)
        return float(2.0 * ndtr(-abs(z)))


class GSquare:
    """G^2 likelihood-ratio test on (weighted) discrete data."""

    def __init__(self, codes: np.ndarray, n_levels: np.ndarray, w: np.ndarray | None):
        self.codes = codes.astype(np.int64)
        self.r = n_levels.astype(np.int64)
        self.w = np.ones(codes.shape[0]) if w is None else w
        self.warnings: list[str] = []

    def pvalue(self, x: int, y: int, S: tuple[int, ...]) -> float:
        rx, ry = int(self.r[x]), int(self.r[y])
        z = np.zeros(self.codes.shape[0], dtype=np.int64)
        rz = 1
        for s in S:
            z = z * self.r[s] + self.codes[:, s]
            rz *= int(self.r[s])
        df = (rx - 1) * (ry - 1) * rz
        if df <= 0:
            self.warnings.append(f"g-square: no degrees of freedom for ({x},{y}|{S})")
            return 1.0
        uz, zi = np.unique(z, return_inverse=True)
        key = (zi * rx + self.codes[:, x]) * ry + self.codes[:, y]
        O = np.bincount(key, weights=self.w, minlength=len(uz) * rx * ry).reshape(len(uz), rx, ry)
        nz = O.sum(axis=(1, 2), keepdims=True)
        E = O.sum(axis=2, keepdims=True) * O.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            E = np.where(nz > 0, E / nz, 0.0)
            terms = np.where(O > 0, O * np.log(O / E), 0.0)
        g2 = 2.0 * float(terms.sum())
        return float(chi2.sf(g2, df))


def ci_test_for(ctx: ScoreContext):
    kinds = set(ctx.data.kinds)
    if kinds <= {CONTINUOUS}:
        return FisherZ(ctx.data.values, ctx.weights)
    if kinds <= {BINARY, CATEGORICAL}:
        levels = ctx.data.n_levels()
        if ctx.score_type == "bde":
            levels = np.full(ctx.n, 2)
        return GSquare(ctx.data.codes(), levels, ctx.weights)
    raise DataError("PC skeleton needs all-continuous or all-discrete data")


def pc_skeleton(ctx: ScoreContext, alpha: float = 0.05, *, max_level: int = 3,
                hardlimit: int = 20, blacklist=None) -> SearchSpace:
    """Order-independent (stable) PC skeleton used as core search space.

    Adjacency sets are frozen at the start of each conditioning level, so
    the result does not depend on the order in which pairs are tested.
    Nodes left with more than ``hardlimit`` neighbours keep the ones with
    the smallest worst-case p-value.
    """
    if not 0 < alpha < 1:
        raise DataError("alpha must lie in (0, 1)")
    n = ctx.n
    test = ci_test_for(ctx)
    adj = ~np.eye(n, dtype=bool)
    worst_p = np.zeros((n, n))
    level_cap = min(max_level, hardlimit)
    level = 0
    while level <= level_cap:
        nbrs = [tuple(int(v) for v in np.flatnonzero(adj[x])) for x in range(n)]
        if all(len(nb) - 1 < level for nb in nbrs):
            break
        remove = []
        for x in range(n):
            for y in nbrs[x]:
                if y <= x:
                    continue
                seen = set()
                drop = False
                for side in (x, y):
                    other = y if side == x else x
                    pool = [v for v in nbrs[side] if v != other]
                    for S in combinations(pool, level):
                        if S in seen:
                            continue
                        seen.add(S)
                        p = test.pvalue(x, y, S)
                        worst_p[x, y] = worst_p[y, x] = max(worst_p[x, y], p)
                        if p > alpha:
                            drop = True
                            break
                    if drop:
                        break
                if drop:
                    remove.append((x, y))
        for x, y in remove:
            adj[x, y] = adj[y, x] = False
        level += 1

    bl = np.zeros((n, n), bool) if blacklist is None else _square(blacklist, n, "blacklist")
    core = _clean(adj, bl, ctx.bgnodes)
    for j in range(n):
        cand = np.flatnonzero(core[:, j])
        if len(cand) > hardlimit:
            keep = sorted(cand, key=lambda i: (worst_p[i, j], i))[:hardlimit]
            core[:, j] = False
            core[keep, j] = True
    warnings = tuple(dict.fromkeys(test.warnings))
    for msg in warnings:
        log.warning(msg)
    return SearchSpace(core, bl.copy(), int(hardlimit), tuple(ctx.bgnodes),
                       origin="pc", warnings=warnings)
