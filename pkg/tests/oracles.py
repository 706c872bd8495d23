"""Independent brute-force reference implementations used by the tests.

Nothing here imports the package's graph or scoring code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import gammaln


def has_cycle(adj) -> bool:
    a = np.asarray(adj, bool)
    n = a.shape[0]
    state = [0] * n

    def dfs(v):
        state[v] = 1
        for c in range(n):
            if a[v, c]:
                if state[c] == 1 or (state[c] == 0 and dfs(c)):
                    return True
        state[v] = 2
        return False

    return any(state[v] == 0 and dfs(v) for v in range(n))


def all_dags(n: int):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    out = []
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        a = np.zeros((n, n), bool)
        for (i, j), b in zip(pairs, bits):
            if b:
                a[i, j] = True
        if not has_cycle(a):
            out.append(a)
    return out


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in set_partitions(rest):
        for k in range(len(sub)):
            yield sub[:k] + [[first] + sub[k]] + sub[k + 1:]
        yield [[first]] + sub


def labelled_partitions(nodes):
    """Every ordered sequence of nonempty disjoint parts covering ``nodes``."""
    seen = set()
    for sp in set_partitions(nodes):
        for perm in itertools.permutations(sp):
            key = tuple(tuple(sorted(p)) for p in perm)
            if key not in seen:
                seen.add(key)
                yield [list(p) for p in key]


def fits_order(adj, order) -> bool:
    pos = {v: k for k, v in enumerate(order)}
    return all(pos[i] > pos[j] for i, j in zip(*np.nonzero(adj)))


def fits_partition(adj, parts) -> bool:
    where = {v: j for j, p in enumerate(parts) for v in p}
    last = len(parts) - 1
    for v, j in where.items():
        pj = [where[u] for u in np.flatnonzero(adj[:, v])]
        if j == last:
            if pj:
                return False
        elif not pj or min(pj) <= j or (j + 1) not in pj:
            return False
    return True


def linear_extensions(adj) -> int:
    n = adj.shape[0]
    return sum(fits_order(adj, o) for o in itertools.permutations(range(n)))


def bge_local(X, node, parents, am=1.0, aw=None):
    """BGe local score as a ratio of marginal likelihoods, each evaluated as
    a product of sequential multivariate-t predictive densities under the
    normal-Wishart prior (mean prior at the sample mean)."""
    N, n = X.shape
    aw = n + am + 1.0 if aw is None else aw
    t = am * (aw - n - 1) / (am + 1)
    nu0 = X.mean(axis=0)

    def logm(cols):
        cols = list(cols)
        l = len(cols)
        if l == 0:
            return 0.0
        Y = X[:, cols]
        nu = nu0[cols].copy()
        T = t * np.eye(l)
        a_m, a_w = am, aw - n + l
        total = 0.0
        for x in Y:
            d = a_w - l + 1
            S = T * (a_m + 1) / (a_m * d)
            r = x - nu
            total += (gammaln((d + l) / 2) - gammaln(d / 2) - (l / 2) * math.log(d * math.pi)
                      - 0.5 * np.linalg.slogdet(S)[1]
                      - ((d + l) / 2) * math.log1p(r @ np.linalg.solve(S, r) / d))
            T = T + (a_m / (a_m + 1)) * np.outer(r, r)
            nu = (a_m * nu + x) / (a_m + 1)
            a_m += 1
            a_w += 1
        return total

    pa = sorted(parents)
    return logm(pa + [node]) - logm(pa)


def bde_local(codes, levels, node, parents, chi=0.5, edgepf=1.0):
    """BDe local score by explicit per-configuration counting."""
    r = levels[node]
    configs = list(itertools.product(*[range(levels[p]) for p in parents]))
    q = len(configs)
    total = 0.0
    for cfg in configs:
        rows = np.ones(codes.shape[0], bool)
        for p, c in zip(parents, cfg):
            rows &= codes[:, p] == c
        nij = rows.sum()
        total += gammaln(chi / q) - gammaln(chi / q + nij)
        for k in range(r):
            nijk = (rows & (codes[:, node] == k)).sum()
            total += gammaln(chi / (r * q) + nijk) - gammaln(chi / (r * q))
    return total - len(parents) * math.log(edgepf)


def cpdag(adj):
    """CPDAG by brute force: an edge stays directed iff every DAG in the
    equivalence class (same skeleton and v-structures) orients it that way."""
    a = np.asarray(adj, bool)
    n = a.shape[0]
    skel = a | a.T
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if skel[i, j]]

    def vstructs(g):
        out = set()
        for c in range(n):
            ps = np.flatnonzero(g[:, c])
            for x, y in itertools.combinations(ps, 2):
                if not (g[x, y] or g[y, x]):
                    out.add((min(x, y), c, max(x, y)))
        return out

    ref = vstructs(a)
    members = []
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        g = np.zeros((n, n), bool)
        for (i, j), b in zip(pairs, bits):
            if b:
                g[i, j] = True
            else:
                g[j, i] = True
        if not has_cycle(g) and vstructs(g) == ref:
            members.append(g)
    out = np.zeros((n, n), bool)
    for i, j in pairs:
        if all(g[i, j] for g in members):
            out[i, j] = True
        elif all(g[j, i] for g in members):
            out[j, i] = True
        else:
            out[i, j] = out[j, i] = True
    return out


def compare_oracle(est, true):
    """Skeleton-based metrics and SHD written with Python sets."""
    n = true.shape[0]

    def edges(g):
        return {frozenset((i, j)) for i in range(n) for j in range(n) if g[i, j]}

    def kind(g, i, j):
        return (bool(g[i, j]), bool(g[j, i]))

    E, T = edges(est), edges(true)
    tp, fp, fn = len(E & T), len(E - T), len(T - E)
    shd = sum(kind(est, i, j) != kind(true, i, j) for i in range(n) for j in range(i + 1, n))
    non_edges = n * (n - 1) // 2 - len(T)
    return {
        "TP": tp, "FP": fp, "FN": fn, "SHD": shd,
        "TPR": tp / len(T) if T else 0.0,
        "FPR": fp / non_edges if non_edges else 0.0,
        "FPRn": fp / len(T) if T else 0.0,
        "FDR": fp / (tp + fp) if tp + fp else 0.0,
    }


def equivalence_key(adj):
    """Skeleton plus v-structures: equal keys mean Markov equivalent DAGs."""
    a = np.asarray(adj, bool)
    n = a.shape[0]
    skel = frozenset(frozenset((i, j)) for i in range(n) for j in range(n) if a[i, j])
    vs = set()
    for c in range(n):
        ps = np.flatnonzero(a[:, c])
        for x, y in itertools.combinations(ps, 2):
            if not (a[x, y] or a[y, x]):
                vs.add((int(min(x, y)), c, int(max(x, y))))
    return skel, frozenset(vs)
