"""File formats: adjacency CSV, DOT, score traces, sample archives, penalties."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import load_matrix
from .errors import DataError


def write_matrix(path, mat, labels: Sequence[str]) -> None:
    """Label row then one numeric row per node (integers written as such)."""
    m = np.asarray(mat)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(labels)
        for row in m:
            w.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def read_adjacency(path, labels: Sequence[str] | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    mat, head = load_matrix(path, labels=labels)
    return mat != 0, head


def to_dot(adj, labels: Sequence[str], name: str = "G") -> str:
    """DOT digraph; symmetric entries become a single undirected edge."""
    a = np.asarray(adj, bool)
    lines = [f"digraph {name} {{"]
    lines += [f'  "{s}";' for s in labels]
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            if not a[i, j]:
                continue
            if a[j, i]:
                if i < j:
                    lines.append(f'  "{labels[i]}" -> "{labels[j]}" [dir=none];')
            else:
                lines.append(f'  "{labels[i]}" -> "{labels[j]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(path, adj, labels, name: str = "G") -> None:
    Path(path).write_text(to_dot(adj, labels, name))


def write_trace(path, trace, stepsave: int = 1) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "score"])
        for k, s in enumerate(np.asarray(trace, float)):
            w.writerow([k * stepsave, repr(float(s))])


def read_trace(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([int(r[0]) for r in rows]), np.array([float(r[1]) for r in rows])


@dataclass
class SampleArchive:
    labels: tuple[str, ...]
    dags: np.ndarray
    scores: np.ndarray
    kind: str
    stepsave: int = 1

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez_compressed(fh, labels=np.array(self.labels), dags=np.packbits(self.dags, axis=-1),
                                n=np.array(self.dags.shape[-1]), scores=self.scores,
                                kind=np.array(self.kind), stepsave=np.array(self.stepsave))

    @classmethod
    def load(cls, path) -> "SampleArchive":
        try:
            with np.load(path) as z:
                n = int(z["n"])
                dags = np.unpackbits(z["dags"], axis=-1, count=n).astype(bool)
                return cls(tuple(str(s) for s in z["labels"]), dags, z["scores"].astype(float),
                           str(z["kind"]), int(z["stepsave"]))
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read sample archive {path}: {exc}") from exc


def read_interactions(path) -> list[tuple[str, str]]:
    """Pairs of node names, tab (or comma) separated, one per line; lines
    starting with '#' are ignored."""
    pairs = []
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in (line.split("\t") if "\t" in line else line.split(","))]
            if len(parts) < 2:
                raise DataError(f"{path}:{k}: expected two node names")
            pairs.append((parts[0], parts[1]))
    return pairs


def penalty_from_interactions(pairs, labels: Sequence[str], factor: float = 2.0) -> np.ndarray:
    """Penalty matrix: 1 for listed pairs (both directions), ``factor`` for
    every other off-diagonal entry."""
    if not factor >= 1:
        raise DataError("factor must be at least 1")
    idx = {s: k for k, s in enumerate(labels)}
    n = len(labels)
    pen = np.full((n, n), float(factor))
    np.fill_diagonal(pen, 1.0)
    for a, b in pairs:
        for s in (a, b):
            if s not in idx:
                raise DataError(f"unknown node {s!r} in interactions")
        pen[idx[a], idx[b]] = pen[idx[b], idx[a]] = 1.0
    return pen


__all__ = [
    "SampleArchive",
    "penalty_from_interactions",
    "read_adjacency",
    "read_interactions",
    "read_trace",
    "to_dot",
    "write_dot",
    "write_matrix",
    "write_trace",
]
