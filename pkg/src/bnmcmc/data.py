"""Datasets, CSV ingestion and the score configuration object."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DataError

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, BINARY, CATEGORICAL)
SCORE_TYPES = ("bge", "bde", "bdecat")


@dataclass(frozen=True, eq=False)
class Dataset:
    """An N x n table.

    Continuous columns hold floats; binary and categorical columns hold
    integer level codes ``0..r-1`` (stored as floats in ``values``), with
    the level names in ``levels``.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    kinds: tuple[str, ...]
    levels: tuple[tuple[str, ...] | None, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            v = v.reshape(-1, len(self.labels))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if not self.levels:
            object.__setattr__(
                self, "levels",
                tuple(("0", "1") if k == BINARY else None for k in self.kinds),
            )
        n = len(self.labels)
        if v.shape[1] != n or len(self.kinds) != n or len(self.levels) != n:
            raise DataError("values, labels, kinds and levels disagree on the column count")
        if len(set(self.labels)) != n:
            raise DataError("column labels must be unique")
        for j, kind in enumerate(self.kinds):
            if kind not in KINDS:
                raise DataError(f"unknown column kind {kind!r}")
            if kind != CONTINUOUS and v.shape[0]:
                r = len(self.levels[j])
                col = v[:, j]
                if np.any((col < 0) | (col >= r) | (col != np.round(col))):
                    raise DataError(f"column {self.labels[j]!r} has codes outside its {r} levels")
        if not np.all(np.isfinite(v)):
            raise DataError("dataset contains missing or non-finite values")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def n_levels(self) -> np.ndarray:
        return np.array([len(lv) if lv is not None else 0 for lv in self.levels], dtype=int)

    def codes(self) -> np.ndarray:
        return self.values.astype(np.int64)

    def select(self, columns: Sequence[int], labels: Sequence[str] | None = None) -> "Dataset":
        cols = list(columns)
        return Dataset(
            self.values[:, cols],
            tuple(labels) if labels is not None else tuple(self.labels[j] for j in cols),
            tuple(self.kinds[j] for j in cols),
            tuple(self.levels[j] for j in cols),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.labels)
            for row in self.values:
                out = []
                for j, x in enumerate(row):
                    if self.kinds[j] == CONTINUOUS:
                        out.append(repr(float(x)))
                    else:
                        out.append(self.levels[j][int(x)])
                w.writerow(out)


def _parse_float(s: str):
    try:
        return float(s)
    except ValueError:
        return None


def _kind_hint(hint) -> tuple[str, tuple[str, ...] | None]:
    if isinstance(hint, str):
        if hint.startswith(CATEGORICAL + ":"):
            return CATEGORICAL, tuple(hint.split(":", 1)[1].split("|"))
        return hint, None
    kind, levels = hint
    return kind, tuple(str(x) for x in levels) if levels is not None else None


def load_dataset(path, kinds: Mapping[str, Any] | None = None) -> Dataset:
    """Read a CSV file with a header row.

    Column kinds are inferred unless given in ``kinds`` (label -> kind, where
    a kind is ``"continuous"``, ``"binary"``, ``"categorical"``,
    ``"categorical:a|b|c"`` or a ``(kind, levels)`` pair): all-numeric
    columns with values in {0, 1} are binary, other all-numeric columns are
    continuous, non-numeric columns are categorical.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    n = len(header)
    for i, r in enumerate(body, start=2):
        if len(r) != n:
            raise DataError(f"{path}:{i}: expected {n} fields, got {len(r)}")
    kinds = dict(kinds or {})
    unknown = set(kinds) - set(header)
    if unknown:
        raise DataError(f"kind hints for unknown columns: {sorted(unknown)}")

    values = np.zeros((len(body), n))
    out_kinds, out_levels = [], []
    for j, label in enumerate(header):
        raw = [r[j].strip() for r in body]
        if any(s == "" or s.upper() in ("NA", "NAN") for s in raw):
            raise DataError(f"column {label!r} has missing values")
        nums = [_parse_float(s) for s in raw]
        numeric = [x is not None for x in nums]
        if label in kinds:
            kind, levels = _kind_hint(kinds[label])
        elif all(numeric):
            kind = BINARY if set(nums) <= {0.0, 1.0} else CONTINUOUS
            levels = None
        elif not any(numeric):
            kind, levels = CATEGORICAL, None
        else:
            raise DataError(f"column {label!r} mixes numeric and non-numeric entries")

        if kind == CONTINUOUS:
            if not all(numeric):
                raise DataError(f"column {label!r} declared continuous has non-numeric entries")
            values[:, j] = nums
            out_levels.append(None)
        elif kind == BINARY:
            if not all(x in (0.0, 1.0) for x in nums):
                raise DataError(f"column {label!r} declared binary has values outside {{0,1}}")
            values[:, j] = nums
            out_levels.append(("0", "1"))
        elif kind == CATEGORICAL:
            if levels is None:
                levels = tuple(sorted(set(raw)))
            index = {lv: k for k, lv in enumerate(levels)}
            bad = sorted(set(raw) - set(index))
            if bad:
                raise DataError(f"column {label!r} has values {bad} outside levels {list(levels)}")
            values[:, j] = [index[s] for s in raw]
            out_levels.append(tuple(levels))
        else:
            raise DataError(f"unknown kind {kind!r} for column {label!r}")
        out_kinds.append(kind)
    return Dataset(values, tuple(header), tuple(out_kinds), tuple(out_levels))


def load_matrix(path, *, labels: Sequence[str] | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read an adjacency-style CSV: a label row followed by n numeric rows."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    head = tuple(h.strip() for h in rows[0])
    body = rows[1:]
    if len(body) != len(head) or any(len(r) != len(head) for r in body):
        raise DataError(f"{path}: expected a {len(head)}x{len(head)} matrix under the label row")
    try:
        mat = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric matrix entry") from exc
    if labels is not None and tuple(labels) != head:
        raise DataError(f"{path}: labels {head} do not match dataset labels")
    return mat, head


def load_weights(path, n_rows: int) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    vals = []
    for r in rows:
        x = _parse_float(r[0])
        if x is None:
            if vals:
                raise DataError(f"{path}: non-numeric weight {r[0]!r}")
            continue  # header
        vals.append(x)
    w = np.array(vals, dtype=float)
    if len(w) != n_rows:
        raise DataError(f"{path}: {len(w)} weights for {n_rows} rows")
    return w


@dataclass(frozen=True)
class DbnLayout:
    """Column layout of DBN data: ``n_static`` columns then ``slices`` groups
    of ``n_dynamic`` columns, one group per time point."""

    n_static: int
    n_dynamic: int
    slices: int
    samestruct: bool = True

    def __post_init__(self):
        if self.n_static < 0 or self.n_dynamic < 1 or self.slices < 2:
            raise DataError("DBN layout needs n_static >= 0, n_dynamic >= 1, slices >= 2")

    @property
    def width(self) -> int:
        return self.n_static + self.n_dynamic * self.slices


@dataclass(frozen=True, eq=False)
class ScoreContext:
    """Everything needed to score a node given a parent set.  Immutable."""

    data: Dataset
    score_type: str
    am: float
    aw: float | None
    chi: float
    edgepf: float
    weights: np.ndarray | None
    bgnodes: tuple[int, ...]
    edge_penalty: np.ndarray | None
    dbn: DbnLayout | None
    scorer: Any = field(repr=False)
    log_penalty: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.data.n_cols

    @property
    def labels(self) -> tuple[str, ...]:
        return self.data.labels

    @property
    def bg_mask(self) -> int:
        m = 0
        for v in self.bgnodes:
            m |= 1 << v
        return m

    @property
    def ordered_nodes(self) -> tuple[int, ...]:
        bg = set(self.bgnodes)
        return tuple(v for v in range(self.n) if v not in bg)

    def options(self) -> dict:
        """Resolved score options, JSON-friendly."""
        return {
            "score_type": self.score_type,
            "am": self.am,
            "aw": self.aw,
            "chi": self.chi,
            "edgepf": self.edgepf,
            "weighted": self.weights is not None,
            "bgnodes": [self.labels[v] for v in self.bgnodes],
            "edge_penalty": self.edge_penalty is not None,
        }


def infer_score_type(data: Dataset) -> str:
    kinds = set(data.kinds)
    if kinds <= {CONTINUOUS}:
        return "bge"
    if kinds <= {BINARY}:
        return "bde"
    if kinds <= {BINARY, CATEGORICAL}:
        return "bdecat"
    raise DataError("dataset mixes continuous and discrete columns; no matching score")


def build_score_context(
    data: Dataset,
    score_type: str | None = None,
    *,
    am: float = 1.0,
    aw: float | None = None,
    chi: float = 0.5,
    edgepf: float = 2.0,
    weights=None,
    bgnodes: Sequence[int] = (),
    edge_penalty=None,
    dbn: DbnLayout | None = None,
    scorer=None,
) -> ScoreContext:
    """Validate options against the data and precompute sufficient statistics.

    ``scorer`` is the extension point for user-defined scores: any object
    with ``local(node, parents)`` and ``batch(node, parent_matrix)`` methods
    returning log marginal likelihood terms.
    """
    from . import scoring

    n = data.n_cols
    if score_type is None:
        score_type = infer_score_type(data)
    if score_type not in SCORE_TYPES and scorer is None:
        raise DataError(f"unknown score type {score_type!r}; expected one of {SCORE_TYPES}")
    kinds = set(data.kinds)
    if scorer is None:
        if score_type == "bge" and kinds - {CONTINUOUS}:
            raise DataError("bge score needs continuous data")
        if score_type == "bde" and kinds - {BINARY}:
            raise DataError("bde score needs binary data")
        if score_type == "bdecat" and kinds - {BINARY, CATEGORICAL}:
            raise DataError("bdecat score needs binary or categorical data")
    if not am > 0:
        raise DataError("am must be positive")
    if score_type == "bge":
        if aw is None:
            aw = n + am + 1.0
        if not aw > n + 1:
            raise DataError(f"aw must exceed n + 1 = {n + 1}")
    if not chi > 0:
        raise DataError("chi must be positive")
    if not edgepf >= 1:
        raise DataError("edgepf must be at least 1")

    w = None
    if weights is not None:
        w = np.array(weights, dtype=float)
        if w.shape != (data.n_rows,):
            raise DataError(f"weights must have length {data.n_rows}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("weights must be finite and nonnegative")
        if data.n_rows and not np.any(w > 0):
            raise DataError("weights are all zero")
        w.setflags(write=False)

    bg = tuple(sorted(set(int(v) for v in bgnodes)))
    if any(v < 0 or v >= n for v in bg):
        raise DataError("bgnodes outside the node range")
    if len(bg) == n:
        raise DataError("at least one node must not be a background node")

    pen = None
    log_pen = np.zeros((n, n))
    if edge_penalty is not None:
        pen = np.array(edge_penalty, dtype=float)
        if pen.shape != (n, n):
            raise DataError(f"edge penalty matrix must be {n}x{n}")
        off = ~np.eye(n, dtype=bool)
        if np.any(pen[off] < 1) or not np.all(np.isfinite(pen[off])):
            raise DataError("edge penalty entries must be finite and >= 1")
        log_pen = np.where(off, np.log(np.where(off, pen, 1.0)), 0.0)
        pen.setflags(write=False)
    if score_type in ("bde", "bdecat") and scorer is None:
        log_pen = log_pen + np.log(edgepf) * (1 - np.eye(n))
    log_pen.setflags(write=False)

    if dbn is not None and dbn.width != n:
        raise DataError(
            f"DBN layout expects {dbn.width} columns (b + n*T), data has {n}"
        )

    if scorer is None:
        scorer = scoring.make_scorer(data, score_type, am=am, aw=aw, chi=chi, weights=w)
    return ScoreContext(
        data=data,
        score_type=score_type,
        am=float(am),
        aw=None if aw is None else float(aw),
        chi=float(chi),
        edgepf=float(edgepf),
        weights=w,
        bgnodes=bg,
        edge_penalty=pen,
        dbn=dbn,
        scorer=scorer,
        log_penalty=log_pen,
    )
