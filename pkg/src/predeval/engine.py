"""Columnar tables, record bitmaps, and metered atom execution."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .evaluator import Evaluator
from .errors import DataError
from .expr import COMPARATORS, Atom, PredicateTree


@dataclass
class Table:
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"columns have different lengths: {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}; have {sorted(self.columns)}") from None

    def row(self, r: int) -> dict[str, Any]:
        return {k: v[r].item() if hasattr(v[r], "item") else v[r] for k, v in self.columns.items()}

    def to_csv(self, path: str | Path) -> None:
        names = list(self.columns)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            w.writerows(zip(*(self.columns[n].tolist() for n in names)))


def _infer(values: list[str]) -> np.ndarray:
    for kind in (int, float):
        try:
            return np.array([kind(v) for v in values], dtype=np.int64 if kind is int else np.float64)
        except ValueError:
            continue
    return np.array(values, dtype=str)


def load_csv(path: str | Path) -> Table:
    """Read a headed CSV; each column becomes int, float, or str, whichever fits all values."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    if not rows:
        raise DataError(f"{path}: empty file, expected a header row")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{k}: expected {len(header)} fields, found {len(r)}")
    cols = list(zip(*body)) if body else [() for _ in header]
    return Table({h: _infer(list(c)) for h, c in zip(header, cols)})


@dataclass(frozen=True, eq=False)
class Bitmap:
    bits: np.ndarray

    @classmethod
    def full(cls, size: int) -> "Bitmap":
        return cls(np.ones(size, dtype=bool))

    @classmethod
    def empty(cls, size: int) -> "Bitmap":
        return cls(np.zeros(size, dtype=bool))

    @property
    def size(self) -> int:
        return len(self.bits)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def _check(self, other: "Bitmap") -> None:
        if self.size != other.size:
            raise DataError(f"bitmap length mismatch: {self.size} vs {other.size}")

    def __and__(self, other: "Bitmap") -> "Bitmap":
        self._check(other)
        return Bitmap(self.bits & other.bits)

    def __or__(self, other: "Bitmap") -> "Bitmap":
        self._check(other)
        return Bitmap(self.bits | other.bits)

    def __sub__(self, other: "Bitmap") -> "Bitmap":
        self._check(other)
        return Bitmap(self.bits & ~other.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, Bitmap) and self.size == other.size and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())


def bm_and(a: Bitmap, b: Bitmap) -> Bitmap:
    return a & b


def bm_or(a: Bitmap, b: Bitmap) -> Bitmap:
    return a | b


def bm_diff(a: Bitmap, b: Bitmap) -> Bitmap:
    return a - b


@dataclass
class Metrics:
    evaluations: int = 0
    per_step: list[tuple[int, int]] = field(default_factory=list)
    set_ops: int = 0
    wall_time: float = 0.0
    touches: dict[int, np.ndarray] | None = None

    def record(self, atom_id: int, count: int) -> None:
        self.evaluations += count
        self.per_step.append((atom_id, count))

    def to_json(self) -> dict:
        return {
            "evaluations": self.evaluations,
            "per_step": [{"atom": a, "evaluations": c} for a, c in self.per_step],
            "set_ops": self.set_ops,
            "wall_time": self.wall_time,
        }


def _check_types(atom: Atom, col: np.ndarray) -> None:
    numeric_col = col.dtype.kind in "iuf"
    numeric_const = isinstance(atom.constant, (int, float)) and not isinstance(atom.constant, bool)
    if numeric_col != numeric_const:
        kind = "numeric" if numeric_col else "text"
        raise DataError(f"atom {atom.text()!r} compares {kind} column {atom.column!r} with {atom.constant!r}")


def apply_atom_exec(table: Table, atom: Atom, input: Bitmap, metrics: Metrics | None = None) -> Bitmap:
    """Evaluate ``atom`` on exactly the records set in ``input``."""
    col = table.column(atom.column)
    if input.size != table.row_count:
        raise DataError(f"bitmap of length {input.size} for a table of {table.row_count} rows")
    _check_types(atom, col)
    idx = input.indices()
    hit = COMPARATORS[atom.comparator](col[idx], atom.constant)
    out = np.zeros(input.size, dtype=bool)
    out[idx[np.asarray(hit, dtype=bool)]] = True
    if metrics is not None:
        metrics.record(atom.id, len(idx))
        if metrics.touches is not None:
            t = metrics.touches.setdefault(atom.id, np.zeros(input.size, dtype=np.int32))
            t[idx] += 1
    return Bitmap(out)


class BitmapEvaluator(Evaluator):
    """Planner backend over real records.  ``measure`` is a record count."""

    name = "bitmap"

    def __init__(self, table: Table, tree: PredicateTree, metrics: Metrics | None = None, debug: bool = False):
        self.table = table
        self.tree = tree
        self.metrics = metrics if metrics is not None else Metrics()
        if debug and self.metrics.touches is None:
            self.metrics.touches = {}
        for a in tree.atoms.values():
            _check_types(a, table.column(a.column))

    def ground(self) -> Bitmap:
        return Bitmap.full(self.table.row_count)

    def empty(self) -> Bitmap:
        return Bitmap.empty(self.table.row_count)

    def apply(self, atom_id: int, s: Bitmap) -> Bitmap:
        return apply_atom_exec(self.table, self.tree.atom(atom_id), s, self.metrics)

    def intersect(self, a, b):
        self.metrics.set_ops += 1
        return a & b

    def union(self, a, b):
        self.metrics.set_ops += 1
        return a | b

    def difference(self, a, b):
        self.metrics.set_ops += 1
        return a - b

    def measure(self, s: Bitmap) -> float:
        return float(s.count())

    def total(self) -> float:
        return float(self.table.row_count)

    def max_touches(self) -> int:
        t = self.metrics.touches or {}
        return max((int(v.max()) for v in t.values() if len(v)), default=0)


@dataclass
class ColumnStats:
    """Column values used for selectivity estimates: all of them, or a sample."""

    values: dict[str, np.ndarray]
    sampled: bool = False

    @classmethod
    def full(cls, table: Table) -> "ColumnStats":
        return cls(dict(table.columns))

    @classmethod
    def sample(cls, table: Table, size: int, seed: int = 0) -> "ColumnStats":
        rng = np.random.default_rng(seed)
        n = table.row_count
        idx = np.sort(rng.choice(n, size=min(size, n), replace=False)) if n else np.array([], dtype=int)
        return cls({k: v[idx] for k, v in table.columns.items()}, sampled=True)


def estimate_selectivity(stats: ColumnStats, atom: Atom) -> float:
    try:
        col = stats.values[atom.column]
    except KeyError:
        raise DataError(f"unknown column {atom.column!r}: no statistics") from None
    if len(col) == 0:
        raise DataError("cannot estimate selectivity from zero rows")
    _check_types(atom, col)
    return float(np.count_nonzero(COMPARATORS[atom.comparator](col, atom.constant))) / len(col)


def with_measured_stats(tree: PredicateTree, stats: ColumnStats | Table) -> PredicateTree:
    """Copy of ``tree`` carrying selectivities measured on ``stats``."""
    if isinstance(stats, Table):
        stats = ColumnStats.full(stats)
    return tree.with_stats({i: estimate_selectivity(stats, tree.atom(i)) for i in tree.atoms})


def execute(plan_fn, tree: PredicateTree, table: Table, *args, debug: bool = False, **kwargs):
    """Run a planner entry point on ``table`` and time it.  Returns (plan, metrics)."""
    ev = BitmapEvaluator(table, tree, debug=debug)
    t0 = time.perf_counter()
    plan = plan_fn(tree, ev, *args, **kwargs)
    ev.metrics.wall_time = time.perf_counter() - t0
    return plan, ev.metrics


def selectivity_map(tree: PredicateTree) -> Mapping[int, float]:
    return {i: tree.selectivity(i) for i in tree.atoms}
