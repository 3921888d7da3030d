"""Exact vertex-set semantics on the n-cube.

A vertex is an n-tuple of 0/1 atom outcomes; bit ``i-1`` of a vertex index
is the outcome of atom ``i``.  A ``VertexSet`` stores its members as one
2**n-bit Python integer, so set algebra is plain integer bit arithmetic.
Only meant for small n (<= 20): this is the verification surface, not the
execution path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .evaluator import Evaluator
from .expr import AND, PredicateTree, PredNode

MAX_N = 20


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"vertex sets need 1 <= n <= {MAX_N}, got {n}")


@lru_cache(maxsize=None)
def _full_mask(n: int) -> int:
    return (1 << (1 << n)) - 1


@lru_cache(maxsize=None)
def _atom_mask(n: int, i: int) -> int:
    idx = np.arange(1 << n, dtype=np.int64)
    bits = ((idx >> (i - 1)) & 1).astype(np.uint8)
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _mask_to_bools(n: int, mask: int) -> np.ndarray:
    size = 1 << n
    raw = mask.to_bytes((size + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:size].astype(bool)


def vertex_index(v: Sequence[int]) -> int:
    return sum(1 << k for k, bit in enumerate(v) if bit)


def index_vertex(n: int, idx: int) -> tuple[int, ...]:
    return tuple((idx >> k) & 1 for k in range(n))


@dataclass(frozen=True)
class VertexSet:
    n: int
    mask: int

    @classmethod
    def of(cls, n: int, vertices: Iterable[Sequence[int]]) -> "VertexSet":
        mask = 0
        for v in vertices:
            if len(v) != n:
                raise ValueError(f"vertex {tuple(v)} does not have length {n}")
            mask |= 1 << vertex_index(v)
        return cls(n, mask)

    def _same_n(self, other: "VertexSet") -> None:
        if self.n != other.n:
            raise ValueError(f"vertex length mismatch: {self.n} vs {other.n}")

    def __and__(self, other: "VertexSet") -> "VertexSet":
        self._same_n(other)
        return VertexSet(self.n, self.mask & other.mask)

    def __or__(self, other: "VertexSet") -> "VertexSet":
        self._same_n(other)
        return VertexSet(self.n, self.mask | other.mask)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        self._same_n(other)
        return VertexSet(self.n, self.mask & ~other.mask)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, v: Sequence[int]) -> bool:
        return len(v) == self.n and bool(self.mask >> vertex_index(v) & 1)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        m = self.mask
        while m:
            low = m & -m
            yield index_vertex(self.n, low.bit_length() - 1)
            m ^= low

    def issubset(self, other: "VertexSet") -> bool:
        return self.mask & ~other.mask == 0

    def indices(self) -> np.ndarray:
        return np.flatnonzero(_mask_to_bools(self.n, self.mask))

    def __repr__(self) -> str:
        shown = ", ".join("".join(map(str, v)) for v in list(self)[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"VertexSet(n={self.n}, {{{shown}{more}}})"


def all_vertices(n: int) -> VertexSet:
    """{0,1}^n."""
    _check_n(n)
    return VertexSet(n, _full_mask(n))


def empty_set(n: int) -> VertexSet:
    _check_n(n)
    return VertexSet(n, 0)


def apply_atom(i: int, s: VertexSet) -> VertexSet:
    """Vertices of ``s`` whose bit for atom ``i`` is 1."""
    return VertexSet(s.n, s.mask & _atom_mask(s.n, i))


def eval_node(node: PredNode, v: Sequence[int]) -> int:
    if node.is_leaf:
        return int(v[node.atom_ref - 1])
    if node.kind == AND:
        return int(all(eval_node(c, v) for c in node.children))
    return int(any(eval_node(c, v) for c in node.children))


def xi(node: PredNode, s: VertexSet) -> VertexSet:
    """Members of ``s`` satisfying the subtree at ``node``."""
    if node.is_leaf:
        return apply_atom(node.atom_ref, s)
    parts = [xi(c, s) for c in node.children]
    out = parts[0]
    for p in parts[1:]:
        out = (out & p) if node.kind == AND else (out | p)
    return out


def is_complete(node: PredNode, applied: Iterable[int]) -> bool:
    applied = applied if isinstance(applied, (set, frozenset)) else set(applied)
    return node.atom_ids <= applied


def is_pos_determinable(node: PredNode, applied: Iterable[int]) -> bool:
    applied = applied if isinstance(applied, (set, frozenset)) else set(applied)
    return _pos(node, applied)


def is_neg_determinable(node: PredNode, applied: Iterable[int]) -> bool:
    applied = applied if isinstance(applied, (set, frozenset)) else set(applied)
    return _neg(node, applied)


def _pos(node: PredNode, applied) -> bool:
    if node.is_leaf:
        return node.atom_ref in applied
    if node.kind == AND:
        return all(_pos(c, applied) for c in node.children)
    return any(_pos(c, applied) for c in node.children)


def _neg(node: PredNode, applied) -> bool:
    if node.is_leaf:
        return node.atom_ref in applied
    if node.kind == AND:
        return any(_neg(c, applied) for c in node.children)
    return all(_neg(c, applied) for c in node.children)


class VertexEvaluator(Evaluator):
    """Exact vertex sets; ``measure`` counts vertices."""

    name = "vertex"

    def __init__(self, n: int):
        _check_n(n)
        self.n = n

    def ground(self) -> VertexSet:
        return all_vertices(self.n)

    def empty(self) -> VertexSet:
        return VertexSet(self.n, 0)

    def apply(self, atom_id: int, s: VertexSet) -> VertexSet:
        return apply_atom(atom_id, s)

    def intersect(self, a, b):
        return a & b

    def union(self, a, b):
        return a | b

    def difference(self, a, b):
        return a - b

    def measure(self, s: VertexSet) -> float:
        return float(len(s))

    def total(self) -> float:
        return float(1 << self.n)

    def subset(self, a, b) -> bool:
        return a.issubset(b)


class FractionEvaluator(VertexEvaluator):
    """Vertex sets weighted by the independence model.

    Vertex ``v`` carries probability ``prod(g_i if v_i else 1 - g_i)``, so the
    measure of a set is the expected fraction of records it represents.
    Unlike multiplying set fractions together, this stays exact when the
    sets being combined overlap.
    """

    name = "fraction"

    def __init__(self, selectivities: Mapping[int, float] | Sequence[float]):
        if isinstance(selectivities, Mapping):
            n = len(selectivities)
            sel = [float(selectivities[i]) for i in range(1, n + 1)]
        else:
            sel = [float(s) for s in selectivities]
        super().__init__(len(sel))
        self.selectivities = tuple(sel)
        idx = np.arange(1 << self.n, dtype=np.int64)
        w = np.ones(1 << self.n)
        for k, g in enumerate(sel):
            w *= np.where((idx >> k) & 1, g, 1.0 - g)
        self.weights = w
        self._cache: dict[int, float] = {}

    @classmethod
    def for_tree(cls, tree: PredicateTree) -> "FractionEvaluator":
        return cls([tree.selectivity(i) for i in range(1, tree.n + 1)])

    def measure(self, s: VertexSet) -> float:
        hit = self._cache.get(s.mask)
        if hit is None:
            if s.mask == 0:
                hit = 0.0
            else:
                hit = float(self.weights[_mask_to_bools(self.n, s.mask)].sum())
            if len(self._cache) < 100_000:
                self._cache[s.mask] = hit
        return hit

    def total(self) -> float:
        return 1.0
