"""Brute-force references for the planner.

* ``exhaustive_optimal`` -- cheapest ordering over all n! orderings, each
  step fed its BestD input set.
* ``verify_result``      -- per-record evaluation of the whole expression.
* ``brute_prefix``       -- all permutations of a pure AND / OR chain.
* ``bestd_minimality``   -- no step input can lose a vertex class and still
  let the final answer be assembled by set algebra.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .costmodel import DEFAULT_MODEL, CostModel, and_chain_cost, and_weight, or_chain_cost, or_weight
from .engine import Bitmap, Table
from .errors import OracleLimitError
from .evaluator import Evaluator
from .expr import AND, OR, PredicateTree
from .planner import PlannerState, best_d_levels, update
from .vertexsem import VertexEvaluator, VertexSet, all_vertices, apply_atom, xi

MAX_EXHAUSTIVE_N = 8
MAX_PREFIX_N = 7


@dataclass
class OracleReport:
    best_ordering: list[int]
    best_cost: float
    candidate_count: int
    matched: bool | None = None
    minimizers: list[list[int]] = field(default_factory=list)
    explored: int = 0


def _close(a: float, b: float, rel: float = 1e-9) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def exhaustive_optimal(
    tree: PredicateTree,
    evaluator: Evaluator,
    model: CostModel = DEFAULT_MODEL,
    against: float | None = None,
    max_n: int = MAX_EXHAUSTIVE_N,
) -> OracleReport:
    """Minimum BestD-driven plan cost over every ordering of the atoms.

    Orderings sharing a prefix share its planner state, and a prefix whose
    cost already exceeds the best complete ordering is cut off (step costs
    are nonnegative, so no completion can win).  ``candidate_count`` is n!
    either way.  With ``against``, ``matched`` says whether that cost is
    optimal within tolerance.
    """
    n = tree.n
    if n > max_n:
        raise OracleLimitError(f"exhaustive search limited to {max_n} atoms, tree has {n}")
    best = [math.inf]
    found: list[tuple[float, list[int]]] = []
    explored = [0]
    total = evaluator.total()

    def dfs(state: PlannerState, prefix_cost: float):
        if len(state.applied) == n:
            explored[0] += 1
            if prefix_cost < best[0] or _close(prefix_cost, best[0]):
                best[0] = min(best[0], prefix_cost)
                found.append((prefix_cost, list(state.applied)))
            return
        for a in range(1, n + 1):
            if a in state.applied_set:
                continue
            levels = best_d_levels(tree, state, a, evaluator)
            d = levels[-1]
            cost = prefix_cost + model.atom_cost(tree.atom(a).cost_factor, evaluator.measure(d), total)
            if cost > best[0] and not _close(cost, best[0]):
                continue
            child = state.copy()
            update(tree, child, a, d, evaluator, levels)
            dfs(child, cost)

    dfs(PlannerState(), 0.0)
    minimizers = [o for c, o in found if _close(c, best[0])]
    report = OracleReport(minimizers[0], best[0], math.factorial(n), None, minimizers, explored[0])
    if against is not None:
        report.matched = _close(against, best[0])
    return report


def verify_result(tree: PredicateTree, table: Table, result: Bitmap) -> bool:
    """True iff ``result`` holds exactly the records satisfying ``tree``."""
    if result.size != table.row_count:
        return False
    names = sorted({a.column for a in tree.atoms.values()})
    cols = [table.column(c).tolist() for c in names]
    for r, values in enumerate(zip(*cols)):
        if tree.evaluate(dict(zip(names, values))) != bool(result.bits[r]):
            return False
    return True


@dataclass
class PrefixReport:
    best_cost: float
    best_ordering: list[int]
    candidate_count: int
    min_weight_first: bool
    subset_form: bool


def brute_prefix(kind: str, atoms: Sequence[tuple[float, float]]) -> PrefixReport:
    """Enumerate every order of a pure AND / OR chain of ``(cost, selectivity)`` atoms.

    ``min_weight_first``: some cheapest order starts with a minimum-weight
    atom.  ``subset_form``: for every nonempty subset S, among orders that put
    S first, some cheapest one starts with a minimum-weight atom of S.
    """
    kind = kind.upper()
    if kind not in (AND, OR):
        raise ValueError(f"kind must be AND or OR, got {kind!r}")
    n = len(atoms)
    if not 1 <= n <= MAX_PREFIX_N:
        raise OracleLimitError(f"brute_prefix handles 1..{MAX_PREFIX_N} atoms, got {n}")
    chain_cost = and_chain_cost if kind == AND else or_chain_cost
    weight = and_weight if kind == AND else or_weight
    w = [weight(c, g) for c, g in atoms]

    best_cost, best_perm = math.inf, None
    # per prefix set: (cheapest cost among orders starting with it, whether a
    # cheapest one leads with a minimum-weight member)
    by_prefix: dict[frozenset, list] = {}
    for perm in itertools.permutations(range(n)):
        cost = chain_cost([atoms[k] for k in perm])
        if cost < best_cost and not _close(cost, best_cost):
            best_cost, best_perm = cost, perm
        for k in range(1, n + 1):
            key = frozenset(perm[:k])
            leads_min = w[perm[0]] == min(w[j] for j in key)
            slot = by_prefix.get(key)
            if slot is None or (cost < slot[0] and not _close(cost, slot[0])):
                by_prefix[key] = [cost, leads_min]
            elif _close(cost, slot[0]):
                slot[1] = slot[1] or leads_min
    full = by_prefix[frozenset(range(n))]
    return PrefixReport(
        best_cost,
        [k + 1 for k in best_perm],
        math.factorial(n),
        full[1],
        all(v[1] for v in by_prefix.values()),
    )


def sorted_chain_cost(kind: str, atoms: Sequence[tuple[float, float]]) -> float:
    """Chain cost with atoms in increasing weight order."""
    kind = kind.upper()
    if kind == AND:
        return and_chain_cost(sorted(atoms, key=lambda a: and_weight(*a)))
    return or_chain_cost(sorted(atoms, key=lambda a: or_weight(*a)))


# --------------------------------------------------------------------------
# BestD minimality on the n-cube
# --------------------------------------------------------------------------


def _derivable(target: VertexSet, generators: list[VertexSet], universe: VertexSet) -> bool:
    """Whether ``target`` can be built from ``generators`` with union,
    intersection and difference: it must be a union of membership classes."""
    n = universe.n
    idx = universe.indices()
    sig = np.zeros(len(idx), dtype=np.int64)
    for k, g in enumerate(generators):
        members = set(g.indices().tolist())
        sig |= np.array([1 << k if i in members else 0 for i in idx.tolist()], dtype=np.int64)
    tmembers = set(target.indices().tolist())
    inside = np.array([i in tmembers for i in idx.tolist()], dtype=bool)
    seen: dict[int, bool] = {}
    for s, t in zip(sig.tolist(), inside.tolist()):
        if seen.setdefault(s, t) != t:
            return False
    return True


def _history_class(v: int, before: Sequence[int], n: int) -> VertexSet:
    """Vertices agreeing with ``v`` on every atom in ``before``."""
    mask = 0
    for u in range(1 << n):
        if all(((u ^ v) >> (a - 1)) & 1 == 0 for a in before):
            mask |= 1 << u
    return VertexSet(n, mask)


@dataclass
class MinimalityReport:
    derivable_with_bestd: bool
    redundant: list[tuple[int, tuple[int, ...]]]

    @property
    def ok(self) -> bool:
        return self.derivable_with_bestd and not self.redundant


def bestd_minimality(tree: PredicateTree, ordering: Sequence[int]) -> MinimalityReport:
    """Check that every BestD input is as small as it can be for ``ordering``.

    For step i and each vertex v in its input D_i, the class of vertices
    that no earlier atom can tell apart from v is dropped from D_i.  Even
    with every later atom applied to all vertices, the answer must then no
    longer be expressible from the step outputs.  Practical for n <= 4.
    """
    n = tree.n
    ev = VertexEvaluator(n)
    universe = all_vertices(n)
    target = xi(tree.root, universe)
    state = PlannerState()
    inputs, outputs = [], []
    for a in ordering:
        levels = best_d_levels(tree, state, a, ev)
        inputs.append(levels[-1])
        outputs.append(update(tree, state, a, levels[-1], ev, levels))

    later_full = [[apply_atom(a, universe) for a in ordering[i + 1 :]] for i in range(n)]
    base = [universe, *outputs]
    ok_full = _derivable(target, base, universe)
    redundant = []
    for i, a in enumerate(ordering):
        d_i = inputs[i]
        tried: set[int] = set()
        for v in d_i.indices().tolist():
            if v in tried:
                continue
            cls = _history_class(v, ordering[:i], n) & d_i
            tried.update(cls.indices().tolist())
            gens = [universe, *outputs[:i], apply_atom(a, d_i - cls), *later_full[i]]
            if _derivable(target, gens, universe):
                redundant.append((a, tuple((v >> k) & 1 for k in range(n))))
    return MinimalityReport(ok_full, redundant)
