"""Weight-based atom ordering and the no-bypass baseline ordering.

``order_p`` sorts every node's children by weight, bottom up, and reads the
atom sequence off the sorted tree.  A subtree is summarized by its combined
selectivity and expected cost, so it competes with its siblings exactly like
a single atom would:

* conjunction children by ``c / (1 - g)``, disjunction children by ``c / g``
* degenerate weights sort last; ties keep the lower atom id first
"""

from __future__ import annotations

from dataclasses import dataclass

from .costmodel import and_weight, or_weight
from .expr import AND, PredicateTree, PredNode


@dataclass(frozen=True)
class NodeSummary:
    """Ordered atom sequence of a subtree plus its combined stats."""

    ordering: tuple[int, ...]
    selectivity: float
    cost: float

    @property
    def first_atom(self) -> int:
        return min(self.ordering)


def combine_and(parts: list[NodeSummary]) -> tuple[float, float]:
    """(selectivity, cost) of children evaluated in order as a conjunction."""
    sel, cost = 1.0, 0.0
    for p in parts:
        cost += sel * p.cost
        sel *= p.selectivity
    return sel, cost


def combine_or(parts: list[NodeSummary]) -> tuple[float, float]:
    """(selectivity, cost) of children evaluated in order as a disjunction with bypass."""
    sel, cost = 0.0, 0.0
    for p in parts:
        cost += (1.0 - sel) * p.cost
        sel = p.selectivity + sel * (1.0 - p.selectivity)
    return sel, cost


def _weight(kind: str, s: NodeSummary) -> float:
    return and_weight(s.cost, s.selectivity) if kind == AND else or_weight(s.cost, s.selectivity)


def order_node(tree: PredicateTree, node: PredNode) -> NodeSummary:
    if node.is_leaf:
        a = tree.atom(node.atom_ref)
        return NodeSummary((a.id,), tree.selectivity(a.id), a.cost_factor)
    parts = [order_node(tree, c) for c in node.children]
    parts.sort(key=lambda s: (_weight(node.kind, s), s.first_atom))
    sel, cost = combine_and(parts) if node.kind == AND else combine_or(parts)
    ordering = tuple(a for p in parts for a in p.ordering)
    return NodeSummary(ordering, sel, cost)


def order_p(tree: PredicateTree) -> list[int]:
    """Atom ids in the weight-sorted order."""
    return list(order_node(tree, tree.root).ordering)


def estimated_cost(tree: PredicateTree, ordering=None) -> float:
    """Expected cost (as a fraction of a full scan, times cost factors) of
    the subtree-by-subtree evaluation that ``order_p`` assumes.

    Without an ``ordering`` this is the cost of the weight-sorted tree.  With
    one, children are evaluated in the order their first atom appears.
    """
    if ordering is None:
        return order_node(tree, tree.root).cost
    position = {a: k for k, a in enumerate(ordering)}

    def walk(node: PredNode) -> NodeSummary:
        if node.is_leaf:
            a = tree.atom(node.atom_ref)
            return NodeSummary((a.id,), tree.selectivity(a.id), a.cost_factor)
        parts = sorted((walk(c) for c in node.children), key=lambda s: min(position[a] for a in s.ordering))
        sel, cost = combine_and(parts) if node.kind == AND else combine_or(parts)
        return NodeSummary(tuple(a for p in parts for a in p.ordering), sel, cost)

    return walk(tree.root).cost


def subtree_selectivity(tree: PredicateTree, node: PredNode) -> float:
    """Combined selectivity of a subtree under independence."""
    if node.is_leaf:
        return tree.selectivity(node.atom_ref)
    sels = [subtree_selectivity(tree, c) for c in node.children]
    out = 1.0
    if node.kind == AND:
        for s in sels:
            out *= s
        return out
    for s in sels:
        out *= 1.0 - s
    return 1.0 - out


def no_or_opt(tree: PredicateTree) -> list[tuple[int, int | None]]:
    """Baseline evaluation order without disjunct bypass.

    Conjunction children go by increasing selectivity (ties by lowest atom
    id); disjunction children keep source order.  Each entry is
    ``(atom id, scope)`` where ``scope`` is the node id of the innermost
    disjunct containing the atom, whose input is its parent's full input set;
    ``None`` means the atom sits on a pure conjunction path.
    """
    out: list[tuple[int, int | None]] = []

    def walk(node: PredNode, scope: int | None):
        if node.is_leaf:
            out.append((node.atom_ref, scope))
            return
        if node.kind == AND:
            kids = sorted(node.children, key=lambda c: (subtree_selectivity(tree, c), min(c.atom_ids)))
            for c in kids:
                walk(c, scope)
        else:
            for c in node.children:
                walk(c, c.nid)

    walk(tree.root, None)
    return out
