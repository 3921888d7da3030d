from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings

from predeval.expr import tree_from_spec
from predeval.orderp import (
    NodeSummary,
    combine_and,
    combine_or,
    estimated_cost,
    no_or_opt,
    order_node,
    order_p,
    subtree_selectivity,
)
from predeval.planner import estimate_ordering

from .conftest import A, B, C, D
from .strategies import trees


def _s(sel, cost=1.0):
    return NodeSummary((1,), sel, cost)


def test_example_ordering_and_cost(example):
    assert order_p(example) == [C, D, B, A]
    assert estimated_cost(example) == pytest.approx(2.638, abs=1e-3)
    assert estimate_ordering(example, [C, D, B, A]) == pytest.approx(2.638, abs=1e-3)
    assert estimate_ordering(example, [B, C, A, D]) == pytest.approx(2.586, abs=1e-3)


def test_subtree_summaries(example):
    inner = example.root.children[1]
    s = order_node(example, inner)
    assert s.ordering == (C, D, B)
    assert s.selectivity == pytest.approx(0.6300, abs=1e-4)
    # C /\ D costs 1 + .469; B runs on what C /\ D rejected
    assert s.cost == pytest.approx(1.469 + (1 - 0.469 * 0.984) * 1, abs=1e-9)


def test_combine():
    assert combine_and([_s(0.469), _s(0.984)])[0] == pytest.approx(0.4615, abs=1e-4)
    assert combine_or([_s(0.313), _s(0.4615)])[0] == pytest.approx(0.6300, abs=1e-4)
    assert combine_or([_s(0.37), _s(0.0)])[0] == pytest.approx(0.37)


def test_simple_orderings():
    assert order_p(tree_from_spec(0.4)) == [1]
    assert order_p(tree_from_spec(("AND", 0.1, 0.9))) == [1, 2]
    assert order_p(tree_from_spec(("AND", 0.9, 0.1))) == [2, 1]
    assert order_p(tree_from_spec(("OR", 0.1, 0.9))) == [2, 1]
    # expensive selective atom loses to a cheap one
    assert order_p(tree_from_spec(("AND", (0.1, 10.0), (0.5, 1.0)))) == [2, 1]


def test_degenerate_weights_sort_last_and_ties_by_id():
    assert order_p(tree_from_spec(("AND", 1.0, 0.5, 0.5))) == [2, 3, 1]
    assert order_p(tree_from_spec(("OR", 0.0, 0.5, 0.5))) == [2, 3, 1]


def test_estimated_cost_single_atom():
    assert estimated_cost(tree_from_spec(0.3)) == 1.0
    assert estimated_cost(tree_from_spec(0.3), [1]) == 1.0


def test_no_or_opt():
    assert [a for a, _ in no_or_opt(tree_from_spec(("AND", 0.7, 0.2)))] == [2, 1]
    assert no_or_opt(tree_from_spec(0.5)) == [(1, None)]
    tree = tree_from_spec(("OR", 0.3, 0.6))
    entries = no_or_opt(tree)
    assert [a for a, _ in entries] == [1, 2]
    # each disjunct is its own scope, evaluated on the parent's full input
    assert entries[0][1] != entries[1][1]
    assert all(scope is not None for _, scope in entries)


def test_no_or_opt_uses_combined_selectivity(example):
    # the disjunction (0.63) is more selective than A (0.82)
    assert [a for a, _ in no_or_opt(example)] == [B, C, D, A]
    assert subtree_selectivity(example, example.root.children[1]) == pytest.approx(0.63, abs=1e-3)


@given(trees(max_n=8, with_costs=True))
def test_order_p_is_permutation(tree):
    assert sorted(order_p(tree)) == list(range(1, tree.n + 1))
    assert sorted(a for a, _ in no_or_opt(tree)) == list(range(1, tree.n + 1))


def _depth_at_most_2(tree):
    return tree.depth() <= 2


@settings(max_examples=40)
@given(trees(max_n=6, with_costs=True).filter(_depth_at_most_2))
def test_depth2_order_p_is_optimal(tree):
    best = min(estimate_ordering(tree, p) for p in itertools.permutations(range(1, tree.n + 1)))
    assert estimate_ordering(tree, order_p(tree)) == pytest.approx(best, abs=1e-9)
    # on such trees the BestD-driven estimate agrees with the subtree recursion
    assert estimated_cost(tree) == pytest.approx(best, abs=1e-9)
