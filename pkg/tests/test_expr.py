from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from predeval.errors import DuplicateAtomError, MissingSelectivityError, ParseError
from predeval.expr import (
    AND,
    LEAF,
    OR,
    RawAnd,
    RawAtom,
    RawNot,
    RawOr,
    depth,
    eval_raw,
    normalize,
    parse,
    parse_tree,
)

from .strategies import trees


def test_parse_builds_raw_tree():
    raw = parse("a < 5 AND (b > 3 OR c = 2)")
    assert isinstance(raw, RawAnd)
    left, right = raw.children
    assert left == RawAtom("a", "<", 5, pos=0)
    assert isinstance(right, RawOr) and len(right.children) == 2


def test_parse_not_and_literals():
    raw = parse("NOT (a < 5)")
    assert isinstance(raw, RawNot) and isinstance(raw.child, RawAtom)
    atom = parse("name = 'O''Brien'")
    assert atom.constant == "O'Brien"
    assert parse("x >= -1.5e2").constant == -150.0


def test_keywords_case_insensitive():
    tree = parse_tree("a < 1 and b < 2 Or not c < 3")
    assert tree.root.kind == OR
    assert tree.atom(3).comparator == ">="


@pytest.mark.parametrize(
    "text, pos",
    [("", 0), ("a <", 3), ("a < 5 AND", 9), ("(a < 5", 6), ("a << 5", 2), ("a < 5 $", 6), ("a ~ 1", 2)],
)
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert exc.value.position == pos


def test_unknown_comparator_message():
    with pytest.raises(ParseError, match="unknown comparator"):
        parse("a => 5")


def test_not_flips_comparator():
    tree = parse_tree("NOT (a < 5)")
    assert tree.root.kind == LEAF
    assert tree.atom(1).text() == "a >= 5"


def test_de_morgan_push_down():
    tree = parse_tree("NOT (a < 5 AND b = 'x')")
    assert tree.root.kind == OR
    assert [tree.atom(i).text() for i in (1, 2)] == ["a >= 5", "b != 'x'"]


def test_same_kind_collapse():
    tree = normalize(RawAnd((RawAtom("a", "<", 5), RawAnd((RawAtom("b", ">", 3), RawAtom("c", "=", 2))))))
    assert tree.root.kind == AND
    assert len(tree.root.children) == 3
    assert all(c.kind == LEAF for c in tree.root.children)


def test_duplicate_atoms_rejected():
    with pytest.raises(DuplicateAtomError, match="a < 5"):
        parse_tree("a < 5 AND a < 5")
    # same column, different constant is fine
    assert parse_tree("a < 5 AND a < 6").n == 2


def test_ids_left_to_right_and_lineage():
    tree = parse_tree("a < 1 AND (b < 2 OR (c < 3 AND d < 4))")
    assert [tree.atom(i).column for i in range(1, 5)] == ["a", "b", "c", "d"]
    lin = tree.lineage(4)
    assert lin[0] is tree.root and lin[-1] is tree.leaf(4)
    for parent, child in zip(lin, lin[1:]):
        assert child in parent.children
        assert child.level == parent.level + 1
    assert tree.root.level == 1


def test_depth_examples():
    assert depth(parse_tree("a < 1")) == 1
    assert depth(parse_tree("a < 1 AND (b < 2 OR c < 3)")) == 2
    assert depth(parse_tree("a < 1 AND (b < 2 OR (c < 3 AND d < 4))")) == 3


def test_missing_selectivity_raises():
    with pytest.raises(MissingSelectivityError):
        parse_tree("a < 1").selectivity(1)


def test_with_stats_and_negated_selectivity():
    tree = parse_tree("NOT a < 1 AND b < 2").with_stats([0.3, 0.4], [2.0, 1.0])
    assert tree.selectivity(1) == 0.3 and tree.atom(1).cost_factor == 2.0
    raw = RawNot(RawAtom("a", "<", 1, 1.0, 0.25))
    assert normalize(raw).selectivity(1) == 0.75


def test_last_applied():
    tree = parse_tree("a < 1 AND (b < 2 OR c < 3)")
    or_node = tree.root.children[1]
    assert tree.last_applied(or_node, [3, 1, 2]) == 3
    assert tree.last_applied(or_node, [3, 1, 2], before=3) == 1
    assert tree.last_applied(or_node, [1], before=2) is None


def _structure_ok(node):
    if node.kind == LEAF:
        return not node.children
    return len(node.children) >= 2 and all(c.kind != node.kind and _structure_ok(c) for c in node.children)


@given(trees(max_n=8))
def test_normalize_idempotent_and_alternating(tree):
    again = normalize(tree)
    assert again.to_text() == tree.to_text()
    assert _structure_ok(tree.root)
    assert sorted(tree.atoms) == list(range(1, tree.n + 1))


@st.composite
def raw_with_nots(draw, max_atoms=6):
    count = draw(st.integers(1, max_atoms))
    atoms = [RawAtom(f"x{k}", "<", 1) for k in range(count)]
    pool = list(atoms)
    while len(pool) > 1 or draw(st.booleans()):
        if len(pool) > 1 and draw(st.booleans()):
            k = draw(st.integers(2, len(pool)))
            kids, pool = pool[:k], pool[k:]
            pool.append(RawAnd(tuple(kids)) if draw(st.booleans()) else RawOr(tuple(kids)))
        else:
            pool[-1] = RawNot(pool[-1])
            if len(pool) == 1 and draw(st.booleans()):
                break
    return pool[0], count


@given(raw_with_nots())
def test_normalize_preserves_truth_on_every_assignment(data):
    raw, count = data
    tree = normalize(raw)
    for bits in itertools.product((0, 1), repeat=count):
        # x < 1 holds exactly when the column value is 0
        row = {f"x{k}": bits[k] for k in range(count)}
        assert eval_raw(raw, row) == tree.evaluate(row)
