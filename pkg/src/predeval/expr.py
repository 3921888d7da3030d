"""Predicate expressions: parsing, normalization, and the interleaved AND/OR tree.

The text grammar is a WHERE-clause subset::

    expr     := and_expr (OR and_expr)*
    and_expr := not_expr (AND not_expr)*
    not_expr := NOT not_expr | '(' expr ')' | IDENT CMP literal
    CMP      := < | <= | > | >= | = | !=
    literal  := number | 'single-quoted string'

Keywords are case-insensitive.  ``normalize`` pushes NOTs down to the
atoms (flipping their comparators), collapses same-kind parents and children
so AND and OR strictly alternate, and numbers atoms 1..n left to right.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

from .errors import DuplicateAtomError, MissingSelectivityError, NormalizationError, ParseError

AND = "AND"
OR = "OR"
LEAF = "LEAF"

COMPARATORS: dict[str, Callable[[Any, Any], Any]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "=": operator.eq,
    "!=": operator.ne,
}

NEGATED = {"<": ">=", ">=": "<", ">": "<=", "<=": ">", "=": "!=", "!=": "="}

Literal = Union[int, float, str]


def format_literal(value: Literal) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return repr(value)


# --------------------------------------------------------------------------
# Raw (unnormalized) trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RawAtom:
    column: str
    comparator: str
    constant: Literal
    cost_factor: float = 1.0
    selectivity: float | None = None
    pos: int = 0

    def text(self) -> str:
        return f"{self.column} {self.comparator} {format_literal(self.constant)}"


@dataclass(frozen=True)
class RawNot:
    child: "RawNode"


@dataclass(frozen=True)
class RawAnd:
    children: tuple["RawNode", ...]


@dataclass(frozen=True)
class RawOr:
    children: tuple["RawNode", ...]


RawNode = Union[RawAtom, RawNot, RawAnd, RawOr]


def eval_raw(node: RawNode, row: Mapping[str, Any]) -> bool:
    """Evaluate an unnormalized tree on one record."""
    if isinstance(node, RawAtom):
        return bool(COMPARATORS[node.comparator](row[node.column], node.constant))
    if isinstance(node, RawNot):
        return not eval_raw(node.child, row)
    if isinstance(node, RawAnd):
        return all(eval_raw(c, row) for c in node.children)
    return any(eval_raw(c, row) for c in node.children)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[<>=!~]+)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not"}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group()
        if kind == "string" and not value.endswith("'"):
            raise ParseError("unterminated string literal", pos)
        if kind == "ident" and value.lower() in _KEYWORDS:
            kind = value.upper()
        if kind != "ws":
            tokens.append(_Token(kind, value, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self, kind: str | None = None) -> _Token:
        tok = self.tokens[self.i]
        if kind is not None and tok.kind != kind:
            what = tok.text or "end of input"
            raise ParseError(f"expected {kind}, found {what!r}", tok.pos)
        self.i += 1
        return tok

    def parse(self) -> RawNode:
        if self.peek().kind == "eof":
            raise ParseError("empty expression", 0)
        node = self.or_expr()
        self.take("eof")
        return node

    def or_expr(self) -> RawNode:
        parts = [self.and_expr()]
        while self.peek().kind == OR:
            self.take()
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else RawOr(tuple(parts))

    def and_expr(self) -> RawNode:
        parts = [self.not_expr()]
        while self.peek().kind == AND:
            self.take()
            parts.append(self.not_expr())
        return parts[0] if len(parts) == 1 else RawAnd(tuple(parts))

    def not_expr(self) -> RawNode:
        tok = self.peek()
        if tok.kind == "NOT":
            self.take()
            return RawNot(self.not_expr())
        if tok.kind == "lparen":
            self.take()
            node = self.or_expr()
            self.take("rparen")
            return node
        return self.comparison()

    def comparison(self) -> RawAtom:
        col = self.take("ident")
        op = self.take("op")
        if op.text not in COMPARATORS:
            raise ParseError(f"unknown comparator {op.text!r}", op.pos)
        lit = self.peek()
        if lit.kind == "number":
            self.take()
            text = lit.text
            value: Literal = float(text) if any(ch in text for ch in ".eE") else int(text)
        elif lit.kind == "string":
            self.take()
            value = lit.text[1:-1].replace("''", "'")
        else:
            raise ParseError(f"expected literal, found {lit.text or 'end of input'!r}", lit.pos)
        return RawAtom(col.text, op.text, value, pos=col.pos)


def parse(text: str) -> RawNode:
    """Parse expression text into an unnormalized tree (NOT nodes allowed)."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Normalized tree
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    id: int
    column: str
    comparator: str
    constant: Literal
    cost_factor: float = 1.0
    selectivity: float | None = None

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not self.cost_factor > 0:
            raise ValueError(f"atom {self.id}: cost_factor must be positive")
        if self.selectivity is not None and not 0.0 <= self.selectivity <= 1.0:
            raise ValueError(f"atom {self.id}: selectivity {self.selectivity} outside [0, 1]")

    def text(self) -> str:
        return f"{self.column} {self.comparator} {format_literal(self.constant)}"

    def holds(self, value: Any) -> bool:
        return bool(COMPARATORS[self.comparator](value, self.constant))


@dataclass(frozen=True, eq=False)
class PredNode:
    """A node of the normalized tree.  Identity (``nid``) is the node key."""

    nid: int
    kind: str
    level: int
    children: tuple["PredNode", ...] = ()
    atom_ref: int | None = None
    atom_ids: frozenset[int] = field(default=frozenset())

    @property
    def is_leaf(self) -> bool:
        return self.kind == LEAF

    def __repr__(self) -> str:
        if self.is_leaf:
            return f"P{self.atom_ref}"
        return f"{self.kind}({', '.join(map(repr, self.children))})"

    def __hash__(self) -> int:
        return hash(self.nid)

    def __eq__(self, other) -> bool:
        return isinstance(other, PredNode) and self.nid == other.nid and self.kind == other.kind


class PredicateTree:
    """Normalized AND/OR tree over unique atoms.  Immutable once built."""

    def __init__(self, root: PredNode, atoms: Mapping[int, Atom]):
        self.root = root
        self._atoms = MappingProxyType(dict(sorted(atoms.items())))
        nodes: list[PredNode] = []
        lineage: dict[int, tuple[PredNode, ...]] = {}
        parent: dict[int, PredNode] = {}

        def walk(node: PredNode, path: tuple[PredNode, ...]):
            nodes.append(node)
            path = path + (node,)
            if node.is_leaf:
                lineage[node.atom_ref] = path
            for c in node.children:
                parent[c.nid] = node
                walk(c, path)

        walk(root, ())
        self.nodes: tuple[PredNode, ...] = tuple(nodes)
        self._lineage = MappingProxyType(lineage)
        self._parent = parent
        if sorted(lineage) != list(range(1, len(lineage) + 1)) or set(lineage) != set(self._atoms):
            raise ValueError("atom ids must be dense 1..n and match the leaves")

    @property
    def atoms(self) -> Mapping[int, Atom]:
        return self._atoms

    @property
    def n(self) -> int:
        return len(self._atoms)

    def atom(self, i: int) -> Atom:
        return self._atoms[i]

    def lineage(self, i: int) -> tuple[PredNode, ...]:
        """Nodes from the root down to the leaf of atom ``i``."""
        return self._lineage[i]

    def leaf(self, i: int) -> PredNode:
        return self._lineage[i][-1]

    def parent(self, node: PredNode) -> PredNode | None:
        return self._parent.get(node.nid)

    def depth(self) -> int:
        return depth(self)

    def selectivity(self, i: int) -> float:
        s = self._atoms[i].selectivity
        if s is None:
            raise MissingSelectivityError(f"atom {i} ({self._atoms[i].text()}) has no selectivity")
        return s

    def has_selectivities(self) -> bool:
        return all(a.selectivity is not None for a in self._atoms.values())

    def last_applied(self, node: PredNode, ordering: Sequence[int], before: int | None = None) -> int | None:
        """Index (1-based) of the last atom under ``node`` in ``ordering[:before-1]``."""
        stop = len(ordering) if before is None else before - 1
        last = None
        for idx, a in enumerate(ordering[:stop], start=1):
            if a in node.atom_ids:
                last = idx
        return last

    def with_stats(
        self,
        selectivities: Mapping[int, float] | Sequence[float] | None = None,
        cost_factors: Mapping[int, float] | Sequence[float] | None = None,
    ) -> "PredicateTree":
        """Copy of the tree with atom selectivities and/or cost factors replaced."""
        sel = _by_id(selectivities, self.n)
        cost = _by_id(cost_factors, self.n)
        atoms = {}
        for i, a in self._atoms.items():
            changes = {}
            if i in sel:
                changes["selectivity"] = float(sel[i])
            if i in cost:
                changes["cost_factor"] = float(cost[i])
            atoms[i] = replace(a, **changes) if changes else a
        return PredicateTree(self.root, atoms)

    def evaluate(self, row: Mapping[str, Any]) -> bool:
        """Evaluate the whole expression on one record."""
        return _eval_node(self, self.root, row)

    def to_raw(self) -> RawNode:
        def conv(node: PredNode) -> RawNode:
            if node.is_leaf:
                a = self._atoms[node.atom_ref]
                return RawAtom(a.column, a.comparator, a.constant, a.cost_factor, a.selectivity)
            kids = tuple(conv(c) for c in node.children)
            return RawAnd(kids) if node.kind == AND else RawOr(kids)

        return conv(self.root)

    def to_text(self) -> str:
        def render(node: PredNode, top: bool) -> str:
            if node.is_leaf:
                return self._atoms[node.atom_ref].text()
            inner = f" {node.kind} ".join(render(c, False) for c in node.children)
            return inner if top else f"({inner})"

        return render(self.root, True)

    def __repr__(self) -> str:
        return f"PredicateTree({self.to_text()})"


def _by_id(values, n: int) -> dict[int, float]:
    if values is None:
        return {}
    if isinstance(values, Mapping):
        return dict(values)
    values = list(values)
    if len(values) != n:
        raise ValueError(f"expected {n} values, got {len(values)}")
    return {i + 1: v for i, v in enumerate(values)}


def _eval_node(tree: PredicateTree, node: PredNode, row: Mapping[str, Any]) -> bool:
    if node.is_leaf:
        a = tree.atom(node.atom_ref)
        return a.holds(row[a.column])
    if node.kind == AND:
        return all(_eval_node(tree, c, row) for c in node.children)
    return any(_eval_node(tree, c, row) for c in node.children)


# --------------------------------------------------------------------------
# Normalization
# --------------------------------------------------------------------------


@dataclass
class _Proto:
    kind: str
    children: list["_Proto"] = field(default_factory=list)
    atom: RawAtom | None = None


def _push_not(node: RawNode, negate: bool) -> _Proto:
    if isinstance(node, RawNot):
        return _push_not(node.child, not negate)
    if isinstance(node, RawAtom):
        if negate:
            flipped = NEGATED.get(node.comparator)
            if flipped is None:
                raise NormalizationError(f"comparator {node.comparator!r} has no complement")
            sel = None if node.selectivity is None else 1.0 - node.selectivity
            node = replace(node, comparator=flipped, selectivity=sel)
        return _Proto(LEAF, atom=node)
    if isinstance(node, (RawAnd, RawOr)):
        kind = AND if isinstance(node, RawAnd) else OR
        if negate:
            kind = OR if kind == AND else AND
        if not node.children:
            raise NormalizationError(f"{kind} node without children")
        kids: list[_Proto] = []
        for c in node.children:
            p = _push_not(c, negate)
            if p.kind == kind:
                kids.extend(p.children)
            else:
                kids.append(p)
        if len(kids) == 1:
            return kids[0]
        return _Proto(kind, kids)
    raise TypeError(f"not an expression node: {node!r}")


def _atom_key(a: RawAtom) -> tuple:
    c = a.constant
    return (a.column, a.comparator, (type(c) is str, c))


def normalize(raw: RawNode | PredicateTree) -> PredicateTree:
    """Negation-normal, strictly alternating tree with atom ids 1..n in leaf order."""
    if isinstance(raw, PredicateTree):
        raw = raw.to_raw()
    proto = _push_not(raw, False)

    atoms: dict[int, Atom] = {}
    seen: dict[tuple, str] = {}
    counter = iter(range(10**9))

    def build(p: _Proto, level: int) -> PredNode:
        nid = next(counter)
        if p.kind == LEAF:
            ra = p.atom
            key = _atom_key(ra)
            if key in seen:
                raise DuplicateAtomError(ra.text())
            seen[key] = ra.text()
            aid = len(atoms) + 1
            atoms[aid] = Atom(aid, ra.column, ra.comparator, ra.constant, ra.cost_factor, ra.selectivity)
            return PredNode(nid, LEAF, level, (), aid, frozenset({aid}))
        kids = tuple(build(c, level + 1) for c in p.children)
        ids = frozenset().union(*(k.atom_ids for k in kids))
        return PredNode(nid, p.kind, level, kids, None, ids)

    root = build(proto, 1)
    return PredicateTree(root, atoms)


def parse_tree(text: str) -> PredicateTree:
    return normalize(parse(text))


def depth(tree: PredicateTree | PredNode) -> int:
    """Operator levels: a flat AND is 1, an AND of ORs of atoms is 2.

    A lone atom also counts as 1.
    """
    node = tree.root if isinstance(tree, PredicateTree) else tree
    return max(1, _height(node))


def _height(node: PredNode) -> int:
    return 0 if node.is_leaf else 1 + max(_height(c) for c in node.children)


def iter_leaves(node: PredNode) -> Iterator[PredNode]:
    if node.is_leaf:
        yield node
    else:
        for c in node.children:
            yield from iter_leaves(c)


def tree_from_spec(spec, columns: Sequence[str] | None = None) -> PredicateTree:
    """Build a tree from a nested literal, for tests and synthetic instances.

    Leaves are a selectivity ``0.3`` or a ``(selectivity, cost_factor)`` pair;
    inner nodes are ``("AND", child, ...)`` / ``("OR", child, ...)``.  Atom
    ``k`` (in leaf order) becomes ``<column k> < k`` on its own column, so
    atoms never collide.
    """
    count = iter(range(1, 10**9))

    def conv(s) -> RawNode:
        if isinstance(s, tuple) and s and isinstance(s[0], str):
            kids = tuple(conv(c) for c in s[1:])
            return RawAnd(kids) if s[0].upper() == AND else RawOr(kids)
        sel, cost = (s, 1.0) if not isinstance(s, tuple) else s
        k = next(count)
        col = columns[k - 1] if columns else f"c{k}"
        return RawAtom(col, "<", k, float(cost), None if sel is None else float(sel))

    return normalize(conv(spec))
