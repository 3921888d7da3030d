"""Random predicate trees with matching synthetic tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Table
from .expr import AND, OR, PredicateTree, RawAnd, RawAtom, RawNode, RawOr, depth, normalize

VALUE_RANGE = 1000
MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class GenConfig:
    depth: int = 2
    children_range: tuple[int, int] = (2, 5)
    leaf_probability: float = 0.5
    n_max: int = 16
    selectivity_choices: tuple[float, ...] = field(default=tuple(k / 10 for k in range(1, 10)))
    cost_mode: str = "uniform"
    rng_seed: int = 0
    rows: int = 100_000

    def __post_init__(self):
        lo, hi = self.children_range
        if not 2 <= lo <= hi <= 5:
            raise ValueError(f"children_range {self.children_range} must lie within [2, 5]")
        if self.depth not in (2, 3, 4):
            raise ValueError(f"depth must be 2, 3 or 4, got {self.depth}")
        if not 0.0 <= self.leaf_probability <= 1.0:
            raise ValueError("leaf_probability must lie in [0, 1]")
        if not self.selectivity_choices or not all(0.0 < s < 1.0 for s in self.selectivity_choices):
            raise ValueError("selectivity_choices must be nonempty and inside (0, 1)")
        if self.cost_mode not in ("uniform", "varying"):
            raise ValueError(f"cost_mode must be 'uniform' or 'varying', got {self.cost_mode!r}")
        if self.n_max < self.depth + 1:
            raise ValueError(f"n_max={self.n_max} cannot hold a tree of depth {self.depth}")
        if self.rows < 0:
            raise ValueError("rows must be nonnegative")


def _shape(cfg: GenConfig, rng: np.random.Generator):
    """Nested lists; ``None`` marks a leaf.  One path always has ``cfg.depth``
    operator levels above its leaf."""
    lo, hi = cfg.children_range

    def node(level: int, deep: bool):
        k = int(rng.integers(lo, hi + 1))
        spine = int(rng.integers(k)) if deep else -1
        kids = []
        for j in range(k):
            if level == cfg.depth:
                kids.append(None)
            elif j == spine or rng.random() >= cfg.leaf_probability:
                kids.append(node(level + 1, j == spine))
            else:
                kids.append(None)
        return kids

    return node(1, True)


def _count(shape) -> int:
    return 1 if shape is None else sum(_count(c) for c in shape)


def gen_tree(cfg: GenConfig, rng: np.random.Generator) -> tuple[PredicateTree, np.ndarray]:
    """A tree of exactly ``cfg.depth`` operator levels with at most ``cfg.n_max`` atoms.

    Returns the tree and the integer threshold of each atom (atom k is
    ``c{k} < threshold`` on its own uniform column).
    """
    for _ in range(MAX_ATTEMPTS):
        shape = _shape(cfg, rng)
        if _count(shape) <= cfg.n_max:
            break
    else:
        raise ValueError(f"could not draw a depth-{cfg.depth} tree within {cfg.n_max} atoms")
    root_kind = AND if rng.random() < 0.5 else OR
    atoms: list[RawAtom] = []

    def build(s, kind: str) -> RawNode:
        if s is None:
            k = len(atoms) + 1
            sel = float(rng.choice(cfg.selectivity_choices))
            cost = 1.0 if cfg.cost_mode == "uniform" else float(rng.integers(1, 11))
            a = RawAtom(f"c{k}", "<", int(round(sel * VALUE_RANGE)), cost, sel)
            atoms.append(a)
            return a
        other = OR if kind == AND else AND
        kids = tuple(build(c, other) for c in s)
        return RawAnd(kids) if kind == AND else RawOr(kids)

    tree = normalize(build(shape, root_kind))
    assert depth(tree) == cfg.depth
    return tree, np.array([a.constant for a in atoms], dtype=np.int64)


def gen_table(tree: PredicateTree, rows: int, rng: np.random.Generator) -> Table:
    cols = {}
    for i in range(1, tree.n + 1):
        cols[tree.atom(i).column] = rng.integers(0, VALUE_RANGE, size=rows, dtype=np.int64)
    return Table(cols)


def gen_instance(config: GenConfig) -> tuple[PredicateTree, Table]:
    """Random tree plus a table of ``config.rows`` uniform columns, one per atom.

    The tree carries the assigned selectivities; measure them on the table
    with ``engine.with_measured_stats`` to plan from the realized data.
    """
    rng = np.random.default_rng(config.rng_seed)
    tree, _ = gen_tree(config, rng)
    return tree, gen_table(tree, config.rows, rng)
