"""Per-step input sets (BestD), state maintenance (Update), and plan builders.

The planner is written once against the ``Evaluator`` contract and runs on
three backends: record bitmaps (``engine.BitmapEvaluator``), exact vertex
sets (``vertexsem.VertexEvaluator``), and probability-weighted vertex sets
(``vertexsem.FractionEvaluator``) for estimate-only planning.

Levels follow the tree: the root is level 1, and ``best_d(..., level=0)`` is
the ground set.  For atom ``a`` with lineage ``root .. leaf`` of length L,
the input set of its step is the BestD value at level ``L - 1``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .costmodel import DEFAULT_MODEL, TOL, CostModel
from .evaluator import Evaluator
from .errors import PlanningError
from .expr import AND, PredicateTree, PredNode
from .vertexsem import FractionEvaluator, is_neg_determinable, is_pos_determinable

__all__ = [
    "Evaluator",
    "PlannerState",
    "Plan",
    "PlanStep",
    "best_d",
    "best_d_levels",
    "update",
    "run_ordering",
    "shallowfish",
    "shallowfish_opt",
    "one_lookahead_p",
    "remain_cost",
    "deepfish",
    "estimate_ordering",
    "run_no_or_opt",
    "replay",
]


@dataclass
class PlannerState:
    """Node-keyed caches: exact sets of complete nodes and known-true/false sets."""

    xi_map: dict[int, Any] = field(default_factory=dict)
    delta_plus: dict[int, Any] = field(default_factory=dict)
    delta_minus: dict[int, Any] = field(default_factory=dict)
    applied: list[int] = field(default_factory=list)
    _applied_set: set[int] = field(default_factory=set, repr=False)

    @property
    def applied_set(self) -> set[int]:
        return self._applied_set

    def mark_applied(self, atom_id: int) -> None:
        self.applied.append(atom_id)
        self._applied_set.add(atom_id)

    def copy(self) -> "PlannerState":
        return PlannerState(
            dict(self.xi_map),
            dict(self.delta_plus),
            dict(self.delta_minus),
            list(self.applied),
            set(self._applied_set),
        )


@dataclass
class PlanStep:
    atom: int
    measure: float
    fraction: float
    cost: float
    recipe: str = ""


@dataclass
class Plan:
    strategy: str
    steps: list[PlanStep]
    total_cost: float
    result: Any = None
    state: PlannerState | None = None
    result_recipe: str = ""
    notes: dict = field(default_factory=dict)
    trace: list | None = None

    @property
    def ordering(self) -> list[int]:
        return [s.atom for s in self.steps]

    def to_json(self) -> dict:
        out = {
            "strategy": self.strategy,
            "steps": [
                {"atom": s.atom, "recipe": s.recipe, "est_fraction": _tidy(s.fraction), "cost": _tidy(s.cost)}
                for s in self.steps
            ],
            "total_cost": _tidy(self.total_cost),
        }
        if self.result_recipe:
            out["result"] = self.result_recipe
        if self.notes:
            out["notes"] = self.notes
        return out


def _tidy(x: float) -> float:
    """Drop floating-point noise from reported numbers."""
    return round(x, 12)


# --------------------------------------------------------------------------
# BestD and Update
# --------------------------------------------------------------------------


def _filter_level(node: PredNode, via: PredNode, x, state: PlannerState, ev: Evaluator):
    applied = state.applied_set
    if node.kind == AND:
        for c in node.children:
            if c.atom_ids <= applied:
                try:
                    x = ev.intersect(x, state.xi_map[c.nid])
                except KeyError:
                    raise PlanningError(f"complete node {c!r} has no cached set") from None
            elif c is not via and is_neg_determinable(c, applied):
                try:
                    x = ev.difference(x, state.delta_minus[c.nid])
                except KeyError:
                    raise PlanningError(f"negatively determinable node {c!r} has no cached set") from None
        return x
    known = None
    for c in node.children:
        if c.atom_ids <= applied:
            s = state.xi_map.get(c.nid)
            if s is None:
                raise PlanningError(f"complete node {c!r} has no cached set")
        elif c is not via and is_pos_determinable(c, applied):
            s = state.delta_plus.get(c.nid)
            if s is None:
                raise PlanningError(f"positively determinable node {c!r} has no cached set")
        else:
            continue
        known = s if known is None else ev.union(known, s)
    return x if known is None else ev.difference(x, known)


def best_d_levels(tree: PredicateTree, state: PlannerState, atom_id: int, ev: Evaluator) -> list:
    """BestD values for ``atom_id`` at every level 0 .. L-1 of its lineage."""
    if atom_id in state.applied_set:
        raise PlanningError(f"atom {atom_id} is already applied")
    lineage = tree.lineage(atom_id)
    levels = [ev.ground()]
    for lvl in range(1, len(lineage)):
        levels.append(_filter_level(lineage[lvl - 1], lineage[lvl], levels[-1], state, ev))
    return levels


def best_d(tree: PredicateTree, state: PlannerState, atom_id: int, ev: Evaluator, level: int | None = None):
    """Smallest input set for ``atom_id`` given what the state already knows.

    ``level`` defaults to the leaf's parent level, i.e. the step input.
    """
    levels = best_d_levels(tree, state, atom_id, ev)
    return levels[-1] if level is None else levels[level]


def _fold(ev: Evaluator, op: Callable, sets: list):
    out = sets[0]
    for s in sets[1:]:
        out = op(out, s)
    return out


def update(
    tree: PredicateTree,
    state: PlannerState,
    atom_id: int,
    d_i,
    ev: Evaluator,
    levels: list | None = None,
):
    """Apply ``atom_id`` to ``d_i`` and refresh the caches along its lineage.

    ``levels`` are the BestD values computed for this step; they are
    recomputed when omitted.  Returns the atom's output set.
    """
    if levels is None:
        levels = best_d_levels(tree, state, atom_id, ev)
    lineage = tree.lineage(atom_id)
    leaf = lineage[-1]
    if leaf.nid in state.xi_map:
        raise PlanningError(f"atom {atom_id} cache written twice")
    out = ev.apply(atom_id, d_i)
    state.xi_map[leaf.nid] = out
    state.delta_plus[leaf.nid] = out
    state.delta_minus[leaf.nid] = ev.difference(d_i, out)
    state.mark_applied(atom_id)
    applied = state.applied_set

    for lvl in range(len(lineage) - 1, 0, -1):
        node = lineage[lvl - 1]
        z = levels[lvl - 1]
        kids = node.children
        is_and = node.kind == AND
        if node.atom_ids <= applied:
            if node.nid in state.xi_map:
                raise PlanningError(f"cache for {node!r} written twice")
            parts = [state.xi_map[c.nid] for c in kids]
            state.xi_map[node.nid] = ev.intersect(_fold(ev, ev.intersect if is_and else ev.union, parts), z)
        # Determinability is tracked independently of completeness: a node can
        # be positively and negatively determinable at once, and parents read
        # both caches of their complete children.
        if is_pos_determinable(node, applied):
            if is_and:
                parts = [state.delta_plus[c.nid] for c in kids]
                val = _fold(ev, ev.intersect, parts)
            else:
                parts = [state.delta_plus[c.nid] for c in kids if c.nid in state.delta_plus]
                val = _fold(ev, ev.union, parts)
            state.delta_plus[node.nid] = ev.intersect(val, z)
        if is_neg_determinable(node, applied):
            if is_and:
                parts = [state.delta_minus[c.nid] for c in kids if c.nid in state.delta_minus]
                val = _fold(ev, ev.union, parts)
            else:
                parts = [state.delta_minus[c.nid] for c in kids]
                val = _fold(ev, ev.intersect, parts)
            state.delta_minus[node.nid] = ev.intersect(val, z)
    return out


# --------------------------------------------------------------------------
# Recipe tracing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Traced:
    value: Any
    name: str


class _RecipeTracer(Evaluator):
    """Wraps an evaluator and names every derived set, so a plan can record
    how each step input is built from earlier step outputs."""

    def __init__(self, inner: Evaluator):
        self.inner = inner
        self.name = inner.name
        self.defs: dict[str, str] = {}
        self.emitted: set[str] = {"U", "{}"}
        # names of sets known to contain each named set
        self.supersets: dict[str, frozenset[str]] = {}
        self._count = 0
        self._ground = _Traced(inner.ground(), "U")
        self._empty = _Traced(inner.empty(), "{}")

    def _sup(self, name: str) -> frozenset[str]:
        return self.supersets.get(name, frozenset((name,)))

    def _new(self, value, expr: str, deps: tuple[str, ...], within: frozenset[str] = frozenset()) -> _Traced:
        self._count += 1
        name = f"t{self._count}"
        self.defs[name] = (expr, deps)
        self.supersets[name] = within | {name}
        return _Traced(value, name)

    def ground(self):
        return self._ground

    def empty(self):
        return self._empty

    def apply(self, atom_id, s):
        name = f"o{atom_id}"
        # step outputs are bound by the step itself when replaying
        self.emitted.add(name)
        self.supersets[name] = frozenset((name,)) | self._sup(s.name)
        return _Traced(self.inner.apply(atom_id, s.value), name)

    def intersect(self, a, b):
        if a.name == "U" or a.name == b.name:
            return b
        if b.name == "U":
            return a
        if "{}" in (a.name, b.name):
            return self._empty
        if b.name in self._sup(a.name):
            return a
        if a.name in self._sup(b.name):
            return b
        return self._new(
            self.inner.intersect(a.value, b.value), f"{a.name} & {b.name}", (a.name, b.name), self._sup(a.name) | self._sup(b.name)
        )

    def union(self, a, b):
        if a.name == "{}" or a.name == b.name:
            return b
        if b.name == "{}":
            return a
        return self._new(
            self.inner.union(a.value, b.value), f"{a.name} | {b.name}", (a.name, b.name), self._sup(a.name) & self._sup(b.name)
        )

    def difference(self, a, b):
        if b.name == "{}":
            return a
        if a.name == "{}" or a.name == b.name:
            return self._empty
        return self._new(self.inner.difference(a.value, b.value), f"{a.name} - {b.name}", (a.name, b.name), self._sup(a.name))

    def measure(self, s):
        return self.inner.measure(s.value)

    def total(self):
        return self.inner.total()

    def same(self, a, b):
        return self.inner.same(a.value, b.value)

    def subset(self, a, b):
        return self.inner.subset(a.value, b.value)

    def recipe(self, target: _Traced) -> str:
        order: list[str] = []

        def visit(name: str):
            if name in self.emitted:
                return
            expr, deps = self.defs[name]
            for d in deps:
                visit(d)
            self.emitted.add(name)
            order.append(f"{name} = {expr}")

        visit(target.name)
        order.append(f"-> {target.name}")
        return "; ".join(order)


def _unwrap(s):
    return s.value if isinstance(s, _Traced) else s


# --------------------------------------------------------------------------
# Plan builders
# --------------------------------------------------------------------------


def _cost(model: CostModel, tree: PredicateTree, atom_id: int, measure: float, ev: Evaluator) -> float:
    return model.atom_cost(tree.atom(atom_id).cost_factor, measure, ev.total())


def run_ordering(
    tree: PredicateTree,
    ordering: Sequence[int],
    ev: Evaluator,
    model: CostModel = DEFAULT_MODEL,
    strategy: str = "ordering",
    record_recipes: bool = False,
    trace: bool = False,
) -> Plan:
    """Apply the atoms in ``ordering``, each to its BestD input set.

    With ``trace=True`` the returned plan carries, per step, the BestD values
    at every level and snapshots of the determinability caches.
    """
    if sorted(ordering) != list(range(1, tree.n + 1)):
        raise ValueError(f"ordering {list(ordering)} is not a permutation of atoms 1..{tree.n}")
    tracer = _RecipeTracer(ev) if record_recipes else None
    run_ev = tracer or ev
    state = PlannerState()
    steps: list[PlanStep] = []
    records = [] if trace else None
    total_measure = run_ev.total()
    for atom_id in ordering:
        levels = best_d_levels(tree, state, atom_id, run_ev)
        d_i = levels[-1]
        m = run_ev.measure(d_i)
        recipe = tracer.recipe(d_i) if tracer else ""
        update(tree, state, atom_id, d_i, run_ev, levels)
        if records is not None:
            records.append(
                {
                    "atom": atom_id,
                    "levels": [_unwrap(s) for s in levels],
                    "delta_plus": {k: _unwrap(v) for k, v in state.delta_plus.items()},
                    "delta_minus": {k: _unwrap(v) for k, v in state.delta_minus.items()},
                }
            )
        steps.append(PlanStep(atom_id, m, m / total_measure if total_measure else 0.0, _cost(model, tree, atom_id, m, run_ev), recipe))
    root_set = state.xi_map[tree.root.nid]
    result_recipe = tracer.recipe(root_set) if tracer else ""
    if tracer:
        state = PlannerState(
            {k: _unwrap(v) for k, v in state.xi_map.items()},
            {k: _unwrap(v) for k, v in state.delta_plus.items()},
            {k: _unwrap(v) for k, v in state.delta_minus.items()},
            list(state.applied),
            set(state.applied_set),
        )
    return Plan(
        strategy,
        steps,
        sum(s.cost for s in steps),
        result=_unwrap(root_set),
        state=state,
        result_recipe=result_recipe,
        trace=records,
    )


def estimate_ordering(tree: PredicateTree, ordering: Sequence[int], model: CostModel = DEFAULT_MODEL) -> float:
    """Expected cost of ``ordering`` with BestD inputs under the independence model."""
    return run_ordering(tree, ordering, FractionEvaluator.for_tree(tree), model).total_cost


def shallowfish(
    tree: PredicateTree,
    ev: Evaluator | None = None,
    model: CostModel = DEFAULT_MODEL,
    record_recipes: bool = False,
    trace: bool = False,
) -> Plan:
    """OrderP ordering, BestD inputs.  Optimal for trees of depth <= 2."""
    from .orderp import order_p

    ev = ev or FractionEvaluator.for_tree(tree)
    return run_ordering(tree, order_p(tree), ev, model, "shallowfish", record_recipes, trace)


def _order_children(node: PredNode, position: dict[int, int]) -> list[PredNode]:
    return sorted(node.children, key=lambda c: min(position[a] for a in c.atom_ids))


def shallowfish_opt(
    tree: PredicateTree,
    ev: Evaluator | None = None,
    ordering: Sequence[int] | None = None,
) -> tuple[Any, dict[int, float]]:
    """Single-traversal ShallowFish.

    Conjunctions thread the shrinking set through their children; disjunctions
    hand each child only what earlier siblings have not already accepted.
    Returns the result set and the input measure of every atom.
    """
    from .orderp import order_p

    ev = ev or FractionEvaluator.for_tree(tree)
    ordering = list(ordering) if ordering is not None else order_p(tree)
    position = {a: k for k, a in enumerate(ordering)}
    inputs: dict[int, float] = {}

    def process(node: PredNode, d):
        if node.is_leaf:
            inputs[node.atom_ref] = ev.measure(d)
            return ev.apply(node.atom_ref, d)
        kids = _order_children(node, position)
        if node.kind == AND:
            x = d
            for c in kids:
                x = process(c, x)
            return x
        x = ev.empty()
        for c in kids:
            x = ev.union(x, process(c, ev.difference(d, x)))
        return x

    return process(tree.root, ev.ground()), inputs


def remain_cost(
    tree: PredicateTree,
    node: PredNode,
    state: PlannerState,
    ev: Evaluator,
    model: CostModel = DEFAULT_MODEL,
) -> float:
    """Cost of applying every unapplied atom under ``node`` to its current BestD set."""
    if node.is_leaf:
        if node.atom_ref in state.applied_set:
            return 0.0
        d = best_d(tree, state, node.atom_ref, ev)
        return _cost(model, tree, node.atom_ref, ev.measure(d), ev)
    return sum(remain_cost(tree, c, state, ev, model) for c in node.children)


def one_lookahead_p(
    tree: PredicateTree,
    state: PlannerState,
    ev: Evaluator,
    model: CostModel = DEFAULT_MODEL,
) -> int:
    """Next atom with the best (remaining-cost reduction) / (application cost) ratio.

    Candidates are scanned in ascending id; ties keep the earlier one.  When
    no candidate has a positive ratio the cheapest application wins.
    """
    candidates = [a for a in range(1, tree.n + 1) if a not in state.applied_set]
    if not candidates:
        raise PlanningError("no unapplied atoms left")
    if len(candidates) == 1:
        return candidates[0]
    orig = remain_cost(tree, tree.root, state, ev, model)
    best, best_ratio = None, 0.0
    cheapest, cheapest_cost = None, math.inf
    for a in candidates:
        levels = best_d_levels(tree, state, a, ev)
        d = levels[-1]
        c = _cost(model, tree, a, ev.measure(d), ev)
        trial = state.copy()
        update(tree, trial, a, d, ev, levels)
        new = remain_cost(tree, tree.root, trial, ev, model)
        gain = orig - new
        if c > 0:
            ratio = gain / c
        else:
            ratio = math.inf if gain >= 0 else -math.inf
        if ratio > best_ratio + TOL:
            best, best_ratio = a, ratio
        if c < cheapest_cost - TOL:
            cheapest, cheapest_cost = a, c
    return best if best is not None else cheapest


def deepfish(
    tree: PredicateTree,
    ev: Evaluator | None = None,
    model: CostModel = DEFAULT_MODEL,
    record_recipes: bool = False,
) -> Plan:
    """Hybrid of the one-atom lookahead plan and ShallowFish.

    Both candidate plans are built and priced under the independence model;
    the cheaper ordering wins (ShallowFish on ties).  If ``ev`` is an exact
    backend, the winning ordering is then executed on it once.
    """
    est = FractionEvaluator.for_tree(tree)
    state = PlannerState()
    look_cost = 0.0
    for _ in range(tree.n):
        a = one_lookahead_p(tree, state, est, model)
        levels = best_d_levels(tree, state, a, est)
        look_cost += _cost(model, tree, a, est.measure(levels[-1]), est)
        update(tree, state, a, levels[-1], est, levels)
    lookahead_order = list(state.applied)

    shallow = shallowfish(tree, est, model)
    if look_cost < shallow.total_cost - TOL:
        chosen, source, est_cost = lookahead_order, "lookahead", look_cost
    else:
        chosen, source, est_cost = shallow.ordering, "shallowfish", shallow.total_cost

    target = ev if ev is not None else est
    plan = run_ordering(tree, chosen, target, model, "deepfish", record_recipes)
    plan.notes.update(
        {
            "chosen": source,
            "lookahead_ordering": lookahead_order,
            "lookahead_cost": look_cost,
            "shallowfish_ordering": shallow.ordering,
            "shallowfish_cost": shallow.total_cost,
            "estimated_cost": est_cost,
        }
    )
    return plan


def run_no_or_opt(tree: PredicateTree, ev: Evaluator | None = None, model: CostModel = DEFAULT_MODEL) -> Plan:
    """Execute the no-bypass strategy: conjunctions by increasing selectivity,
    every disjunct over its parent's full input."""
    from .orderp import subtree_selectivity

    ev = ev or FractionEvaluator.for_tree(tree)
    steps: list[PlanStep] = []
    total = ev.total()

    def run(node: PredNode, d):
        if node.is_leaf:
            m = ev.measure(d)
            steps.append(PlanStep(node.atom_ref, m, m / total if total else 0.0, _cost(model, tree, node.atom_ref, m, ev)))
            return ev.apply(node.atom_ref, d)
        if node.kind == AND:
            kids = sorted(node.children, key=lambda c: (subtree_selectivity(tree, c), min(c.atom_ids)))
            x = d
            for c in kids:
                x = run(c, x)
            return x
        x = ev.empty()
        for c in node.children:
            x = ev.union(x, run(c, d))
        return x

    result = run(tree.root, ev.ground())
    return Plan("noforopt", steps, sum(s.cost for s in steps), result=result)


def replay(plan_json: dict, ev: Evaluator) -> tuple[Any, list[float]]:
    """Re-execute a serialized plan's recipes without re-planning.

    Returns the result set and each step's input measure.
    """
    env: dict[str, Any] = {"U": ev.ground(), "{}": ev.empty()}
    ops = {"&": ev.intersect, "|": ev.union, "-": ev.difference}

    def run(recipe: str):
        target = None
        for part in recipe.split(";"):
            part = part.strip()
            if part.startswith("->"):
                target = part[2:].strip()
                continue
            name, expr = (p.strip() for p in part.split("=", 1))
            left, op, right = expr.split()
            env[name] = ops[op](env[left], env[right])
        if target is None:
            raise ValueError(f"recipe without target: {recipe!r}")
        return env[target]

    measures = []
    for step in plan_json["steps"]:
        d = run(step["recipe"])
        measures.append(ev.measure(d))
        env[f"o{step['atom']}"] = ev.apply(step["atom"], d)
    return run(plan_json["result"]), measures


def timed(fn: Callable, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
