"""Command-line entry point: gen, plan, run, bench, verify."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .costmodel import CostModel, VARIANTS
from .engine import BitmapEvaluator, ColumnStats, Table, load_csv, with_measured_stats
from .errors import PredevalError
from .expr import PredicateTree, parse_tree
from .generate import GenConfig, gen_instance, gen_tree
from .oracle import (
    MAX_EXHAUSTIVE_N,
    bestd_minimality,
    brute_prefix,
    exhaustive_optimal,
    sorted_chain_cost,
    verify_result,
)
from .planner import Plan, deepfish, run_no_or_opt, run_ordering, shallowfish
from .vertexsem import FractionEvaluator, VertexEvaluator, xi

STRATEGIES = ("shallowfish", "deepfish", "noforopt", "oracle")
BENCH_FIELDS = ["instance", "strategy", "n_atoms", "depth", "evaluations", "estimated_cost", "wall_time"]


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(x) for x in text.replace(",", " ").split()]


def _model(args, total: int | None = None) -> CostModel:
    return CostModel(args.cost_model, args.epsilon, args.kappa, 0.0, args.theta, total)


def _load_tree(args) -> PredicateTree:
    if args.expr is not None and args.expr_file is not None:
        raise PredevalError("give either --expr or --expr-file, not both")
    if args.expr_file is not None:
        try:
            text = Path(args.expr_file).read_text()
        except OSError as e:
            raise PredevalError(f"cannot read {args.expr_file}: {e.strerror}") from None
    elif args.expr is not None:
        text = args.expr
    else:
        raise PredevalError("an expression is required (--expr or --expr-file)")
    tree = parse_tree(text)
    tree = tree.with_stats(_floats(args.selectivities), _floats(args.costs))
    return tree


def _planned(tree: PredicateTree, strategy: str, ev, model: CostModel) -> Plan:
    if strategy == "shallowfish":
        return shallowfish(tree, ev, model, record_recipes=True)
    if strategy == "deepfish":
        return deepfish(tree, ev, model, record_recipes=True)
    if strategy == "noforopt":
        return run_no_or_opt(tree, ev, model)
    rep = exhaustive_optimal(tree, FractionEvaluator.for_tree(tree), model)
    plan = run_ordering(tree, rep.best_ordering, ev, model, "oracle", record_recipes=True)
    plan.notes["candidate_count"] = rep.candidate_count
    return plan


def cmd_gen(args) -> int:
    cfg = GenConfig(args.depth, leaf_probability=args.leaf_probability, n_max=args.max_n,
                    cost_mode=args.cost_mode, rng_seed=args.seed, rows=args.rows)
    tree, table = gen_instance(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "instance.expr").write_text(tree.to_text() + "\n")
    table.to_csv(out / "data.csv")
    meta = {
        "seed": args.seed,
        "depth": tree.depth(),
        "n_atoms": tree.n,
        "selectivities": [tree.selectivity(i) for i in range(1, tree.n + 1)],
        "costs": [tree.atom(i).cost_factor for i in range(1, tree.n + 1)],
    }
    (out / "instance.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {out}/instance.expr, data.csv, instance.json ({tree.n} atoms, {table.row_count} rows)")
    return 0


def _tree_with_data(args) -> tuple[PredicateTree, Table | None]:
    tree = _load_tree(args)
    table = None
    if args.data is not None:
        table = load_csv(args.data)
        stats = ColumnStats.sample(table, args.sample, args.seed) if args.sample else ColumnStats.full(table)
        tree = tree.with_stats(_floats(args.selectivities)) if args.selectivities else with_measured_stats(tree, stats)
        tree = tree.with_stats(None, _floats(args.costs))
    return tree, table


def cmd_plan(args) -> int:
    tree, table = _tree_with_data(args)
    model = _model(args, 1)
    plan = _planned(tree, args.strategy, FractionEvaluator.for_tree(tree), model)
    doc = plan.to_json()
    doc["ordering"] = plan.ordering
    doc["atoms"] = {str(i): tree.atom(i).text() for i in tree.atoms}
    print(json.dumps(doc, indent=2))
    return 0


def cmd_run(args) -> int:
    if args.data is None:
        raise PredevalError("run needs --data")
    tree, table = _tree_with_data(args)
    model = _model(args, table.row_count)
    ev = BitmapEvaluator(table, tree)
    t0 = time.perf_counter()
    plan = _planned(tree, args.strategy, ev, model)
    ev.metrics.wall_time = time.perf_counter() - t0
    doc = ev.metrics.to_json()
    doc.update({"strategy": args.strategy, "ordering": plan.ordering, "matches": int(plan.result.count())})
    doc["verified"] = verify_result(tree, table, plan.result)
    print(json.dumps(doc, indent=2))
    return 0 if doc["verified"] else 1


def _estimated(tree: PredicateTree, plan: Plan, strategy: str, model: CostModel) -> float:
    if strategy == "noforopt":
        return run_no_or_opt(tree, None, model).total_cost
    if strategy == "deepfish":
        return plan.notes["estimated_cost"]
    return run_ordering(tree, plan.ordering, FractionEvaluator.for_tree(tree), model).total_cost


def bench_rows(args) -> list[dict]:
    rows = []
    strategies = [s.strip() for s in args.strategies.split(",")]
    for s in strategies:
        if s not in STRATEGIES:
            raise PredevalError(f"unknown strategy {s!r}; expected one of {', '.join(STRATEGIES)}")
    for k in range(args.instances):
        cfg = GenConfig(args.depth, leaf_probability=args.leaf_probability, n_max=args.max_n,
                        cost_mode=args.cost_mode, rng_seed=args.seed + k, rows=args.rows)
        tree, table = gen_instance(cfg)
        tree = with_measured_stats(tree, table)
        model = _model(args, table.row_count)
        est_model = _model(args, 1)
        for s in strategies:
            if s == "oracle" and tree.n > args.oracle_max_n:
                continue
            ev = BitmapEvaluator(table, tree)
            t0 = time.perf_counter()
            plan = _planned(tree, s, ev, model)
            wall = time.perf_counter() - t0
            rows.append({
                "instance": k,
                "strategy": s,
                "n_atoms": tree.n,
                "depth": tree.depth(),
                "evaluations": ev.metrics.evaluations,
                "estimated_cost": f"{_estimated(tree, plan, s, est_model):.12g}",
                "wall_time": f"{wall:.6f}",
            })
    return rows


def cmd_bench(args) -> int:
    rows = bench_rows(args)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _verify_checks(args):
    rng = np.random.default_rng(args.seed)
    n_max = min(args.max_n, 7)

    def prefix_lemma():
        for _ in range(args.instances):
            n = int(rng.integers(1, n_max + 1))
            atoms = [(float(rng.uniform(0.1, 10)), float(rng.uniform(0.01, 0.99))) for _ in range(n)]
            for kind in ("AND", "OR"):
                rep = brute_prefix(kind, atoms)
                if abs(sorted_chain_cost(kind, atoms) - rep.best_cost) > 1e-9 * max(1.0, rep.best_cost):
                    return False
        return True

    def depth2_optimal():
        for k in range(args.instances):
            cfg = GenConfig(2, n_max=min(args.max_n, MAX_EXHAUSTIVE_N), rng_seed=args.seed + k, rows=0)
            tree, _ = gen_tree(cfg, np.random.default_rng(cfg.rng_seed))
            rep = exhaustive_optimal(tree, FractionEvaluator.for_tree(tree), against=shallowfish(tree).total_cost)
            if not rep.matched:
                return False
        return True

    def vertex_correctness():
        for k in range(args.instances):
            cfg = GenConfig(int(rng.integers(2, 5)), n_max=min(args.max_n, 6), rng_seed=args.seed + k, rows=0)
            tree, _ = gen_tree(cfg, np.random.default_rng(cfg.rng_seed))
            ev = VertexEvaluator(tree.n)
            truth = xi(tree.root, ev.ground())
            order = [int(a) for a in rng.permutation(np.arange(1, tree.n + 1))]
            if run_ordering(tree, order, ev).result != truth or deepfish(tree, ev).result != truth:
                return False
        return True

    def minimality():
        for k in range(min(args.instances, 50)):
            cfg = GenConfig(2, children_range=(2, 2), n_max=4, rng_seed=args.seed + k, rows=0)
            tree, _ = gen_tree(cfg, np.random.default_rng(cfg.rng_seed))
            order = [int(a) for a in rng.permutation(np.arange(1, tree.n + 1))]
            if not bestd_minimality(tree, order).ok:
                return False
        return True

    return [
        ("prefix-ordering lemma (AND/OR chains)", prefix_lemma),
        ("depth-2 ShallowFish optimality", depth2_optimal),
        ("vertex-set correctness", vertex_correctness),
        ("BestD minimality (n <= 4)", minimality),
    ]


def cmd_verify(args) -> int:
    failed = 0
    for name, check in _verify_checks(args):
        ok = check()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="predeval", description="Plan and run boolean predicate evaluation over columnar data.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--cost-model", choices=VARIANTS, default="simplified", help="how an atom application is charged (default: simplified)")
        sp.add_argument("--kappa", type=float, default=0.0, help="fixed overhead added to every atom application")
        sp.add_argument("--epsilon", type=float, default=0.0, help="per-record cost of a set operation")
        sp.add_argument("--theta", type=float, default=1.0, help="hdd model: input fraction above which a full scan is charged")
        sp.add_argument("--seed", type=int, default=0, help="random seed")

    def expr_args(sp):
        sp.add_argument("--expr", help="predicate expression, e.g. \"(a < 5 or b = 'x') and c >= 2\"")
        sp.add_argument("--expr-file", help="file holding the expression")
        sp.add_argument("--data", help="CSV file with a header row")
        sp.add_argument("--selectivities", help="per-atom selectivities in atom id order")
        sp.add_argument("--costs", help="per-atom cost factors in atom id order")
        sp.add_argument("--sample", type=int, default=0, help="estimate selectivities from this many sampled rows")
        sp.add_argument("--strategy", choices=STRATEGIES, default="shallowfish", help="planning strategy (default: shallowfish)")

    def gen_args(sp):
        sp.add_argument("--depth", type=int, choices=(2, 3, 4), default=2, help="operator levels in generated trees")
        sp.add_argument("--rows", type=int, default=100_000, help="records per generated table")
        sp.add_argument("--max-n", type=int, default=16, help="maximum atoms per generated tree")
        sp.add_argument("--leaf-probability", type=float, default=0.5, help="chance a non-spine child above the last level is a leaf")
        sp.add_argument("--cost-mode", choices=("uniform", "varying"), default="uniform", help="unit cost factors, or integers 1..10")

    sp = sub.add_parser("gen", help="write a random instance (expression, CSV data, stats)")
    common(sp)
    gen_args(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("plan", help="print a plan as JSON")
    common(sp)
    expr_args(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="execute a strategy on CSV data and print metrics")
    common(sp)
    expr_args(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bench", help="sweep random instances and strategies, emit CSV")
    common(sp)
    gen_args(sp)
    sp.add_argument("--instances", type=int, default=500, help="number of random instances")
    sp.add_argument("--strategies", default=",".join(STRATEGIES), help="comma-separated strategies to run")
    sp.add_argument("--oracle-max-n", type=int, default=MAX_EXHAUSTIVE_N, help="skip the oracle on trees with more atoms")
    sp.add_argument("--out", help="CSV output path (default: stdout)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("verify", help="run the brute-force oracle checks")
    common(sp)
    sp.add_argument("--max-n", type=int, default=MAX_EXHAUSTIVE_N, help="maximum atoms per checked tree")
    sp.add_argument("--instances", type=int, default=100, help="random trees per check")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PredevalError, ValueError) as e:
        print(f"predeval: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
