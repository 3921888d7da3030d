from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predeval.engine import (
    Bitmap,
    BitmapEvaluator,
    ColumnStats,
    Metrics,
    Table,
    apply_atom_exec,
    bm_and,
    bm_diff,
    bm_or,
    estimate_selectivity,
    load_csv,
    with_measured_stats,
)
from predeval.errors import DataError
from predeval.expr import Atom, parse_tree
from predeval.generate import GenConfig, gen_instance
from predeval.oracle import verify_result
from predeval.planner import deepfish, run_no_or_opt, shallowfish, shallowfish_opt


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_types(tmp_path):
    p = _write(tmp_path, "a,b,c\n1,1.5,x\n2,2,y\n3,3,z\n4,4,1\n5,5,2\n")
    t = load_csv(p)
    assert t.row_count == 5
    assert t.columns["a"].dtype.kind == "i"
    assert t.columns["b"].dtype.kind == "f"
    assert t.columns["c"].dtype.kind == "U"


def test_load_csv_mixed_column_falls_back_to_string(tmp_path):
    t = load_csv(_write(tmp_path, "v\n1\n2\nx\n"))
    assert list(t.columns["v"]) == ["1", "2", "x"]


def test_load_csv_quoting(tmp_path):
    t = load_csv(_write(tmp_path, 'name,n\n"Smith, J",1\n"say ""hi""",2\n'))
    assert list(t.columns["name"]) == ["Smith, J", 'say "hi"']


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n3\n", "a,a\n1,2\n"])
def test_load_csv_errors(tmp_path, text):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, text))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv")


def test_table_rejects_ragged_columns():
    with pytest.raises(DataError):
        Table({"a": np.arange(3), "b": np.arange(4)})


def test_estimate_selectivity():
    t = Table({"x": np.arange(100), "k": np.array(["a", "b", "c", "d"] * 25)})
    stats = ColumnStats.full(t)
    assert estimate_selectivity(stats, Atom(1, "x", "<", 50)) == pytest.approx(0.5, abs=0.01)
    assert estimate_selectivity(stats, Atom(1, "x", "<", -1)) == 0.0
    assert estimate_selectivity(stats, Atom(1, "k", "=", "c")) == pytest.approx(0.25, abs=0.02)
    with pytest.raises(DataError):
        estimate_selectivity(stats, Atom(1, "k", "<", 3))
    with pytest.raises(DataError):
        estimate_selectivity(stats, Atom(1, "y", "<", 3))


def test_sampled_stats_close_to_exact():
    rng = np.random.default_rng(0)
    t = Table({"x": rng.integers(0, 1000, 50_000)})
    stats = ColumnStats.sample(t, 5000, seed=1)
    assert stats.sampled and len(stats.values["x"]) == 5000
    assert estimate_selectivity(stats, Atom(1, "x", "<", 300)) == pytest.approx(0.3, abs=0.03)


def test_apply_atom_exec_counts():
    t = Table({"x": np.arange(10)})
    m = Metrics()
    a = Atom(1, "x", "<", 4)
    out = apply_atom_exec(t, a, Bitmap.full(10), m)
    assert out.count() == 4 and m.evaluations == 10
    assert apply_atom_exec(t, a, Bitmap.empty(10), m).count() == 0 and m.evaluations == 10
    again = apply_atom_exec(t, a, out, m)
    assert again == out and m.evaluations == 14
    assert m.evaluations == sum(c for _, c in m.per_step)
    with pytest.raises(DataError):
        apply_atom_exec(t, a, Bitmap.full(5))


def test_bitmap_ops():
    a = Bitmap(np.array([1, 1, 0, 0], dtype=bool))
    e = Bitmap.empty(4)
    assert bm_diff(a, a) == e
    assert bm_or(a, e) == a
    assert bm_and(a, Bitmap.full(4)) == a
    with pytest.raises(DataError):
        bm_and(a, Bitmap.full(3))


@given(st.lists(st.booleans(), min_size=1, max_size=64), st.data())
def test_de_morgan(bits_a, data):
    bits_b = data.draw(st.lists(st.booleans(), min_size=len(bits_a), max_size=len(bits_a)))
    a, b = Bitmap(np.array(bits_a)), Bitmap(np.array(bits_b))
    u = Bitmap.full(len(bits_a))
    assert bm_diff(u, bm_and(a, b)) == bm_or(bm_diff(u, a), bm_diff(u, b))


def test_set_ops_do_not_count_evaluations():
    tree = parse_tree("x < 3 OR x > 6")
    t = Table({"x": np.arange(10)})
    ev = BitmapEvaluator(t, tree)
    ev.union(ev.ground(), ev.empty())
    ev.difference(ev.ground(), ev.ground())
    assert ev.metrics.evaluations == 0


def test_type_mismatch_detected_up_front():
    tree = parse_tree("name < 3")
    with pytest.raises(DataError):
        BitmapEvaluator(Table({"name": np.array(["a", "b"])}), tree)


def test_string_predicates_execute():
    tree = parse_tree("kind = 'b' OR n >= 2")
    t = Table({"kind": np.array(["a", "b", "c"]), "n": np.array([0, 1, 2])})
    tree = with_measured_stats(tree, t)
    plan = shallowfish(tree, BitmapEvaluator(t, tree))
    assert list(plan.result.bits) == [False, True, True]


def test_verify_result_detects_flip_and_handles_empty_table():
    tree, table = gen_instance(GenConfig(2, n_max=6, rng_seed=3, rows=500))
    tree = with_measured_stats(tree, table)
    plan = shallowfish(tree, BitmapEvaluator(table, tree))
    assert verify_result(tree, table, plan.result)
    bits = plan.result.bits.copy()
    bits[17] = not bits[17]
    assert not verify_result(tree, table, Bitmap(bits))
    empty = Table({c: v[:0] for c, v in table.columns.items()})
    ev = BitmapEvaluator(empty, tree)
    res = shallowfish(tree, ev).result
    assert res.count() == 0 and verify_result(tree, empty, res)


@pytest.mark.parametrize("seed", range(12))
def test_plans_on_records(seed):
    tree, table = gen_instance(GenConfig(2 + seed % 3, n_max=9, rng_seed=seed, rows=1500))
    tree = with_measured_stats(tree, table)
    ev = BitmapEvaluator(table, tree, debug=True)
    plan = shallowfish(tree, ev)
    assert verify_result(tree, table, plan.result)
    assert ev.metrics.evaluations == sum(int(s.measure) for s in plan.steps)
    assert ev.max_touches() <= 1
    # the single-pass form reads exactly the same records per atom
    ev2 = BitmapEvaluator(table, tree)
    result, inputs = shallowfish_opt(tree, ev2)
    assert result == plan.result
    assert inputs == {s.atom: s.measure for s in plan.steps}
    for fn in (deepfish, run_no_or_opt):
        ev3 = BitmapEvaluator(table, tree, debug=True)
        assert verify_result(tree, table, fn(tree, ev3).result)
        assert ev3.max_touches() <= 1


@settings(max_examples=25)
@given(st.integers(0, 2**32))
def test_generated_selectivity_matches_assignment(seed):
    tree, table = gen_instance(GenConfig(2, n_max=6, rng_seed=seed, rows=100_000))
    measured = with_measured_stats(tree, table)
    for i in tree.atoms:
        assert measured.selectivity(i) == pytest.approx(tree.selectivity(i), abs=0.01)
