from __future__ import annotations

import csv
import io
import json

import pytest

from predeval.cli import BENCH_FIELDS, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


EXAMPLE = "a < 1 AND (b < 2 OR (c < 3 AND d < 4))"


def test_plan_example_json(capsys):
    code, out, _ = run(capsys, "plan", "--expr", EXAMPLE, "--selectivities", "0.820,0.313,0.469,0.984", "--strategy", "deepfish")
    assert code == 0
    doc = json.loads(out)
    assert doc["strategy"] == "deepfish"
    assert doc["ordering"] == [2, 3, 1, 4]
    assert doc["total_cost"] == pytest.approx(2.586, abs=1e-3)
    assert {"atom", "recipe", "est_fraction", "cost"} <= set(doc["steps"][0])


def test_plan_noforopt_and_oracle(capsys):
    for strategy in ("noforopt", "oracle", "shallowfish"):
        code, out, _ = run(capsys, "plan", "--expr", EXAMPLE, "--selectivities", "0.820 0.313 0.469 0.984", "--strategy", strategy)
        assert code == 0 and json.loads(out)["strategy"] == strategy


def test_unknown_strategy_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--expr", "a < 1", "--strategy", "fastest"])
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_errors_are_one_line(capsys):
    code, _, err = run(capsys, "plan", "--expr", "a < 1 AND a < 1")
    assert code != 0 and err.count("\n") == 1 and "duplicate" in err
    code, _, err = run(capsys, "plan", "--expr", "a < 1")
    assert code != 0 and "selectivity" in err
    code, _, err = run(capsys, "plan", "--expr", "a <")
    assert code != 0 and "position" in err


def test_gen_then_run(tmp_path, capsys):
    out = tmp_path / "inst"
    code, _, _ = run(capsys, "gen", "--depth", "3", "--rows", "800", "--seed", "5", "--out", str(out))
    assert code == 0
    for strategy in ("shallowfish", "deepfish", "noforopt"):
        code, text, _ = run(capsys, "run", "--expr-file", str(out / "instance.expr"), "--data", str(out / "data.csv"), "--strategy", strategy)
        doc = json.loads(text)
        assert code == 0 and doc["verified"] is True
        assert doc["evaluations"] == sum(s["evaluations"] for s in doc["per_step"])


def test_run_example_on_csv(tmp_path, capsys):
    p = tmp_path / "d.csv"
    rows = ["a,b,c,d"] + [f"{i % 5},{i % 7},{i % 3},{i % 11}" for i in range(300)]
    p.write_text("\n".join(rows) + "\n")
    code, text, _ = run(capsys, "run", "--expr", EXAMPLE, "--data", str(p), "--strategy", "deepfish")
    assert code == 0 and json.loads(text)["verified"] is True
    code, _, err = run(capsys, "run", "--expr", "zz < 1", "--data", str(p))
    assert code != 0 and "unknown column" in err


def test_bench_depth2_shallowfish_matches_oracle(capsys):
    code, text, _ = run(capsys, "bench", "--depth", "2", "--instances", "10", "--rows", "2000", "--max-n", "8", "--seed", "11")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == BENCH_FIELDS
    by = {(r["instance"], r["strategy"]): r for r in rows}
    for k in range(10):
        assert by[(str(k), "shallowfish")]["evaluations"] == by[(str(k), "oracle")]["evaluations"]
        assert float(by[(str(k), "deepfish")]["estimated_cost"]) <= float(by[(str(k), "shallowfish")]["estimated_cost"]) + 1e-9


def test_bench_reproducible(capsys, tmp_path):
    args = ["bench", "--depth", "3", "--instances", "3", "--rows", "500", "--seed", "2", "--strategies", "shallowfish,deepfish"]
    run(capsys, *args, "--out", str(tmp_path / "a.csv"))
    run(capsys, *args, "--out", str(tmp_path / "b.csv"))

    def strip(path):
        return [{k: v for k, v in r.items() if k != "wall_time"} for r in csv.DictReader(open(path))]

    assert strip(tmp_path / "a.csv") == strip(tmp_path / "b.csv")


def test_verify(capsys):
    code, text, _ = run(capsys, "verify", "--instances", "10", "--max-n", "6")
    assert code == 0
    assert text.count("PASS") == 4
