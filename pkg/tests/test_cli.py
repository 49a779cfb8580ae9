from __future__ import annotations

import csv
import io
import json

import pytest

from playertrace.cli import main

from .conftest import line


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def usage_exit(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv])
    _, err = capsys.readouterr()
    return exc.value.code, err


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cohort")
    assert main(["synth", "--out", str(d), "--seed", "3", "--students", "3",
                 "--config", _write(d.parent / "gen.json", {"duration_s": [40, 70]})]) == 0
    return d


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def model_path(cohort_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "m.json"
    assert main(["train", "--data", str(cohort_dir), "--tau", "20", "--out", str(out)]) == 0
    return out


def test_missing_manifest_is_a_usage_error(capsys, model_path, cohort_dir):
    code, err = usage_exit(["trace", "--model", model_path, "--trace", cohort_dir / "telemetry.jsonl"],
                           capsys)
    assert code == 1 and "--manifest" in err and "usage:" in err


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert usage_exit(["frobnicate"], capsys)[0] == 1


def test_train_needs_labels_with_trace(capsys, cohort_dir, tmp_path):
    code, _, err = run(["train", "--trace", cohort_dir / "telemetry.jsonl", "--out", tmp_path / "m"], capsys)
    assert code == 1 and "usage" in err


def test_bad_telemetry_is_a_data_error(capsys, tmp_path):
    bad = tmp_path / "t.jsonl"
    bad.write_text(line(0, "level_start") + "\n{broken\n")
    code, _, err = run(["windows", "--trace", bad], capsys)
    assert code == 2 and "data error" in err and "line 2" in err


def test_validate_reports_diagnostics(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    trace.write_text("\n".join([line(0, "level_start"), line(10, "drag_start"), line(20, "level_end")]) + "\n")
    manifest = _write(tmp_path / "m.json", [{"level": "L1", "skills": ["Drag objects"]}])
    code, out, _ = run(["validate", "--trace", trace, "--manifest", manifest], capsys)
    assert code == 0 and out.strip()
    code, _, _ = run(["validate", "--trace", trace, "--manifest", manifest, "--strict"], capsys)
    assert code == 2


def test_trace_outputs_object_or_array(capsys, cohort_dir, model_path, tmp_path):
    tel = cohort_dir / "telemetry.jsonl"
    one = tmp_path / "one.jsonl"
    one.write_text("".join(x for x in tel.read_text().splitlines(keepends=True) if '"s01"' in x))
    code, out, err = run(["trace", "--model", model_path, "--trace", one,
                          "--manifest", cohort_dir / "manifest.json"], capsys)
    assert code == 0 and err.startswith("# playertrace trace ")
    doc = json.loads(out)
    assert doc["student"] == "s01" and len(doc["skills"]) == 21
    assert '"tau_s": 20.0' in err
    code, out, _ = run(["trace", "--model", model_path, "--trace", tel,
                        "--manifest", cohort_dir / "manifest.json", "--per-level"], capsys)
    docs = json.loads(out)
    assert [d["student"] for d in docs] == ["s01", "s02", "s03"]
    assert all("levels" in d for d in docs)


def test_windows_features_predict_rules(capsys, cohort_dir, model_path):
    tel = cohort_dir / "telemetry.jsonl"
    code, out, _ = run(["features", "--trace", tel, "--tau", "20"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0][:4] == ["student", "level", "window", "start_ms"] and len(rows[0]) == 4 + 65
    code, out, _ = run(["windows", "--trace", tel, "--tau", "20"], capsys)
    assert code == 0 and len(out.splitlines()) == len(rows)
    code, out, _ = run(["predict", "--model", model_path, "--trace", tel], capsys)
    pred = list(csv.DictReader(io.StringIO(out)))
    assert len(pred) == len(rows) - 1
    assert {r["label"] for r in pred} <= {"TRIAL_AND_ERROR", "SEQUENTIAL", "PARALLEL"}
    code, out, _ = run(["rules", "--trace", tel, "--tau", "20"], capsys)
    assert code == 0 and len(out.splitlines()) == len(rows) - 1
    assert all("counts" in json.loads(x) for x in out.splitlines())


def test_pfa_round_trip(capsys, cohort_dir, tmp_path):
    params = tmp_path / "pfa.json"
    code, _, _ = run(["pfa-train", "--outcomes", cohort_dir / "binary_outcomes.jsonl", "--out", params],
                     capsys)
    assert code == 0 and json.loads(params.read_text())["mode"] == "modified"
    code, out, _ = run(["pfa-predict", "--params", params, "--outcomes",
                        cohort_dir / "binary_outcomes.jsonl", "--student", "s02"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["student"] == "s02"
    assert all(0.0 <= s["p"] <= 1.0 for s in doc["skills"])
    code, _, err = run(["pfa-predict", "--params", params, "--outcomes",
                        cohort_dir / "binary_outcomes.jsonl", "--student", "nobody"], capsys)
    assert code == 2 and "nobody" in err


def test_export_catalog(capsys):
    code, out, _ = run(["export-catalog", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc) == 21
    assert sum(d["rule"] is None for d in doc) == 6
    code, out, _ = run(["export-catalog"], capsys)
    assert out.startswith("|") or out.startswith("#")


def test_synth_then_experiment2_writes_csv(capsys, tmp_path):
    d = tmp_path / "b"
    assert run(["synth", "--seed", 0, "--students", 17, "--level-set", "B", "--out", d], capsys)[0] == 0
    report = tmp_path / "r.csv"
    code, out, _ = run(["eval", "--experiment", 2, "--data", d, "--algorithm", "naive_bayes",
                        "--tau", 30, "--out", report], capsys)
    assert code == 0 and "ML+R:naive_bayes" in out
    text = report.read_text()
    assert text.startswith("# experiment=2 seed=0\n")
    rows = list(csv.DictReader(x for x in text.splitlines() if not x.startswith("#")))
    methods = {r["method"] for r in rows}
    assert {"ML:naive_bayes", "ML+R:naive_bayes", "R", "baseline_always_one"} <= methods


def test_outputs_are_idempotent(capsys, cohort_dir, tmp_path):
    outs = []
    for k in range(2):
        m = tmp_path / f"m{k}.json"
        run(["train", "--data", cohort_dir, "--algorithm", "bagged_trees", "--seed", 7, "--out", m], capsys)
        t = tmp_path / f"t{k}.json"
        run(["trace", "--model", m, "--trace", cohort_dir / "telemetry.jsonl",
             "--manifest", cohort_dir / "manifest.json", "--out", t], capsys)
        outs.append((m.read_bytes(), t.read_bytes()))
    assert outs[0] == outs[1]


def test_eval_with_train_but_no_data(capsys, cohort_dir):
    code, _, err = run(["eval", "--experiment", 2, "--train", cohort_dir], capsys)
    assert code == 1 and "--data" in err
