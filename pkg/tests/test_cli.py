import json
import math

import numpy as np
import pytest

from opml.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main
from opml.metric import load_metric


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def test_train_defaults(out, capsys):
    assert main(["train", "iris", "--out-dir", str(out)]) == EXIT_OK
    L = load_metric(out / "iris_opml.metric")
    assert L.shape == (4, 4)
    report = json.loads((out / "iris_opml.report.json").read_text())
    assert 0 <= report["test_error"] <= 1 and report["step_counts"]["active"] > 0
    manifest = json.loads((out / "iris_opml.manifest.json").read_text())
    assert manifest["argv"] == ["train", "iris"]
    assert set(manifest["outputs"]) == {"iris_opml.metric", "iris_opml.report.json"}


def test_train_env_output_dir(out, monkeypatch):
    monkeypatch.setenv("OPML_OUTPUT_DIR", str(out))
    assert main(["train", "wine", "--algo", "copml", "--trace"]) == EXIT_OK
    assert (out / "wine_copml.trace.csv").is_file()


def test_train_single_class_csv(tmp_path, out, capsys):
    p = tmp_path / "one.csv"
    p.write_text("a,b,label\n1,2,x\n3,4,x\n5,6,x\n7,9,x\n")
    assert main(["train", str(p), "--out-dir", str(out)]) == EXIT_OK
    assert "no triplets formed" in capsys.readouterr().err
    assert np.array_equal(load_metric(out / "one_opml.metric"), np.eye(2))


def test_replay_identical(out, tmp_path, capsys):
    assert main(["train", "iris", "--trace", "--seed", "3", "--out-dir", str(out)]) == EXIT_OK
    again = tmp_path / "again"
    assert main(["replay", str(out / "iris_opml.manifest.json"), "--out-dir", str(again)]) == EXIT_OK
    assert (out / "iris_opml.metric").read_bytes() == (again / "iris_opml.metric").read_bytes()
    assert "MISMATCH" not in capsys.readouterr().out


def test_replay_detects_changed_output(out, tmp_path):
    main(["train", "iris", "--out-dir", str(out)])
    m = out / "iris_opml.manifest.json"
    doc = json.loads(m.read_text())
    doc["outputs"]["iris_opml.metric"] = "0" * 64
    m.write_text(json.dumps(doc))
    assert main(["replay", str(m), "--out-dir", str(tmp_path / "r")]) == EXIT_VIOLATION


def test_replay_detects_changed_dataset(tmp_path, out):
    p = tmp_path / "d.csv"
    p.write_text("1,2,0\n2,1,1\n1,3,0\n3,1,1\n")
    main(["train", str(p), "--out-dir", str(out)])
    p.write_text("1,2,0\n2,1,1\n1,3,0\n3,2,1\n")
    assert main(["replay", str(out / "d_opml.manifest.json")]) == EXIT_DATA


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["train", "iris", "--gamma", "0.3"]) == EXIT_USAGE
    assert main(["theory", "--check", "pd", "--gamma-range", "0.3", "0.2"]) == EXIT_USAGE
    assert main(["theory", "--check", "nope"]) == EXIT_USAGE
    assert main(["bench", "iris", "--runs", "0"]) == EXIT_USAGE


def test_data_errors(tmp_path, out, capsys):
    assert main(["train", str(tmp_path / "missing.csv"), "--out-dir", str(out)]) == EXIT_DATA
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["train", str(empty), "--out-dir", str(out)]) == EXIT_DATA
    assert "empty dataset" in capsys.readouterr().err


def test_bench_smoke(out, capsys):
    code = main(["bench", "iris", "wine", "--runs", "5", "--grid", "none", "--out-dir", str(out)])
    assert code == EXIT_OK
    rows = (out / "bench.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[0].startswith("dataset,samples,dim,classes,identity_mean")
    for row in rows[1:]:
        assert all(math.isfinite(float(v)) for v in row.split(",")[1:])
    doc = json.loads((out / "bench.json").read_text())
    assert len(doc["reports"]) == 6
    assert (out / "bench.timing.csv").is_file()


def test_bench_identity_column_matches_library(out):
    from opml.data import load_bundled
    from opml.evaluation import repeated_eval

    main(["bench", "iris", "--runs", "3", "--grid", "none", "--algos", "opml", "--out-dir", str(out)])
    doc = json.loads((out / "bench.json").read_text())
    ident = next(r for r in doc["reports"] if r["algo"] == "identity")
    assert ident["per_run_errors"] == repeated_eval(load_bundled("iris"), "identity", runs=3).per_run_errors


def test_bench_missing_dataset_continues(out, capsys):
    assert main(["bench", "iris", "nope.csv", "--runs", "2", "--grid", "none",
                 "--out-dir", str(out)]) == EXIT_DATA
    assert len((out / "bench.csv").read_text().splitlines()) == 2


def test_coldstart_toy(tmp_path, out, capsys):
    p = tmp_path / "toy.csv"
    rng = np.random.default_rng(0)
    rows = [f"{a:.4f},{b:.4f},{lab}" for lab in (0, 1) for a, b in rng.standard_normal((20, 2)) + 3 * lab]
    p.write_text("\n".join(rows) + "\n")
    assert main(["coldstart", str(p), "--parts", "2", "--runs", "2", "--out-dir", str(out)]) == EXIT_OK
    lines = (out / "toy_coldstart.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("toy-2,2,")
    prefix = int(lines[1].split(",")[2])
    assert prefix == 10


def test_theory_all_default_smoke(out, capsys):
    assert main(["theory", "--trials", "100", "--out-dir", str(out)]) == EXIT_OK
    doc = json.loads((out / "theory.json").read_text())
    assert all(c["violations"] == 0 for c in doc["checks"])
    assert "PASS" in (out / "theory.txt").read_text()


def test_timing_smoke(out, capsys):
    code = main(["timing", "--dims", "21", "--scaling-dims", "--samples", "30", "--repeats", "1",
                 "--out-dir", str(out)])
    assert code == EXIT_OK
    doc = json.loads((out / "timing.json").read_text())
    assert doc["median_ms"]["21"] > 0 and doc["reference_ms"]["21"] == 0.026
