import json
import os
import subprocess
import sys

import numpy as np
import pytest

from seqids.cli import load_model, main
from seqids.hmm import HmmModel
from seqids.io import file_sha256, read_dataset
from seqids.lstm import LSTMTagger


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data" / "windows.jsonl"
    assert run("simulate", "--out", data, "--seed", 4, "--episodes", 30) == 0
    assert run("preprocess", "--in", data, "--top-k", 1, "--out", root / "prep") == 0
    return root, data


def test_simulate_writes_manifest(pipeline):
    root, data = pipeline
    ds = read_dataset(str(data))
    assert len(ds) == 60
    manifest = json.loads((root / "data" / "pipeline_manifest.json").read_text())
    step = manifest["steps"][0]
    assert step["command"] == "simulate" and step["seeds"] == [4]
    assert step["artifacts"]["windows.jsonl"] == file_sha256(str(data))
    assert {"numpy", "scipy", "scikit-learn", "python"} <= set(step["versions"])


def test_simulate_is_reproducible(pipeline, tmp_path):
    _, data = pipeline
    again = tmp_path / "w.jsonl"
    run("simulate", "--out", again, "--seed", 4, "--episodes", 30)
    assert file_sha256(str(again)) == file_sha256(str(data))


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "episodes_per_type": 3, "p_geom": 0.5}))
    assert run("simulate", "--config", cfg, "--out", tmp_path / "w.jsonl") == 0
    assert len(read_dataset(str(tmp_path / "w.jsonl"))) == 6


def test_preprocess_outputs(pipeline):
    root, _ = pipeline
    prep = root / "prep"
    report = json.loads((prep / "attribute_report.json").read_text())
    assert len(report["kept_attributes"]) == 11
    sym = read_dataset(str(prep / "symbolized.jsonl"), symbolized=True)
    assert sym.observations().shape == (60, 10)
    assert sym.observations().max() < 6
    assert sym.attribute_names == [report["ranking"][0][0]]


@pytest.mark.parametrize("method", ["hmm-sup", "hmm-unsup", "rfc"])
def test_train_from_numeric(pipeline, tmp_path, method):
    root, data = pipeline
    out = tmp_path / f"{method}.json"
    assert run("train", "--method", method, "--in", data, "--preprocess", root / "prep",
               "--out", out) == 0
    model = load_model(str(out))
    if method.startswith("hmm"):
        assert set(model) == {"Type1", "Type2"}
        assert all(isinstance(m, HmmModel) and m.n_states == 7 for m in model.values())
    else:
        assert model.predict(np.zeros((1, 1))).shape == (1,)


def test_train_hmm_from_symbolized(pipeline, tmp_path):
    root, _ = pipeline
    out = tmp_path / "m.json"
    assert run("train", "--method", "hmm-sup", "--in", root / "prep" / "symbolized.jsonl",
               "--out", out) == 0
    assert json.loads(out.read_text())["attributes"] is None


def test_train_lstm(pipeline, tmp_path, monkeypatch):
    root, data = pipeline
    monkeypatch.setattr(LSTMTagger.__init__, "__defaults__",
                        (8, 7, 5e-3, 0.9, 0.999, 1e-8, 3, 32, 0))
    out = tmp_path / "lstm.json"
    assert run("train", "--method", "lstm", "--in", data, "--preprocess", root / "prep",
               "--out", out) == 0
    est = load_model(str(out))
    assert est.predict(np.zeros((2, 10, 1))).shape == (2, 10)


def test_unlabeled_data(pipeline, tmp_path, capsys):
    root, _ = pipeline
    src = root / "prep" / "symbolized.jsonl"
    bare = tmp_path / "bare.jsonl"
    lines = [json.loads(l) for l in src.read_text().splitlines()]
    bare.write_text("".join(json.dumps({"observations": r["observations"]}) + "\n" for r in lines))
    (tmp_path / "bare.jsonl.manifest.json").write_text((root / "prep" / "symbolized.jsonl.manifest.json").read_text())
    assert run("train", "--method", "hmm-sup", "--in", bare, "--out", tmp_path / "m.json") == 2
    assert "missing field 'actions'" in capsys.readouterr().err
    assert run("train", "--method", "hmm-unsup", "--in", bare, "--out", tmp_path / "u.json") == 0
    assert set(json.loads((tmp_path / "u.json").read_text())["models"]) == {"all"}


def test_numeric_without_preprocess(pipeline, tmp_path, capsys):
    _, data = pipeline
    assert run("train", "--method", "rfc", "--in", data, "--out", tmp_path / "r.json") == 2
    assert "--preprocess" in capsys.readouterr().err


def test_evaluate_and_report(pipeline, tmp_path, capsys):
    _, data = pipeline
    out = tmp_path / "rep"
    assert run("evaluate", "--dataset", data, "--methods", "hmm-sup,rfc", "--seeds", "0,1",
               "--out", out) == 0
    printed = capsys.readouterr().out
    assert "Supervised HMM" in printed and "RFC" in printed
    assert {"report.csv", "report_attack2.csv", "report.json", "online_curve.csv",
            "pipeline_manifest.json"} <= set(os.listdir(out))
    assert run("report", "--in", out, "--attack-type", "Type2") == 0
    assert "online hmm-sup" in capsys.readouterr().out


def test_online_command(pipeline, tmp_path, capsys):
    _, data = pipeline
    assert run("online", "--dataset", data, "--seeds", "1", "--out", tmp_path / "on") == 0
    assert capsys.readouterr().out.startswith("hmm-sup ")
    assert (tmp_path / "on" / "online_curve.csv").exists()


@pytest.mark.parametrize("argv,needle", [
    (["evaluate", "--seeds", "x"], "invalid seed"),
    (["evaluate", "--methods", "svm"], "unknown method"),
    (["evaluate", "--top-k", "0"], "positive"),
])
def test_bad_evaluate_arguments(pipeline, tmp_path, capsys, argv, needle):
    _, data = pipeline
    assert run(*argv, "--dataset", data, "--out", tmp_path) == 2
    assert needle in capsys.readouterr().err


def test_missing_input(tmp_path, capsys):
    assert run("report", "--in", tmp_path) == 2
    assert "no report" in capsys.readouterr().err


def test_bad_method_choice():
    with pytest.raises(SystemExit) as exc:
        run("train", "--method", "svm", "--in", "x", "--out", "y")
    assert exc.value.code == 2


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "seqids.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("seqids ")
