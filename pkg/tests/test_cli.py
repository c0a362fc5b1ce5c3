import csv
import json

import pytest

from propdetect.cli import main
from propdetect.config import ConfigError, load_config, parse_config
from propdetect.corpus import read_si_file, read_tc_file


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "fx"
    assert main(["gen-fixture", "--out", str(out)]) == 0
    return out


def test_gen_fixture_layout(data):
    assert (data / "config.json").exists() and (data / "vectors.txt").exists()
    assert len(list((data / "train").glob("article*.txt"))) == 6
    assert read_si_file(data / "train" / "labels-SI.tsv")
    cfg = load_config(data / "config.json")
    assert cfg.word_vectors_path() == (data / "vectors.txt").resolve()
    assert cfg.si.hidden_units == 150 and cfg.tc.hidden_units == 50


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"si": {"hidden": 3}})
    with pytest.raises(ConfigError, match="dropout"):
        parse_config({"si": {"dropout_rate": 1.5}})
    with pytest.raises(ConfigError, match="source"):
        parse_config({"si": {"source": "elmo"}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_dims_follow_sources():
    cfg = parse_config({"si": {"source": "provider"}, "embeddings": {"sentence_dim": 32}})
    assert cfg.si.embedding_dim == 32
    cfg = parse_config({"tc": {"word_source": "table"}, "embeddings": {"word_dim": 50}})
    assert cfg.tc.input_dim == 50


def test_si_train_predict_score(data, tmp_path, capsys):
    run = tmp_path / "run1"
    assert main(["train-si", "--config", str(data / "config.json"), "--train-dir",
                 str(data / "train"), "--dev-dir", str(data / "dev"), "--out", str(run)]) == 0
    for name in ("weights.pt", "config.json", "history.csv", "manifest.json"):
        assert (run / name).exists()
    with open(run / "history.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 50 and rows[-1]["dev_f1"]
    pred = tmp_path / "pred.tsv"
    assert main(["predict-si", "--model", str(run), "--articles", str(data / "dev"),
                 "--out", str(pred)]) == 0
    read_si_file(pred)
    capsys.readouterr()
    gold = data / "dev" / "labels-SI.tsv"
    assert main(["score-si", "--gold", str(gold), "--pred", str(gold)]) == 0
    assert "F1 1.000" in capsys.readouterr().out


def test_tc_train_predict_score(data, tmp_path, capsys):
    run = tmp_path / "tc"
    assert main(["train-tc", "--config", str(data / "config.json"), "--train-dir",
                 str(data / "train"), "--out", str(run), "--mock-embeddings",
                 "--epochs", "10"]) == 0
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["provider"] == "hash" and (run / "labels.json").exists()
    pred = tmp_path / "tc.tsv"
    assert main(["predict-tc", "--model", str(run), "--articles", str(data / "dev"),
                 "--spans", str(data / "dev" / "labels-SI.tsv"), "--out", str(pred)]) == 0
    assert len(read_tc_file(pred)) == len(read_tc_file(data / "dev" / "labels-TC.tsv"))
    capsys.readouterr()
    assert main(["score-tc", "--gold", str(data / "dev" / "labels-TC.tsv"),
                 "--pred", str(pred)]) == 0
    assert "micro" in capsys.readouterr().out


def test_exit_codes(data, tmp_path):
    assert main(["train-si", "--train-dir", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2
    assert main(["score-si", "--gold", str(tmp_path / "x.tsv"), "--pred", str(tmp_path / "y.tsv")]) == 2
    bad_cfg = tmp_path / "cfg.json"
    bad_cfg.write_text(json.dumps({"si": {"hidden_units": 0}}))
    assert main(["train-si", "--config", str(bad_cfg), "--train-dir", str(data / "train"),
                 "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["train-si"])
    assert info.value.code == 2


def test_runtime_failure_exit_1(data, tmp_path, monkeypatch):
    monkeypatch.setenv("PROPDETECT_EMBEDDING_URL", "http://127.0.0.1:9/encode")
    # No --mock-embeddings: the service is unreachable.
    assert main(["train-tc", "--config", str(data / "config.json"), "--train-dir",
                 str(data / "train"), "--out", str(tmp_path / "tc"), "--epochs", "1"]) == 1


def test_compare_and_sweep_cli(data, tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", "--subtask", "TC", "--data", str(data), "--out", str(out),
                 "--mock-embeddings", "--epochs", "3"]) == 0
    with open(out / "compare_TC.csv") as f:
        rows = list(csv.DictReader(f))
    assert [r["variant"] for r in rows] == ["provider+LSTM", "provider+BiLSTM",
                                           "provider-direct", "provider+boosted-trees"]
    assert main(["compare", "--subtask", "SI", "--data", str(data), "--out", str(out),
                 "--variants", "nonsense", "--mock-embeddings"]) == 2
    assert main(["lr-sweep", "--subtask", "SI", "--data", str(data), "--out", str(out),
                 "--rates", "0.01"]) == 2
    assert main(["lr-sweep", "--subtask", "SI", "--data", str(data), "--out", str(out),
                 "--rates", "0.01", "-0.1"]) == 2
    assert main(["lr-sweep", "--subtask", "TC", "--data", str(data), "--out", str(out),
                 "--rates", "0.05", "0.005", "--epochs", "4", "--mock-embeddings"]) == 0
    assert (out / "lr_sweep.png").stat().st_size > 0
    assert "<- best" in capsys.readouterr().out
