import importlib.util
import json

import numpy as np
import pytest

from madlearn import cli
from madlearn.data import read_embeddings

FAST = ["--epochs", "3", "--eval-every", "1", "--hits-k", "10", "--dim", "4"]


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def test_train_writes_outputs(tmp_path):
    assert run(tmp_path, "train", "--dataset", "karate", "--seed", "1", *FAST) == 0
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["seed"] == 1 and cfg["mad"]["dim"] == 4 and cfg["train"]["epochs"] == 3
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert [m["epoch"] for m in metrics] == [1, 2, 3]
    assert (tmp_path / "model.bin").exists()


def test_train_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "train", "--seed", "7", *FAST) == 0
    assert run(b, "train", "--seed", "7", *FAST) == 0
    assert (a / "metrics.json").read_bytes() == (b / "metrics.json").read_bytes()


def test_config_reproduces_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "train", "--seed", "2", "--aggregator", "mean", *FAST) == 0
    assert run(b, "train", "--config", str(a / "config.json")) == 0
    assert (a / "metrics.json").read_bytes() == (b / "metrics.json").read_bytes()
    assert json.loads((b / "config.json").read_text())["mad"]["aggregator"] == "mean"


def test_env_seed_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("MAD_SEED", "5")
    assert run(tmp_path, "train", "--seed", "1", *FAST) == 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 5


def test_paper_preset(tmp_path):
    assert run(tmp_path, "train", "--preset", "paper", "--epochs", "1", "--hits-k", "10") == 0
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert (cfg["mad"]["heads"], cfg["mad"]["dim"]) == (12, 12)


def test_eval_and_knn(tmp_path, capsys):
    assert run(tmp_path, "train", *FAST) == 0
    model = str(tmp_path / "model.bin")
    assert cli.main(["eval", "--model", model, "--hits-k", "10", "--out", str(tmp_path / "ev")]) == 0
    result = json.loads((tmp_path / "ev" / "eval.json").read_text())
    assert set(result["hits"]) == {"valid", "test"}
    capsys.readouterr()
    assert cli.main(["knn", "--model", model, "--node", "0", "--k", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(int(line.split()[0]) != 0 for line in lines)


def test_export_embeddings(tmp_path):
    assert run(tmp_path, "export-embeddings", "--dim", "2", "--epochs", "2", "--hits-k", "10") == 0
    emb = read_embeddings(tmp_path / "embeddings.csv")
    assert emb["pos"].shape == (1, 34, 2)
    assert np.all(np.isfinite(emb["pos"])) and np.all(np.isfinite(emb["grad"]))
    labels = (tmp_path / "node_labels.csv").read_text().splitlines()
    assert labels[0] == "node,label" and len(labels) == 35


def test_ablate_small(tmp_path):
    code = run(tmp_path, "ablate", "--grid", "fig3b", "--seeds", "1", "--epochs", "2", "--hits-k", "10", "--dim", "4")
    assert code == 0
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert rows[0].startswith("seed,epoch")
    summary = json.loads((tmp_path / "ablation_summary.json").read_text())
    assert "sentinel(N)" in json.dumps(summary)


def test_unary_demo(tmp_path):
    assert run(tmp_path, "unary-demo", "--epochs", "100", "--seed", "3") == 0
    result = json.loads((tmp_path / "unary.json").read_text())
    assert len(result["train_mse_curve"]) == 100
    assert result["eval_mse"] < result["baseline_mse"]


def test_unary_demo_csv(tmp_path):
    csv = tmp_path / "toy.csv"
    csv.write_text("x,y\n" + "".join(f"{x},{3 * x - 1}\n" for x in np.linspace(0, 1, 20)))
    assert run(tmp_path, "unary-demo", "--csv", str(csv), "--epochs", "20", "--k", "4") == 0


def test_custom_edge_list_with_explicit_splits(tmp_path):
    train = tmp_path / "train.tsv"
    valid = tmp_path / "valid.tsv"
    train.write_text("".join(f"{i}\t{(i + 1) % 30}\n" for i in range(30)))
    valid.write_text("0\t2\n5\t9\n")
    code = cli.main(
        ["train", "--dataset", str(train), "--valid-edges", str(valid), "--out", str(tmp_path / "o"),
         "--k", "4", "--negatives", "20", *FAST]
    )
    assert code == 0
    metrics = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert set(metrics[-1]["hits"]) == {"valid"}


@pytest.mark.parametrize(
    "argv, code",
    [
        (["train", "--aggregator", "median"], cli.EXIT_USAGE),
        (["train", "--dim", "0"], cli.EXIT_USAGE),
        (["train", "--split", "0.5,0.5"], cli.EXIT_USAGE),
        (["frobnicate"], cli.EXIT_USAGE),
        (["train", "--dataset", "no/such/file.tsv"], cli.EXIT_DATA),
        (["eval", "--model", "missing.bin"], cli.EXIT_DATA),
        pytest.param(
            ["train", "--dataset", "ogbl-ddi"],
            cli.EXIT_DATA,
            id="ogb-missing",
            marks=pytest.mark.skipif(importlib.util.find_spec("ogb") is not None, reason="ogb installed"),
        ),
    ],
)
def test_exit_codes(tmp_path, argv, code, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)]) == code
    if code != 0:
        assert capsys.readouterr().err


def test_malformed_edge_list_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\t1\nfoo\tbar\n")
    assert run(tmp_path, "train", "--dataset", str(bad)) == cli.EXIT_DATA
    assert "bad.tsv:2" in capsys.readouterr().err


def test_corrupt_model_is_data_error(tmp_path):
    bad = tmp_path / "model.bin"
    bad.write_bytes(b"not a model")
    assert cli.main(["knn", "--model", str(bad), "--node", "0"]) == cli.EXIT_DATA
    bad.write_bytes(b"")
    assert cli.main(["eval", "--model", str(bad), "--out", str(tmp_path)]) == cli.EXIT_DATA


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("non-finite logit")

    monkeypatch.setattr(cli, "fit", boom)
    assert run(tmp_path, "train", *FAST) == cli.EXIT_NUMERIC
