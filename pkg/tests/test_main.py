import json
import os

import pytest

from augmentation.gan import load_gan
from autoencoder import load_sae
from config import Config
from data_model import load_csv
from ensemble import load_ensemble
from main import build_parser, main
from ntl_types import VotingMode


def test_synthetic_data_command(tmp_path, capsys):
    out_dir = str(tmp_path)
    code = main(["synth-data", "--n-consumers", "40", "--n-days", "120", "--missing-fraction", "0.1",
                 "--out-dir", out_dir, "--seed", "3"])
    assert code == 0
    matrix = load_csv(os.path.join(out_dir, "data.csv"))
    assert (matrix.n_consumers, matrix.n_days) == (40, 120)
    assert load_csv(os.path.join(out_dir, "clean.csv")).is_complete
    with open(os.path.join(out_dir, "truth.json"), encoding="utf-8") as f:
        assert json.load(f)["n_theft"] == int(matrix.labels.sum())
    assert "season" in capsys.readouterr().out


def test_bad_config_exits_with_a_tagged_message(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"test_fraction": 2.0}), encoding="utf-8")
    code = main(["run", "--config", str(path), "--out-dir", str(tmp_path)])
    assert code == 2
    assert "error: [run] pipeline.test_fraction" in capsys.readouterr().err


def test_malformed_data_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "data.csv"
    path.write_text("id,label\n", encoding="utf-8")
    assert main(["impute", "--data", str(path), "--out-dir", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error: [impute]")


def test_every_command_is_wired():
    parser = build_parser()
    for command in ("synth-data", "impute", "preprocess", "train-sae", "augment", "train", "evaluate", "run",
                    "report", "sweep"):
        args = parser.parse_args([command])
        assert args.command == command
        assert args.out_dir == "out"
    assert parser.parse_args(["report", "--repeats", "25", "--resplit"]).repeats == 25
    with pytest.raises(SystemExit):
        parser.parse_args(["dance"])


def test_stage_commands_chain(tmp_path):
    config = {
        "autoencoder": {"dims": [16, 8], "epochs": 3, "batch_size": 8},
        "augmentation": {"n_samples": 30, "epochs": 1, "batch_size": 10, "critic_steps": 1, "noise_dim": 4,
                         "hidden_dim": 8, "max_modes": 2},
        "ensemble": {"forest": {"n_estimators": 5}, "boosting": {"n_estimators": 5}},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    out_dir = str(tmp_path / "out")
    common = ["--config", str(config_path), "--out-dir", out_dir]
    assert main(["synth-data", "--n-consumers", "60", "--n-days", "100", "--theft-fraction", "0.2",
                 "--missing-fraction", "0"] + common) == 0
    data = ["--data", os.path.join(out_dir, "data.csv")]
    assert main(["train-sae"] + data + common) == 0
    assert main(["augment", "--models-dir", out_dir] + data + common) == 0
    assert main(["train", "--models-dir", out_dir] + data + common) == 0
    assert main(["evaluate", "--models-dir", out_dir] + data + common) == 0
    for name in (Config.model_file, Config.gan_file, Config.ensemble_file, "synthetic.csv", "metrics.json",
                 Config.roc_csv, Config.curves_index):
        assert os.path.exists(os.path.join(out_dir, name)), name


@pytest.fixture(scope="module")
def stages(tmp_path_factory):
    """A config, a dataset with gaps and an autoencoder trained on it by the CLI."""
    root = tmp_path_factory.mktemp("stages")
    config = {
        "autoencoder": {"dims": [16, 8], "epochs": 3, "batch_size": 8},
        "augmentation": {"n_samples": 30, "epochs": 1, "batch_size": 10, "critic_steps": 1, "noise_dim": 4,
                         "hidden_dim": 8, "max_modes": 2},
        "ensemble": {"forest": {"n_estimators": 5}, "boosting": {"n_estimators": 5}},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    models_dir = str(root / "models")
    common = ["--config", str(config_path), "--out-dir", models_dir]
    assert main(["synth-data", "--n-consumers", "60", "--n-days", "100", "--theft-fraction", "0.2",
                 "--missing-fraction", "0.05"] + common) == 0
    data = os.path.join(models_dir, "data.csv")
    assert main(["train-sae", "--data", data] + common) == 0
    return str(config_path), data, models_dir


def test_impute_flags(stages, tmp_path):
    config_path, data, _ = stages
    output = str(tmp_path / "filled.csv")
    assert main(["impute", "--input", data, "--output", output, "--min-gap", "1000", "--config", config_path,
                 "--out-dir", str(tmp_path)]) == 0
    assert load_csv(output).is_complete
    assert not os.path.exists(tmp_path / "imputed.csv")
    with open(tmp_path / "impute_summary.json", encoding="utf-8") as f:
        summary = json.load(f)
    assert set(summary) == {"gaps_filled", "fallback_counts", "wall_time_ms"}
    assert summary["gaps_filled"] > 0
    assert summary["fallback_counts"]["dtw_match"] == 0
    assert summary["fallback_counts"]["min_dtw"] == 0
    assert sum(summary["fallback_counts"].values()) == summary["gaps_filled"]


def test_flag_values_are_validated(stages, tmp_path, capsys):
    config_path, data, _ = stages
    assert main(["impute", "--input", data, "--min-gap", "2", "--config", config_path,
                 "--out-dir", str(tmp_path)]) == 2
    assert "imputation.min_gap" in capsys.readouterr().err


def test_preprocess_flags(stages, tmp_path):
    config_path, data, _ = stages
    assert main(["preprocess", "--data", data, "--zscore-threshold", "4.5", "--target-per-class", "5",
                 "--nearmiss-k", "1", "--config", config_path, "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "zscore_report.json", encoding="utf-8") as f:
        report = json.load(f)
    assert set(report) == {"axis", "threshold", "mean", "std", "dropped"}
    assert report["threshold"] == 4.5
    assert report["axis"] == "column"
    kept = load_csv(str(tmp_path / "preprocessed.csv"))
    assert kept.n_consumers == 10
    assert int(kept.labels.sum()) == 5
    assert kept.is_complete


def test_train_sae_flags(stages, tmp_path):
    config_path, data, _ = stages
    assert main(["train-sae", "--data", data, "--dims", "12", "6", "--epochs", "2", "--batch-size", "6",
                 "--config", config_path, "--out-dir", str(tmp_path)]) == 0
    model = load_sae(str(tmp_path / Config.model_file))
    assert model.dims == (12, 6)
    assert model.scaling is not None
    for index in (1, 2):
        with open(tmp_path / f"ae{index}_loss.csv", encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == "epoch,loss"
        assert 1 <= len(lines) - 1 <= 2


def test_augment_writes_synthetic_consumers(stages, tmp_path):
    config_path, data, models_dir = stages
    assert main(["augment", "--data", data, "--models-dir", models_dir, "--n-samples", "30", "--ratio", "1", "1",
                 "--pac", "2", "--epochs", "1", "--config", config_path, "--out-dir", str(tmp_path)]) == 0
    path = str(tmp_path / "synthetic.csv")
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    assert "synthetic" in header
    synthetic = load_csv(path)
    assert synthetic.n_consumers == 30
    assert int(synthetic.labels.sum()) == 15
    assert synthetic.is_complete
    assert all(i.startswith("synthetic-") for i in synthetic.consumer_ids)
    assert list(synthetic.dates) == list(load_csv(data).dates)
    assert load_gan(str(tmp_path / Config.gan_file)).pac == 2


def test_augment_in_raw_space(stages, tmp_path):
    config_path, data, _ = stages
    with open(config_path, encoding="utf-8") as f:
        document = json.load(f)
    document["augmentation"]["space"] = "raw"
    raw_config = tmp_path / "raw.json"
    raw_config.write_text(json.dumps(document), encoding="utf-8")
    assert main(["augment", "--data", data, "--config", str(raw_config), "--out-dir", str(tmp_path)]) == 0
    synthetic = load_csv(str(tmp_path / "synthetic.csv"))
    assert synthetic.n_consumers == 30
    assert synthetic.n_days == load_csv(data).n_days


def test_train_flags(stages, tmp_path):
    config_path, data, models_dir = stages
    assert main(["train", "--data", data, "--models-dir", models_dir, "--mode", "stacked", "--folds", "3",
                 "--grid", '{"forest.n_estimators": [3, 5]}', "--config", config_path,
                 "--out-dir", str(tmp_path)]) == 0
    assert load_ensemble(str(tmp_path / Config.ensemble_file)).mode is VotingMode.STACKED
    with open(tmp_path / "grid_search.json", encoding="utf-8") as f:
        grid = json.load(f)
    assert grid["best"]["forest.n_estimators"] in (3, 5)
    assert len(grid["cells"]) == 2


def test_grid_file_argument(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps({"boosting.learning_rate": [0.05, 0.1]}), encoding="utf-8")
    args = build_parser().parse_args(["train", "--grid", str(path)])
    assert args.grid == {"boosting.learning_rate": [0.05, 0.1]}
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--grid", "[1, 2]"])


def test_report_scores_persisted_models(stages, tmp_path):
    config_path, data, models_dir = stages
    common = ["--data", data, "--models-dir", models_dir, "--config", config_path]
    assert main(["train"] + common + ["--out-dir", models_dir]) == 0
    out_dir = str(tmp_path / "report")
    assert main(["report"] + common + ["--out-dir", out_dir]) == 0
    with open(os.path.join(out_dir, "metrics.json"), encoding="utf-8") as f:
        metrics = json.load(f)
    assert {"precision", "recall", "mcc", "auc_roc", "confusion"} <= set(metrics)
    assert sum(metrics["confusion"].values()) == 60
    assert not os.path.exists(os.path.join(out_dir, "repeated_report.json"))
    for name in (Config.roc_csv, Config.pr_csv, Config.curves_index):
        assert os.path.exists(os.path.join(out_dir, name)), name
