import json

import pytest

import main as cli
from outputs.report_writer import read_report, read_training_log

SMALL_COUNTS = "40,40,40,40,40"


def _gen_synth(out, seed=11):
    return cli.main(["gen-synth", "--dim", "2", "--counts", SMALL_COUNTS, "--oracle-samples", "2000",
                     "--seed", str(seed), "--out", str(out)])


def _train(data, out, seed=11, *extra):
    return cli.main(["train", "--data", str(data), "--seed", str(seed), "--epochs", "2", "--batch-size", "32",
                     "--out", str(out), *extra])


def test_zero_dimension_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-synth", "--dim", "0", "--balanced", "--seed", "1"])
    assert exc.value.code == 2


def test_counts_length_mismatch_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-synth", "--dim", "1", "--counts", "5,5", "--seed", "1", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_seed_is_required(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-synth", "--dim", "1", "--balanced", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_gen_synth_writes_dataset_and_oracle(tmp_path):
    assert _gen_synth(tmp_path) == 0
    for name in ("dataset.csv", "train.csv", "val.csv", "test.csv"):
        assert (tmp_path / name).is_file()
    oracle = read_report(tmp_path / "oracle.json")
    assert oracle["M"] == 5 and oracle["dim"] == 2 and oracle["seed"] == 11
    assert oracle["n_samples"] == 2000
    assert oracle["prior"] == [0.2] * 5


def test_gen_synth_is_deterministic(tmp_path):
    _gen_synth(tmp_path / "a")
    _gen_synth(tmp_path / "b")
    assert (tmp_path / "a" / "dataset.csv").read_bytes() == (tmp_path / "b" / "dataset.csv").read_bytes()


def test_synthetic_train_estimate_and_evaluate(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    _gen_synth(data)
    assert _train(data, run, 11, "--loss", "pc-softmax", "--hidden", "8,8") == 0
    log = read_training_log(run / "training_log.csv")
    assert [row["epoch"] for row in log] == ["1", "2"]

    report_path = tmp_path / "mi.json"
    assert cli.main(["estimate-mi", "--model", str(run / "model.json"), "--data", str(data),
                     "--report", str(report_path)]) == 0
    report = read_report(report_path)
    assert report["loss"] == "pc_softmax_ce"
    assert report["mc_oracle"] is not None
    assert report["n"] == 30
    assert report["seed"] == 11

    eval_path = tmp_path / "eval.json"
    assert cli.main(["evaluate", "--model", str(run / "model.json"), "--data", str(data),
                     "--split", "val", "--report", str(eval_path)]) == 0
    evaluation = read_report(eval_path)
    assert len(evaluation["per_class_recall"]) == 5
    assert 0.0 <= evaluation["accuracy"] <= 1.0
    assert evaluation["seed"] == 11


def test_softmax_evaluation_reports_prior_corrected_accuracy(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    cli.main(["gen-synth", "--dim", "1", "--counts", "10,20,30,40,50", "--oracle-samples", "100",
              "--seed", "3", "--out", str(data)])
    _train(data, run, 3, "--hidden", "4")
    cli.main(["evaluate", "--model", str(run / "model.json"), "--data", str(data), "--out", str(run)])
    assert "prior_corrected_per_class_accuracy" in read_report(run / "evaluation.json")


def test_same_seed_gives_identical_model_bytes(tmp_path):
    data = tmp_path / "data"
    _gen_synth(data)
    _train(data, tmp_path / "a", 5, "--hidden", "6")
    _train(data, tmp_path / "b", 5, "--hidden", "6")
    assert (tmp_path / "a" / "model.json").read_bytes() == (tmp_path / "b" / "model.json").read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    _gen_synth(data)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"hidden": [3], "epochs": 1, "seed": 2}))
    assert cli.main(["train", "--data", str(data), "--config", str(cfg), "--epochs", "2",
                     "--out", str(run)]) == 0
    doc = json.loads((run / "model.json").read_text())
    assert doc["architecture"]["layer_dims"] == [2, 3, 5]
    assert doc["metadata"]["epochs"] == 2 and doc["metadata"]["seed"] == 2


def test_config_file_supplies_data_and_model_paths(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    _gen_synth(data, seed=4)
    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(json.dumps({"data_dir": str(data), "seed": 4, "hidden": [4], "epochs": 1,
                                     "output_dir": str(run)}))
    assert cli.main(["train", "--config", str(train_cfg)]) == 0
    eval_cfg = tmp_path / "eval.json"
    eval_cfg.write_text(json.dumps({"data_dir": str(data), "model_path": str(run / "model.json"),
                                    "output_dir": str(run)}))
    assert cli.main(["evaluate", "--config", str(eval_cfg)]) == 0
    assert cli.main(["estimate-mi", "--config", str(eval_cfg)]) == 0
    assert read_report(run / "evaluation.json")["seed"] == 4
    assert read_report(run / "mi_report.json")["seed"] == 4


def test_data_flag_overrides_config_path(tmp_path):
    data = tmp_path / "data"
    _gen_synth(data)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"data_dir": str(data), "hidden": [3], "epochs": 1}))
    assert cli.main(["train", "--config", str(cfg), "--data", str(tmp_path / "nope"), "--seed", "1",
                     "--out", str(tmp_path)]) == 1


def test_missing_data_path_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--seed", "1", "--out", str(tmp_path)])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["evaluate", "--data", str(tmp_path)])
    assert exc.value.code == 2


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"learning_rate": 0.1}))
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--data", str(tmp_path), "--seed", "1", "--config", str(cfg)])
    assert exc.value.code == 2


def test_missing_dataset_fails_with_status_one(tmp_path):
    assert cli.main(["train", "--data", str(tmp_path / "nope"), "--seed", "1", "--out", str(tmp_path)]) == 1


def test_multilabel_loss_on_synthetic_data_fails(tmp_path):
    data = tmp_path / "data"
    _gen_synth(data)
    assert _train(data, tmp_path / "run", 1, "--loss", "sigmoid") == 1


def test_double_digit_pipeline(tmp_path):
    data, run = tmp_path / "mmnist", tmp_path / "run"
    assert cli.main(["make-mmnist", "--n", "200", "--synthetic-digits", "--per-class", "2", "--seed", "4",
                     "--out", str(data)]) == 0
    assert json.loads((data / "manifest.json").read_text())["n"] == 200
    assert _train(data, run, 4, "--batch-size", "16") == 0
    assert json.loads((run / "model.json").read_text())["loss"]["variant"] == "pc_sigmoid_multilabel"

    model = str(run / "model.json")
    assert cli.main(["cam", "--model", model, "--data", str(data), "--sample", "0", "--out", str(run)]) == 0
    pgms = sorted(p.name for p in run.glob("sample0_*.pgm"))
    assert len(pgms) == 3
    assert (run / pgms[0]).read_bytes().startswith(b"P5\n25 11\n255\n")

    assert cli.main(["locate", "--model", model, "--data", str(data), "--mode", "infocam",
                     "--region", "2", "--out", str(run)]) == 0
    located = read_report(run / "locate_infocam.json")
    assert located["R"] == 2 and located["seed"] == 4
    assert 0.0 <= located["gt_loc"] <= 1.0

    assert cli.main(["evaluate", "--model", model, "--data", str(data), "--out", str(run)]) == 0
    assert len(read_report(run / "evaluation.json")["per_label_accuracy"]) == 10


def test_softmax_loss_on_double_digit_data_fails(tmp_path):
    data = tmp_path / "mmnist"
    cli.main(["make-mmnist", "--n", "20", "--synthetic-digits", "--per-class", "1", "--seed", "0",
              "--out", str(data)])
    assert _train(data, tmp_path / "run", 0, "--loss", "softmax") == 1


def test_unknown_mode_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["cam", "--model", "m.json", "--data", str(tmp_path), "--mode", "gradcam"])
    assert exc.value.code == 2


def test_make_mmnist_needs_a_digit_source(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["make-mmnist", "--n", "5", "--seed", "0", "--out", str(tmp_path)])
    assert exc.value.code == 2
