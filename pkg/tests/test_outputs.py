import json

import numpy as np
import pytest

from atomic_io import atomic_write_bytes, atomic_write_text
from core.errors import ContractViolation, MalformedModelError, ShapeInconsistencyError, UnsupportedVersionError
from core.losses_mi import LossSpec, LossVariant, Prior
from core.models import ConvGapModel, ConvStage, MlpModel
from core.rng import RngStream
from inputs import datasets, digits, idx_reader
from outputs import model_store, report_writer
from outputs.heatmap_writer import to_gray_u8, upsample, write_heatmap
from outputs.model_store import MODEL_FORMAT, load_model, save_model
from outputs.report_generator import LocalizationPanel, ReportGenerator, render_overlay
from outputs.report_writer import read_report, read_training_log, write_report, write_training_log


def test_heatmap_header_and_payload(tmp_path):
    path = write_heatmap(np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]), tmp_path / "map.pgm")
    raw = path.read_bytes()
    header = b"P5\n3 2\n255\n"
    assert raw.startswith(header)
    assert list(raw[len(header):]) == [0, 51, 102, 153, 204, 255]


def test_heatmap_constant_and_two_cell_maps(tmp_path):
    raw = write_heatmap(np.array([[-3.0]]), tmp_path / "one.pgm").read_bytes()
    assert raw == b"P5\n1 1\n255\n\xff"
    np.testing.assert_array_equal(to_gray_u8(np.array([[0.0, 0.3]])), [[0, 255]])


def test_heatmap_upsample(tmp_path):
    assert upsample(np.zeros((2, 3)), (28, 56)).shape == (28, 56)
    raw = write_heatmap(np.eye(3), tmp_path / "big.pgm", upsample_to=(6, 9)).read_bytes()
    assert raw.startswith(b"P5\n9 6\n255\n")
    assert len(raw) == len(b"P5\n9 6\n255\n") + 54


def test_heatmap_rejects_non_2d(tmp_path):
    with pytest.raises(ValueError):
        write_heatmap(np.zeros(4), tmp_path / "bad.pgm")


def test_model_store_preserves_logits_bit_for_bit(tmp_path):
    model = MlpModel.build(2, 3, hidden=(5, 4), rng=RngStream(12, 3))
    spec = LossSpec(LossVariant.PC_SOFTMAX_CE, prior=Prior(np.array([0.1, 0.3, 0.6])))
    path = save_model(model, tmp_path / "model.json", spec, {"seed": 12, "best_epoch": 4})
    loaded, loaded_spec, metadata = load_model(path)
    X = RngStream(12, 9).normal((7, 2))
    assert loaded.forward(X).tobytes() == model.forward(X).tobytes()
    assert loaded_spec.variant is LossVariant.PC_SOFTMAX_CE
    np.testing.assert_array_equal(loaded_spec.prior.probs, spec.prior.probs)
    assert metadata == {"seed": 12, "best_epoch": 4}


def test_model_store_is_byte_stable(tmp_path):
    model = ConvGapModel((1, 6, 6), (ConvStage(3, 3, 1, 2, pool=True),), 3, rng=RngStream(1, 3))
    spec = LossSpec(LossVariant.SIGMOID_MULTILABEL)
    a = save_model(model, tmp_path / "a.json", spec).read_bytes()
    b = save_model(load_model(tmp_path / "a.json")[0], tmp_path / "b.json", spec).read_bytes()
    assert a == b


def test_model_store_rejects_non_finite(tmp_path):
    model = MlpModel.build(2, 2, hidden=(2,), rng=RngStream(0, 3))
    model.params["W0"][0, 0] = np.nan
    with pytest.raises(ContractViolation):
        save_model(model, tmp_path / "nan.json", LossSpec(LossVariant.SOFTMAX_CE))


def _saved_document(tmp_path):
    model = MlpModel.build(2, 3, hidden=(4,), rng=RngStream(0, 3))
    path = save_model(model, tmp_path / "model.json", LossSpec(LossVariant.SOFTMAX_CE))
    return path, json.loads(path.read_text())


def test_load_model_truncated(tmp_path):
    path, _ = _saved_document(tmp_path)
    path.write_text(path.read_text()[:-40])
    with pytest.raises(MalformedModelError):
        load_model(path)


def test_load_model_wrong_version(tmp_path):
    path, doc = _saved_document(tmp_path)
    assert doc["format_version"] == MODEL_FORMAT
    doc["format_version"] = "miest-model/2"
    path.write_text(json.dumps(doc))
    with pytest.raises(UnsupportedVersionError):
        load_model(path)


def test_load_model_class_count_mismatch(tmp_path):
    path, doc = _saved_document(tmp_path)
    doc["architecture"]["layer_dims"][-1] = 5
    path.write_text(json.dumps(doc))
    with pytest.raises(ShapeInconsistencyError):
        load_model(path)


def test_load_model_missing_parameter(tmp_path):
    path, doc = _saved_document(tmp_path)
    del doc["parameters"]["b1"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ShapeInconsistencyError):
        load_model(path)


def test_report_has_provenance_and_null_for_nan(tmp_path):
    path = write_report(tmp_path / "r.json", {"mi_estimate": float("nan"), "values": np.array([1.5, 2.0])},
                        seed=3, build_id="v1.0.0-2-gabc")
    report = read_report(path)
    assert report["format_version"] == "miest-report/1"
    assert report["seed"] == 3 and report["build_id"] == "v1.0.0-2-gabc"
    assert report["mi_estimate"] is None
    assert report["values"] == [1.5, 2.0]


def test_training_log_columns_and_empty_cells(tmp_path):
    rows = [
        {"epoch": 1, "train_loss": 0.5, "val_loss": float("nan"), "val_accuracy": 0.75, "val_mi_estimate": 0.1},
        {"epoch": 2, "train_loss": 0.25, "val_loss": 0.3, "val_accuracy": 0.8, "val_mi_estimate": 0.2},
    ]
    path = write_training_log(tmp_path / "log.csv", rows)
    assert path.read_text().splitlines()[0] == "epoch,train_loss,val_loss,val_accuracy,val_mi_estimate"
    parsed = read_training_log(path)
    assert parsed[0]["val_loss"] == ""
    assert float(parsed[1]["train_loss"]) == 0.25


def _panel():
    image = np.zeros((28, 56))
    image[4:20, 6:18] = 1.0
    heat = np.zeros((28, 56))
    heat[4:20, 6:18] = 2.0
    return LocalizationPanel(image, heat, [(6, 4, 17, 19)], (5, 3, 18, 20), 3, "infocam", 0.7)


def test_render_overlay_draws_boxes():
    big = render_overlay(_panel(), scale=2)
    assert big.shape == (56, 112, 3)
    assert tuple(big[8, 12]) == (0, 0, 255)
    assert tuple(big[6, 10]) == (0, 255, 0)


def test_report_generator_writes_pdf(tmp_path):
    pytest.importorskip("reportlab")
    generator = ReportGenerator(title="CAM vs infoCAM", dataset="test", build_id="dev", seed=0)
    out = generator.generate_report({"infocam": {"gt_loc": 0.9, "top1_loc": 0.8, "n_samples": 1}},
                                    [_panel()], tmp_path / "report.pdf")
    assert out is not None
    assert (tmp_path / "report.pdf").read_bytes().startswith(b"%PDF")


def test_atomic_write_keeps_previous_content_on_failure(tmp_path):
    target = tmp_path / "report.json"
    atomic_write_text(target, "uno\ndos\n")
    assert target.read_bytes() == b"uno\ndos\n"
    with pytest.raises(TypeError):
        atomic_write_bytes(target, "no son bytes")
    assert target.read_bytes() == b"uno\ndos\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json"]


def test_every_writer_shares_one_atomic_helper():
    assert datasets.atomic_write_text is atomic_write_text
    assert report_writer.atomic_write_text is atomic_write_text
    assert model_store.atomic_write_text is atomic_write_text
    assert idx_reader.atomic_write_bytes is atomic_write_bytes
    assert digits.N_DIGIT_CLASSES is datasets.N_DIGIT_CLASSES is idx_reader.N_DIGIT_CLASSES
