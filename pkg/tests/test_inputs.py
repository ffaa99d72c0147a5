import json
import struct

import numpy as np
import pytest

from core.errors import ContractViolation, DatasetError, IdxBadMagicError, IdxCountMismatchError, IdxTruncatedError
from core.geometry import BoundingBox, LocalizationSample
from core.rng import RngStream
from core.synth import LabeledDataset
from inputs.datasets import (
    load_double_digit,
    load_labeled_csv,
    load_split,
    samples_to_arrays,
    save_double_digit,
    save_labeled_csv,
    save_splits,
    split_samples,
)
from inputs.digits import (
    glyph_bitmap,
    make_double_digit,
    make_single_digit,
    pool_from_digits,
    single_digit_counts,
    synth_digit,
    synthetic_pool,
)
from inputs.idx_reader import DigitImage, read_idx, to_u8, write_idx_images, write_idx_labels


@pytest.fixture
def idx_pair(tmp_path):
    images = np.zeros((2, 28, 28), dtype=np.uint8)
    images[0, 5:10, 5:10] = 255
    images[1, 0, 0] = 51
    images_path = tmp_path / "images.idx"
    labels_path = tmp_path / "labels.idx"
    write_idx_images(images_path, images)
    write_idx_labels(labels_path, np.array([3, 8]))
    return images_path, labels_path


def test_read_idx_pair(idx_pair):
    digits = read_idx(*idx_pair)
    assert [d.label for d in digits] == [3, 8]
    assert digits[0].pixels.shape == (28, 28)
    assert digits[0].pixels[6, 6] == 1.0
    assert digits[1].pixels[0, 0] == pytest.approx(0.2)


def test_idx_header_layout(idx_pair):
    raw = idx_pair[0].read_bytes()
    assert struct.unpack(">IIII", raw[:16]) == (0x803, 2, 28, 28)
    assert len(raw) == 16 + 2 * 28 * 28


def test_read_idx_bad_magic(idx_pair, tmp_path):
    raw = bytearray(idx_pair[0].read_bytes())
    raw[:4] = struct.pack(">I", 0x804)
    bad = tmp_path / "bad.idx"
    bad.write_bytes(bytes(raw))
    with pytest.raises(IdxBadMagicError):
        read_idx(bad, idx_pair[1])


def test_read_idx_truncated(idx_pair, tmp_path):
    cut = tmp_path / "cut.idx"
    cut.write_bytes(idx_pair[0].read_bytes()[:-10])
    with pytest.raises(IdxTruncatedError):
        read_idx(cut, idx_pair[1])


def test_read_idx_count_mismatch(idx_pair, tmp_path):
    labels = tmp_path / "three.idx"
    write_idx_labels(labels, np.array([1, 2, 3]))
    with pytest.raises(IdxCountMismatchError):
        read_idx(idx_pair[0], labels)


def test_to_u8_rounds_half_to_even():
    np.testing.assert_array_equal(to_u8(np.array([0.0, 1.0, 0.5, 2.0])), [0, 255, 128, 255])


def test_digit_image_validation():
    with pytest.raises(ContractViolation):
        DigitImage(np.full((28, 28), 1.5), 1)
    with pytest.raises(ContractViolation):
        DigitImage(np.zeros((28, 28)), 10)


def test_glyphs_are_distinct():
    bitmaps = {glyph_bitmap(c).tobytes() for c in range(10)}
    assert len(bitmaps) == 10
    assert glyph_bitmap(0).shape == (7, 5)


def test_synth_digit_is_deterministic():
    a = synth_digit(1, RngStream(4, 0))
    b = synth_digit(1, RngStream(4, 0))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert a.label == 1
    assert a.pixels.max() <= 1.0 and a.pixels[a.pixels > 0].min() >= 0.7


def test_make_double_digit_boxes_and_labels():
    pool = synthetic_pool(3, RngStream(0, 5))
    samples = make_double_digit(pool, 300, RngStream(0, 0))
    for sample in samples:
        assert sample.image.shape == (28, 56)
        assert 1 <= len(sample.objects) <= 2
        for label, box in sample.objects:
            assert 3 <= box.width <= 24 and 3 <= box.height <= 24
            left_slot = box.x_max <= 27
            right_slot = box.x_min >= 28
            assert left_slot or right_slot
            region = sample.image[box.y_min:box.y_max + 1, box.x_min:box.x_max + 1]
            assert region.max() > 0.1


def test_make_double_digit_is_deterministic_per_sample():
    pool = synthetic_pool(2, RngStream(1, 5))
    short = make_double_digit(pool, 5, RngStream(1, 0))
    long = make_double_digit(pool, 20, RngStream(1, 0))
    for a, b in zip(short, long):
        assert a.objects == b.objects
        assert np.array_equal(a.image, b.image)


def test_two_digit_fraction():
    pool = synthetic_pool(2, RngStream(2, 5))
    samples = make_double_digit(pool, 10_000, RngStream(2, 0))
    fraction = np.mean([len(s.objects) == 2 for s in samples])
    assert fraction == pytest.approx(0.49 / 0.91, abs=0.02)


def test_make_double_digit_errors():
    pool = synthetic_pool(1, RngStream(0, 5))
    with pytest.raises(ContractViolation):
        make_double_digit(pool, 0, RngStream(0, 0))
    partial = pool_from_digits([d for cls in range(9) for d in pool[cls]])
    with pytest.raises(DatasetError):
        make_double_digit(partial, 4, RngStream(0, 0))


def test_single_digit_counts():
    assert single_digit_counts(50, balanced=True) == [50] * 10
    assert single_digit_counts(50, balanced=False) == [5, 50, 5, 50, 5, 50, 5, 50, 5, 50]
    assert single_digit_counts(5, balanced=False)[0] == 1


def test_make_single_digit_rows_and_labels():
    pool = synthetic_pool(6, RngStream(4, 5))
    counts = [6, 2, 6, 2, 6, 2, 6, 2, 6, 2]
    ds = make_single_digit(pool, counts, RngStream(4, 0))
    assert ds.X.shape == (40, 1, 28, 28)
    assert list(ds.class_counts(10)) == counts
    for row, label in zip(ds.X, ds.y):
        assert any(np.array_equal(row[0], d.pixels) for d in pool[int(label)])
    # sin repeticiones dentro de una clase
    zeros = ds.X[ds.y == 0].reshape(6, -1)
    assert len({r.tobytes() for r in zeros}) == 6


def test_make_single_digit_class_draws_ignore_other_counts():
    pool = synthetic_pool(4, RngStream(5, 5))
    a = make_single_digit(pool, [3] * 10, RngStream(5, 0))
    b = make_single_digit(pool, [3, 1] * 5, RngStream(5, 0))
    assert np.array_equal(a.X[a.y == 0], b.X[b.y == 0])


def test_make_single_digit_errors():
    pool = synthetic_pool(2, RngStream(0, 5))
    with pytest.raises(DatasetError):
        make_single_digit(pool, [3] * 10, RngStream(0, 0))
    with pytest.raises(ContractViolation):
        make_single_digit(pool, [1] * 9, RngStream(0, 0))


def test_labeled_csv_is_lossless(tmp_path):
    X = RngStream(0, 0).normal((6, 3)) * 1e-3
    ds = LabeledDataset(X, np.array([0, 1, 2, 0, 1, 4]))
    path = tmp_path / "data.csv"
    save_labeled_csv(ds, path)
    assert path.read_text().splitlines()[0] == "x0,x1,x2,label"
    loaded = load_labeled_csv(path)
    assert loaded.X.tobytes() == ds.X.tobytes()
    np.testing.assert_array_equal(loaded.y, ds.y)


def test_splits_directory(tmp_path):
    ds = LabeledDataset(np.eye(3), np.array([0, 1, 2]))
    save_splits({"train": ds, "test": ds.subset(np.array([1]))}, tmp_path)
    assert len(load_split(tmp_path, "test")) == 1


def test_load_labeled_csv_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_labeled_csv(tmp_path / "missing.csv")
    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("a,b\n1,2\n")
    with pytest.raises(DatasetError):
        load_labeled_csv(bad_header)
    bad_label = tmp_path / "label.csv"
    bad_label.write_text("x0,label\n0.5,1.5\n")
    with pytest.raises(DatasetError):
        load_labeled_csv(bad_label)
    empty = tmp_path / "empty.csv"
    empty.write_text("x0,label\n")
    with pytest.raises(DatasetError):
        load_labeled_csv(empty)


def _two_samples():
    left = np.zeros((28, 56))
    left[4:20, 6:18] = 0.8
    both = left.copy()
    both[2:25, 30:40] = 1.0
    return [
        LocalizationSample(left, ((5, BoundingBox(6, 4, 17, 19)),)),
        LocalizationSample(both, ((5, BoundingBox(6, 4, 17, 19)), (5, BoundingBox(30, 2, 39, 24)))),
    ]


def test_double_digit_directory(tmp_path):
    samples = _two_samples()
    save_double_digit(samples, tmp_path, seed=7, source="test")
    loaded, manifest = load_double_digit(tmp_path)
    assert manifest["seed"] == 7 and manifest["n"] == 2
    assert manifest["counts"][5] == 3
    assert [s.objects for s in loaded] == [s.objects for s in samples]
    np.testing.assert_array_equal(loaded[1].image, to_u8(samples[1].image) / 255.0)
    first = json.loads((tmp_path / "annotations.jsonl").read_text().splitlines()[0])
    assert first["labels"] == [5]


def test_double_digit_directory_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_double_digit(tmp_path)
    save_double_digit(_two_samples(), tmp_path, seed=0, source="test")
    (tmp_path / "annotations.jsonl").write_text('{"labels": [5], "gt_boxes": []}\n')
    with pytest.raises(DatasetError):
        load_double_digit(tmp_path)


def test_samples_to_arrays_and_split():
    samples = _two_samples()
    X, targets = samples_to_arrays(samples)
    assert X.shape == (2, 1, 28, 56)
    np.testing.assert_array_equal(targets.sum(axis=1), [1, 1])
    splits = split_samples(samples, np.array([1]), np.array([], dtype=int), np.array([0]))
    assert splits["train"][0] is samples[1] and splits["val"] == []
