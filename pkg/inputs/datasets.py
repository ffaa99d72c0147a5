"""On-disk datasets: synthetic-mixture CSVs and double-digit dataset directories.

CSV files carry a header ``x0,...,x{D-1},label``; reals are written with 17
significant digits so a load returns the exact float64 values that were saved.

A double-digit dataset is a directory with

* ``manifest.json``: format_version, seed, n, height, width, source and the
  per-class digit counts;
* ``images.idx``: the N x 28 x 56 canvases as a u8 IDX tensor;
* ``annotations.jsonl``: one ``{"labels": [...], "gt_boxes": [...]}`` line per
  image, in image order.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from atomic_io import atomic_write_text
from core.errors import DatasetError, IdxFormatError, require
from core.geometry import BoundingBox, LocalizationSample
from core.synth import LabeledDataset
from inputs.idx_reader import N_DIGIT_CLASSES, read_idx_images, write_idx_images

LOG = logging.getLogger(__name__)

DOUBLE_DIGIT_FORMAT = "miest-mmnist/1"
MANIFEST_NAME = "manifest.json"
IMAGES_NAME = "images.idx"
ANNOTATIONS_NAME = "annotations.jsonl"

PathLike = Union[str, Path]


def save_labeled_csv(ds: LabeledDataset, path: PathLike) -> None:
    """Write a (N, D) dataset as CSV with a header row."""
    require(ds.X.ndim == 2, "save_labeled_csv: expected tabular X (N, D)")
    dim = ds.X.shape[1]
    header = ",".join([f"x{i}" for i in range(dim)] + ["label"])
    lines = [header]
    for row, label in zip(ds.X, ds.y):
        lines.append(",".join(["%.17g" % v for v in row] + ["%d" % label]))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
    LOG.info("Wrote %d rows (D=%d) to %s", len(ds), dim, path)


def load_labeled_csv(path: PathLike) -> LabeledDataset:
    """Read a CSV written by save_labeled_csv.

    Raises:
        DatasetError: missing file, bad header, empty body or non-integral labels.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    dim = len(header) - 1
    if dim < 1 or header[-1] != "label" or header[:-1] != [f"x{i}" for i in range(dim)]:
        raise DatasetError(f"{path}: unexpected header {header}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{path}: unreadable CSV body: {exc}") from exc
    if data.shape[0] == 0:
        raise DatasetError(f"{path}: no data rows")
    if data.shape[1] != dim + 1:
        raise DatasetError(f"{path}: rows have {data.shape[1]} columns, header has {dim + 1}")
    labels = data[:, -1]
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        raise DatasetError(f"{path}: labels must be non-negative integers")
    return LabeledDataset(data[:, :-1].copy(), labels.astype(np.int64))


def save_splits(splits: Dict[str, LabeledDataset], directory: PathLike) -> Dict[str, Path]:
    """Write each named split to ``<directory>/<name>.csv``."""
    directory = Path(directory)
    paths = {}
    for name, ds in splits.items():
        paths[name] = directory / f"{name}.csv"
        save_labeled_csv(ds, paths[name])
    return paths


def load_split(directory: PathLike, name: str) -> LabeledDataset:
    return load_labeled_csv(Path(directory) / f"{name}.csv")


def _annotation_line(sample: LocalizationSample) -> str:
    boxes = [dict(label=label, **box.to_dict()) for label, box in sample.objects]
    return json.dumps({"labels": sample.labels, "gt_boxes": boxes}, sort_keys=True)


def save_double_digit(samples: Sequence[LocalizationSample], directory: PathLike,
                      seed: int, source: str) -> Path:
    """Persist samples as a dataset directory; returns the manifest path."""
    require(len(samples) >= 1, "save_double_digit: no samples")
    directory = Path(directory)
    images = np.stack([s.image for s in samples])
    counts = np.zeros(N_DIGIT_CLASSES, dtype=np.int64)
    for s in samples:
        for label, _ in s.objects:
            counts[label] += 1
    write_idx_images(directory / IMAGES_NAME, images)
    atomic_write_text(directory / ANNOTATIONS_NAME, "".join(_annotation_line(s) + "\n" for s in samples))
    manifest = {
        "format_version": DOUBLE_DIGIT_FORMAT,
        "seed": int(seed),
        "n": len(samples),
        "height": int(images.shape[1]),
        "width": int(images.shape[2]),
        "source": source,
        "counts": counts.tolist(),
    }
    manifest_path = directory / MANIFEST_NAME
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    LOG.info("Saved %d double-digit samples to %s", len(samples), directory)
    return manifest_path


def _parse_annotation(line: str, lineno: int, path: Path) -> Tuple[Tuple[int, BoundingBox], ...]:
    try:
        record = json.loads(line)
        objects = tuple((int(b["label"]), BoundingBox.from_dict(b)) for b in record["gt_boxes"])
        labels = sorted({int(v) for v in record["labels"]})
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"{path}:{lineno}: malformed annotation: {exc}") from exc
    if labels != sorted({label for label, _ in objects}):
        raise DatasetError(f"{path}:{lineno}: labels {labels} disagree with gt_boxes")
    return objects


def load_double_digit(directory: PathLike) -> Tuple[List[LocalizationSample], Dict[str, Any]]:
    """Load a dataset directory written by save_double_digit.

    Raises:
        DatasetError: missing files, unknown format or inconsistent counts.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"not a double-digit dataset (missing {MANIFEST_NAME}): {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if manifest.get("format_version") != DOUBLE_DIGIT_FORMAT:
        raise DatasetError(f"{manifest_path}: unsupported format {manifest.get('format_version')!r}")

    try:
        raw = read_idx_images(directory / IMAGES_NAME)
    except FileNotFoundError as exc:
        raise DatasetError(f"missing {IMAGES_NAME} in {directory}") from exc
    except IdxFormatError as exc:
        raise DatasetError(f"{directory / IMAGES_NAME}: {exc}") from exc
    annotations_path = directory / ANNOTATIONS_NAME
    if not annotations_path.is_file():
        raise DatasetError(f"missing {ANNOTATIONS_NAME} in {directory}")
    lines = [ln for ln in annotations_path.read_text(encoding="utf-8").splitlines() if ln.strip()]

    if not (raw.shape[0] == len(lines) == int(manifest.get("n", -1))):
        raise DatasetError(f"{directory}: manifest n={manifest.get('n')}, "
                           f"{raw.shape[0]} images, {len(lines)} annotations")
    images = raw.astype(np.float64) / 255.0
    samples = [LocalizationSample(images[i], _parse_annotation(line, i + 1, annotations_path))
               for i, line in enumerate(lines)]
    LOG.info("Loaded %d double-digit samples from %s", len(samples), directory)
    return samples, manifest


def samples_to_arrays(samples: Sequence[LocalizationSample],
                      n_classes: int = N_DIGIT_CLASSES) -> Tuple[np.ndarray, np.ndarray]:
    """(X of shape (N, 1, H, W), multi-hot targets of shape (N, n_classes))."""
    require(len(samples) >= 1, "samples_to_arrays: no samples")
    X = np.stack([s.image for s in samples])[:, None, :, :]
    targets = np.stack([s.multi_hot(n_classes) for s in samples])
    return X, targets


def split_samples(samples: Sequence[LocalizationSample],
                  train: np.ndarray, val: np.ndarray, test: np.ndarray) -> Dict[str, List[LocalizationSample]]:
    """Index a sample list by precomputed train/val/test index arrays."""
    return {
        "train": [samples[i] for i in train],
        "val": [samples[i] for i in val],
        "test": [samples[i] for i in test],
    }
