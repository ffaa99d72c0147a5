"""IDX container reader/writer for 28x28 digit images.

The IDX layout is the one used by the MNIST distribution: a big-endian 32-bit
magic number (0x00000803 for u8 image tensors, 0x00000801 for u8 label
vectors), one big-endian 32-bit extent per dimension, then the raw payload.

Usage:
    digits = read_idx("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
    digits[0].pixels  # 28x28 float64 in [0, 1]
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from atomic_io import atomic_write_bytes
from core.errors import IdxBadMagicError, IdxCountMismatchError, IdxTruncatedError, require

LOG = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
DIGIT_SIDE = 28
N_DIGIT_CLASSES = 10

PathLike = Union[str, Path]


@dataclass(frozen=True)
class DigitImage:
    """A single grayscale digit, pixels in [0, 1]."""

    pixels: np.ndarray
    label: int

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        require(pixels.ndim == 2, "DigitImage: pixels must be 2D")
        require(bool(np.all((pixels >= 0.0) & (pixels <= 1.0))), "DigitImage: pixels outside [0, 1]")
        require(0 <= int(self.label) <= 9, f"DigitImage: label {self.label} outside 0-9")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "label", int(self.label))


def _read_header(raw: bytes, path: PathLike, magic: int, n_dims: int) -> tuple:
    header_size = 4 + 4 * n_dims
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxBadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header_size:
        raise IdxTruncatedError(f"{path}: header truncated ({len(raw)} < {header_size} bytes)")
    return struct.unpack(">" + "I" * n_dims, raw[4:header_size]), header_size


def read_idx_images(path: PathLike) -> np.ndarray:
    """Return a (N, rows, cols) uint8 array."""
    raw = Path(path).read_bytes()
    (n, rows, cols), offset = _read_header(raw, path, IMAGES_MAGIC, 3)
    expected = n * rows * cols
    payload = raw[offset:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{path}: header announces {n} images, payload has {len(payload)} of {expected} bytes")
    return np.frombuffer(payload[:expected], dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    """Return a (N,) uint8 array."""
    raw = Path(path).read_bytes()
    (n,), offset = _read_header(raw, path, LABELS_MAGIC, 1)
    payload = raw[offset:]
    if len(payload) < n:
        raise IdxTruncatedError(f"{path}: header announces {n} labels, payload has {len(payload)}")
    return np.frombuffer(payload[:n], dtype=np.uint8).copy()


def read_idx(images_path: PathLike, labels_path: PathLike) -> List[DigitImage]:
    """Parse an images/labels IDX pair into DigitImages.

    Raises:
        IdxBadMagicError, IdxTruncatedError: malformed file.
        IdxCountMismatchError: image and label counts disagree.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images_path} has {images.shape[0]} images but {labels_path} has {labels.shape[0]} labels")
    pixels = images.astype(np.float64) / 255.0
    LOG.info("Read %d digits (%dx%d) from %s", images.shape[0], images.shape[1], images.shape[2], images_path)
    return [DigitImage(pixels[i], int(labels[i])) for i in range(images.shape[0])]


def to_u8(pixels: np.ndarray) -> np.ndarray:
    """Quantise [0, 1] floats to u8 with round-half-to-even."""
    return np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_idx_images(path: PathLike, images: np.ndarray) -> None:
    """Write a (N, rows, cols) stack. Floats are treated as [0, 1] intensities."""
    arr = np.asarray(images)
    require(arr.ndim == 3, f"write_idx_images: expected (N, rows, cols), got {arr.shape}")
    if arr.dtype != np.uint8:
        arr = to_u8(arr)
    header = struct.pack(">IIII", IMAGES_MAGIC, *arr.shape)
    atomic_write_bytes(path, header + np.ascontiguousarray(arr).tobytes())
    LOG.debug("Wrote %d images to %s", arr.shape[0], path)


def write_idx_labels(path: PathLike, labels: np.ndarray) -> None:
    arr = np.asarray(labels)
    require(arr.ndim == 1, "write_idx_labels: expected a 1D label vector")
    require(bool(np.all((arr >= 0) & (arr <= 255))), "write_idx_labels: labels must fit in u8")
    header = struct.pack(">II", LABELS_MAGIC, arr.shape[0])
    atomic_write_bytes(path, header + arr.astype(np.uint8).tobytes())
    LOG.debug("Wrote %d labels to %s", arr.shape[0], path)
