"""Digit sources for the localisation experiments.

Three pieces live here:

* ``synth_digit``: an offline fallback that renders digits from a fixed 5x7
  bitmap font (nearest-neighbour scaled to 20x20, placed in a 28x28 frame with
  +/-2 px jitter and multiplicative intensity noise), so nothing needs to be
  downloaded to run the suite.
* ``make_double_digit``: the 28x56 compositor. Each 28x28 half independently
  holds a digit with probability 0.7; images that come out empty are redrawn.
  Ground-truth boxes are the tight box of pixels > 0.1 inside the slot.
* ``make_single_digit``: plain 28x28 single-label sets (balanced, or with
  the even digits cut to one tenth) for the softmax vs PC-softmax comparison.

Every sample draws from its own substream (index = sample position), so the
output for sample i does not depend on how many samples come before it.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Sequence

import cv2
import numpy as np

from core.errors import DatasetError, require
from core.geometry import LocalizationSample, tight_box
from core.rng import RngStream
from core.synth import LabeledDataset
from inputs.idx_reader import DIGIT_SIDE, N_DIGIT_CLASSES, DigitImage

LOG = logging.getLogger(__name__)

GLYPH_SIZE = 20
GLYPH_OFFSET = (DIGIT_SIDE - GLYPH_SIZE) // 2
MAX_JITTER = 2
INTENSITY_RANGE = (0.7, 1.0)

# single-label digits: the unbalanced variant keeps one in ten even digits
UNBALANCED_KEEP = 0.1
UNBALANCED_CLASSES = (0, 2, 4, 6, 8)

SLOT_PROBABILITY = 0.7
FOREGROUND_THRESHOLD = 0.1
CANVAS_SHAPE = (DIGIT_SIDE, 2 * DIGIT_SIDE)

DigitPool = Mapping[int, Sequence[DigitImage]]

# 5 columns x 7 rows, '#' = ink.
_FONT_5X7: Dict[int, Sequence[str]] = {
    0: (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    1: ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    2: (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    3: ("#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."),
    4: ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    5: ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    6: ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    7: ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    8: (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    9: (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
}


def glyph_bitmap(cls: int) -> np.ndarray:
    """5x7 base bitmap (7 rows, 5 columns) of a digit as a 0/1 uint8 array."""
    require(0 <= cls < N_DIGIT_CLASSES, f"digit class {cls} outside 0-9")
    return np.array([[c == "#" for c in row] for row in _FONT_5X7[cls]], dtype=np.uint8)


def _scaled_glyph(cls: int) -> np.ndarray:
    return cv2.resize(glyph_bitmap(cls), (GLYPH_SIZE, GLYPH_SIZE), interpolation=cv2.INTER_NEAREST)


def synth_digit(cls: int, rng: RngStream) -> DigitImage:
    """Render one jittered, noisy digit of class `cls`.

    Consumes: two jitter integers, then one uniform per pixel of the glyph.
    """
    glyph = _scaled_glyph(cls).astype(np.float64)
    dy = int(rng.integers(-MAX_JITTER, MAX_JITTER + 1))
    dx = int(rng.integers(-MAX_JITTER, MAX_JITTER + 1))
    noise = rng.uniform_range(INTENSITY_RANGE[0], INTENSITY_RANGE[1], glyph.shape)
    pixels = np.zeros((DIGIT_SIDE, DIGIT_SIDE), dtype=np.float64)
    top, left = GLYPH_OFFSET + dy, GLYPH_OFFSET + dx
    pixels[top:top + GLYPH_SIZE, left:left + GLYPH_SIZE] = glyph * noise
    return DigitImage(pixels, cls)


def synthetic_pool(per_class: int, rng: RngStream) -> Dict[int, List[DigitImage]]:
    """`per_class` rendered digits for every class; class c uses substream c."""
    require(per_class >= 1, "synthetic_pool: per_class >= 1")
    pool: Dict[int, List[DigitImage]] = {}
    for cls in range(N_DIGIT_CLASSES):
        stream = rng.substream(cls)
        pool[cls] = [synth_digit(cls, stream) for _ in range(per_class)]
    LOG.info("Synthetic digit pool: %d glyphs per class", per_class)
    return pool


def pool_from_digits(digits: Sequence[DigitImage]) -> Dict[int, List[DigitImage]]:
    """Group DigitImages (e.g. from read_idx) by class, keeping file order."""
    pool: Dict[int, List[DigitImage]] = {cls: [] for cls in range(N_DIGIT_CLASSES)}
    for digit in digits:
        pool[digit.label].append(digit)
    return pool


def _check_pool(pool: DigitPool) -> None:
    missing = [cls for cls in range(N_DIGIT_CLASSES) if len(pool.get(cls, ())) == 0]
    if missing:
        raise DatasetError(f"digit pool has no images for classes {missing}")
    for cls in range(N_DIGIT_CLASSES):
        shape = pool[cls][0].pixels.shape
        require(shape == (DIGIT_SIDE, DIGIT_SIDE), f"pool digits must be {DIGIT_SIDE}x{DIGIT_SIDE}, got {shape}")


def _compose_one(pool: DigitPool, rng: RngStream) -> LocalizationSample:
    while True:
        present = [bool(rng.bernoulli(SLOT_PROBABILITY)) for _ in range(2)]
        if any(present):
            break
    canvas = np.zeros(CANVAS_SHAPE, dtype=np.float64)
    objects = []
    for slot, is_present in enumerate(present):
        if not is_present:
            continue
        cls = int(rng.integers(0, N_DIGIT_CLASSES))
        candidates = pool[cls]
        digit = candidates[int(rng.integers(0, len(candidates)))]
        x0 = slot * DIGIT_SIDE
        canvas[:, x0:x0 + DIGIT_SIDE] = digit.pixels
        box = tight_box(digit.pixels > FOREGROUND_THRESHOLD, offset_x=x0)
        if box is None:
            raise DatasetError(f"digit of class {cls} has no pixel above {FOREGROUND_THRESHOLD}")
        objects.append((cls, box))
    return LocalizationSample(canvas, tuple(objects))


def make_double_digit(pool: DigitPool, n: int, rng: RngStream) -> List[LocalizationSample]:
    """Compose `n` double-digit samples from `pool`.

    Raises:
        ContractViolation: n <= 0.
        DatasetError: a digit class has no images in the pool.
    """
    require(n > 0, f"make_double_digit: n must be positive, got {n}")
    _check_pool(pool)
    samples = [_compose_one(pool, rng.substream(i)) for i in range(n)]
    two = sum(1 for s in samples if len(s.objects) == 2)
    LOG.info("Composed %d double-digit samples (%d with two digits)", n, two)
    return samples


def single_digit_counts(per_class: int, balanced: bool) -> List[int]:
    """Per-class counts for the single-label experiment."""
    require(per_class >= 1, "single_digit_counts: per_class >= 1")
    if balanced:
        return [per_class] * N_DIGIT_CLASSES
    return [max(1, int(per_class * UNBALANCED_KEEP)) if cls in UNBALANCED_CLASSES else per_class
            for cls in range(N_DIGIT_CLASSES)]


def make_single_digit(pool: DigitPool, counts: Sequence[int], rng: RngStream) -> LabeledDataset:
    """One 28x28 digit per row, `counts[c]` distinct pool images of class c.

    Class c draws its images through substream c (a permutation of its pool
    entries), so the rows of one class do not depend on the other counts.
    Rows come out class-major; shuffling is left to the split.

    Raises:
        DatasetError: a class has fewer pool images than requested.
    """
    require(len(counts) == N_DIGIT_CLASSES, f"make_single_digit: {len(counts)} counts for {N_DIGIT_CLASSES} classes")
    _check_pool(pool)
    images: List[np.ndarray] = []
    labels: List[int] = []
    for cls, count in enumerate(counts):
        candidates = pool[cls]
        if count > len(candidates):
            raise DatasetError(f"class {cls}: {count} digits requested, pool has {len(candidates)}")
        order = rng.substream(cls).permutation(len(candidates))
        images.extend(candidates[int(i)].pixels for i in order[:count])
        labels.extend([cls] * int(count))
    LOG.info("Single-digit set: %d images, counts %s", len(labels), list(counts))
    return LabeledDataset(np.stack(images)[:, None, :, :], np.asarray(labels, dtype=np.int64))
