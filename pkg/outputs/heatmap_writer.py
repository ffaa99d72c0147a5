"""Exporta mapas de intensidad como imágenes PGM binarias (P5, maxval 255)."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import cv2
import numpy as np
from PIL import Image

LOG = logging.getLogger(__name__)


def to_gray_u8(grid: np.ndarray) -> np.ndarray:
    """Min-max a 0..255 con redondeo al par; un mapa constante queda en 255."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = float(grid.min()), float(grid.max())
    if hi == lo:
        return np.full(grid.shape, 255, dtype=np.uint8)
    return np.rint((grid - lo) / (hi - lo) * 255.0).astype(np.uint8)


def upsample(grid: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Interpolación bilineal a (alto, ancho)."""
    height, width = size
    return cv2.resize(np.asarray(grid, dtype=np.float64), (width, height), interpolation=cv2.INTER_LINEAR)


def write_heatmap(grid: np.ndarray, path: Union[str, Path],
                  upsample_to: Optional[Tuple[int, int]] = None) -> Path:
    """Escribe `grid` como PGM; con `upsample_to` se interpola antes de normalizar.

    Raises:
        OSError: si no se puede escribir el archivo.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError(f"write_heatmap: se espera un mapa 2D no vacío, recibido {grid.shape}")
    if upsample_to is not None:
        grid = upsample(grid, upsample_to)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_gray_u8(grid)).save(target, format="PPM")
    LOG.info("Heatmap %dx%d escrito en %s", grid.shape[1], grid.shape[0], target)
    return target
