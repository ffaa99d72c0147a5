"""Cajas delimitadoras en píxeles (coordenadas inclusivas) y muestras de localización."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.errors import require


@dataclass(frozen=True)
class BoundingBox:
    """Caja [x_min, x_max] × [y_min, y_max] en píxeles, ambos extremos incluidos."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        require(self.x_min <= self.x_max and self.y_min <= self.y_max, f"caja inválida: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def within(self, height: int, width: int) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max < width and self.y_max < height

    def to_dict(self) -> Dict[str, int]:
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, data: Dict[str, int]) -> "BoundingBox":
        return cls(int(data["x_min"]), int(data["y_min"]), int(data["x_max"]), int(data["y_max"]))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """|a∩b| / |a∪b| con áreas de píxeles inclusivas."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / float(a.area + b.area - inter)


def tight_box(mask: np.ndarray, offset_x: int = 0, offset_y: int = 0) -> Optional[BoundingBox]:
    """Caja mínima que cubre los píxeles verdaderos de `mask`; None si está vacía."""
    rows = np.flatnonzero(np.any(mask, axis=1))
    cols = np.flatnonzero(np.any(mask, axis=0))
    if rows.size == 0:
        return None
    return BoundingBox(int(cols[0]) + offset_x, int(rows[0]) + offset_y,
                       int(cols[-1]) + offset_x, int(rows[-1]) + offset_y)


@dataclass(frozen=True)
class LocalizationSample:
    """Imagen en escala de grises + un objeto (etiqueta, caja) por dígito presente."""

    image: np.ndarray
    objects: Tuple[Tuple[int, BoundingBox], ...]

    def __post_init__(self) -> None:
        image = np.asarray(self.image, dtype=np.float64)
        require(image.ndim == 2, "LocalizationSample: imagen 2D")
        require(len(self.objects) >= 1, "LocalizationSample: al menos un objeto")
        h, w = image.shape
        for label, box in self.objects:
            require(box.within(h, w), f"caja {box} fuera de la imagen {h}×{w}")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "objects", tuple((int(l), b) for l, b in self.objects))

    @property
    def labels(self) -> List[int]:
        """Clases presentes, ordenadas y sin repetir."""
        return sorted({label for label, _ in self.objects})

    def boxes_for(self, label: int) -> List[BoundingBox]:
        return [box for l, box in self.objects if l == label]

    def multi_hot(self, n_classes: int) -> np.ndarray:
        target = np.zeros(n_classes, dtype=np.int64)
        target[self.labels] = 1
        return target
