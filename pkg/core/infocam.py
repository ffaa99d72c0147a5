"""Mapas de intensidad (CAM / infoCAM / infoCAM+), cajas y métricas de localización.

Con S_m(a, b) = (1/(H·W)) Σ_k W[m, k] g_k(a, b) (contribución de la celda al
logit m, GAP incluido):

- CAM:       S_y(a, b); su suma sobre la rejilla es n(x)_y.
- infoCAM:   suma en ventana R×R de S_y − media_{m≠y} S_m; con R = rejilla
             completa es Diff(PMI) de los logits.
- infoCAM+:  suma en ventana de S_y − S_y', con y' la etiqueta m ≠ y de menor
             puntuación en esa ventana (empate al índice menor).

Las ventanas son válidas: la salida mide (H−R+1)×(W−R+1).
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import require
from core.geometry import BoundingBox, LocalizationSample, iou
from core.losses_mi import LossSpec, predict_labels
from core.models import ConvGapModel

LOG = logging.getLogger(__name__)

DEFAULT_THRESHOLD_RATIO: float = 0.2
DEFAULT_IOU_THRESHOLD: float = 0.5


class MapMode(str, enum.Enum):
    CAM = "cam"
    INFOCAM = "infocam"
    INFOCAM_PLUS = "infocam_plus"

    @classmethod
    def parse(cls, text: str) -> "MapMode":
        """Acepta también la grafía de la CLI (`infocam-plus`)."""
        return cls(text.strip().lower().replace("-", "_"))


@dataclass(frozen=True)
class IntensityMap:
    grid: np.ndarray
    mode: MapMode
    region_size: int
    feature_h: int
    feature_w: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        require(grid.shape == (self.feature_h - self.region_size + 1, self.feature_w - self.region_size + 1),
                f"IntensityMap: rejilla {grid.shape} incompatible con {self.feature_h}×{self.feature_w}, R={self.region_size}")
        require(bool(np.all(np.isfinite(grid))), "IntensityMap: valores no finitos")
        object.__setattr__(self, "grid", grid)


def class_cell_scores(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """S[m, a, b] = (1/(H·W)) Σ_k W[m, k] g_k(a, b), forma (M, H, W)."""
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    require(features.ndim == 3, f"features (K, H, W), recibido {features.shape}")
    require(weights.ndim == 2 and weights.shape[1] == features.shape[0],
            f"weights {weights.shape} no coincide con K={features.shape[0]}")
    k, h, w = features.shape
    return np.tensordot(weights, features, axes=([1], [0])) / (h * w)


def _check_region(features: np.ndarray, region_size: int) -> None:
    h, w = np.shape(features)[1:]
    require(1 <= region_size <= min(h, w), f"R={region_size} fuera de [1, {min(h, w)}]")


def _window_sum(grid: np.ndarray, r: int) -> np.ndarray:
    """Suma sobre ventanas R×R válidas de los dos últimos ejes."""
    if r == 1:
        return grid.copy()
    return sliding_window_view(grid, (r, r), axis=(-2, -1)).sum(axis=(-2, -1))


def _check_label(y: int, n_classes: int) -> None:
    require(0 <= int(y) < n_classes, f"etiqueta {y} fuera de rango [0, {n_classes})")


def cam_map(features: np.ndarray, weights: np.ndarray, y: int, region_size: int = 1) -> IntensityMap:
    """CAM de la clase y; con R > 1 es el CAM suavizado por regiones (ablación sin resta)."""
    scores = class_cell_scores(features, weights)
    _check_label(y, scores.shape[0])
    _check_region(features, region_size)
    k, h, w = np.shape(features)
    return IntensityMap(_window_sum(scores[y], region_size), MapMode.CAM, region_size, h, w)


def infocam_map(features: np.ndarray, weights: np.ndarray, y: int, region_size: int) -> IntensityMap:
    """infoCAM: suma en ventana de la contribución de cada celda a Diff(PMI)."""
    scores = class_cell_scores(features, weights)
    m = scores.shape[0]
    require(m >= 2, "infoCAM requiere M >= 2")
    _check_label(y, m)
    _check_region(features, region_size)
    others = np.delete(scores, y, axis=0).sum(axis=0) / (m - 1)
    diff = scores[y] - others
    k, h, w = np.shape(features)
    return IntensityMap(_window_sum(diff, region_size), MapMode.INFOCAM, region_size, h, w)


def infocam_plus_map(features: np.ndarray, weights: np.ndarray, y: int, region_size: int,
                     global_argmin: bool = False) -> IntensityMap:
    """infoCAM+: resta la etiqueta menos probable y' ≠ y.

    Por defecto y' se elige en cada ventana; con `global_argmin` se elige una
    sola vez con las puntuaciones de toda la rejilla (los logits).
    """
    scores = class_cell_scores(features, weights)
    m = scores.shape[0]
    require(m >= 2, "infoCAM+ requiere M >= 2")
    _check_label(y, m)
    _check_region(features, region_size)
    window = _window_sum(scores, region_size)  # (M, H', W')
    if global_argmin:
        totals = scores.sum(axis=(1, 2))
        totals[y] = np.inf
        y_prime = np.full(window.shape[1:], int(np.argmin(totals)), dtype=np.int64)
    else:
        masked = window.copy()
        masked[y] = np.inf
        y_prime = np.argmin(masked, axis=0)
    diff = scores[y][None, :, :] - scores  # (M, H, W): (w^y − w^m)·g por celda
    diff_window = _window_sum(diff, region_size)
    grid = np.take_along_axis(diff_window, y_prime[None, :, :], axis=0)[0]
    k, h, w = np.shape(features)
    return IntensityMap(grid, MapMode.INFOCAM_PLUS, region_size, h, w)


def intensity_map(features: np.ndarray, weights: np.ndarray, y: int, mode: MapMode,
                  region_size: int = 1, global_argmin: bool = False) -> IntensityMap:
    mode = MapMode(mode)
    if mode is MapMode.CAM:
        return cam_map(features, weights, y, region_size)
    if mode is MapMode.INFOCAM:
        return infocam_map(features, weights, y, region_size)
    return infocam_plus_map(features, weights, y, region_size, global_argmin=global_argmin)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Componente 8-conexa más grande; empates a la de menor índice de barrido.

    El índice de barrido de una componente es el de su primera celda en orden
    fila-mayor.
    """
    mask = np.asarray(mask, dtype=bool)
    require(mask.ndim == 2 and bool(mask.any()), "largest_component: máscara vacía")
    n, labels, stats, _ = cv2.connectedComponentsWithStats(mask.astype(np.uint8), connectivity=8)
    flat = labels.ravel()
    best_key: Optional[Tuple[int, int]] = None
    best_label = 0
    for k in range(1, n):
        area = int(stats[k, cv2.CC_STAT_AREA])
        first = int(np.argmax(flat == k))
        key = (-area, first)
        if best_key is None or key < best_key:
            best_key, best_label = key, k
    return labels == best_label


@dataclass(frozen=True)
class BoxExtraction:
    box: BoundingBox
    component: np.ndarray  # máscara de la componente elegida, en coordenadas del mapa
    retained: np.ndarray   # celdas que superan el umbral


def normalize_minmax(grid: np.ndarray) -> np.ndarray:
    """Escala a [0, 1]; una rejilla constante queda en unos."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = float(grid.min()), float(grid.max())
    if hi == lo:
        return np.ones_like(grid)
    return (grid - lo) / (hi - lo)


def extract_bbox(imap: IntensityMap, input_h: int, input_w: int,
                 threshold_ratio: float = DEFAULT_THRESHOLD_RATIO) -> BoxExtraction:
    """Caja de la mayor componente de celdas con intensidad ≥ ratio del máximo.

    La caja en celdas se amplía con el campo de la ventana R×R y se lleva a
    píxeles escalando por input/rejilla de características, recortada a la
    imagen.
    """
    grid = imap.grid
    require(grid.size > 0, "extract_bbox: mapa vacío")
    require(input_h >= grid.shape[0] and input_w >= grid.shape[1], "extract_bbox: entrada menor que el mapa")
    require(0.0 <= threshold_ratio <= 1.0, f"threshold_ratio fuera de [0, 1]: {threshold_ratio}")

    retained = normalize_minmax(grid) >= threshold_ratio
    component = largest_component(retained)
    rows = np.flatnonzero(component.any(axis=1))
    cols = np.flatnonzero(component.any(axis=0))
    r = imap.region_size
    fh, fw = imap.feature_h, imap.feature_w
    # floor/ceil en enteros: a·input/rejilla sin redondeo de punto flotante
    y_min = int(rows[0]) * input_h // fh
    x_min = int(cols[0]) * input_w // fw
    y_max = -(-(int(rows[-1]) + r) * input_h // fh) - 1
    x_max = -(-(int(cols[-1]) + r) * input_w // fw) - 1
    box = BoundingBox(
        x_min=max(0, min(x_min, input_w - 1)),
        y_min=max(0, min(y_min, input_h - 1)),
        x_max=max(0, min(x_max, input_w - 1)),
        y_max=max(0, min(y_max, input_h - 1)),
    )
    return BoxExtraction(box=box, component=component, retained=retained)


@dataclass(frozen=True)
class LocalizationMetrics:
    gt_loc: float
    top1_loc: float
    n_samples: int
    n_objects: int

    def to_dict(self) -> dict:
        return {"gt_loc": self.gt_loc, "top1_loc": self.top1_loc,
                "n_samples": self.n_samples, "n_objects": self.n_objects}


@dataclass(frozen=True)
class LocalizationRecord:
    """Resultado de localizar una etiqueta presente en una muestra."""

    sample_index: int
    label: int
    predicted_box: BoundingBox
    gt_boxes: Tuple[BoundingBox, ...]
    class_correct: bool

    @property
    def best_iou(self) -> float:
        return max(iou(self.predicted_box, gt) for gt in self.gt_boxes)


def score_localization(records: Sequence[LocalizationRecord], n_samples: int,
                       iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> LocalizationMetrics:
    """GT-Loc: IoU > umbral con la etiqueta verdadera; Top-1-Loc: además clasificación correcta."""
    require(len(records) >= 1, "score_localization: sin registros")
    loc_ok = np.array([rec.best_iou > iou_threshold for rec in records])
    cls_ok = np.array([rec.class_correct for rec in records])
    return LocalizationMetrics(
        gt_loc=float(np.mean(loc_ok)),
        top1_loc=float(np.mean(loc_ok & cls_ok)),
        n_samples=int(n_samples),
        n_objects=len(records),
    )


def localize(model: ConvGapModel, samples: Sequence[LocalizationSample], loss_spec: LossSpec,
             mode: MapMode, region_size: int = 1, threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
             global_argmin: bool = False, batch_size: int = 256) -> List[LocalizationRecord]:
    """Una caja predicha por etiqueta presente en cada muestra."""
    require(len(samples) >= 1, "localize: sin muestras")
    require(not model.head_bias, "CAM requiere una cabeza sin bias")
    records: List[LocalizationRecord] = []
    weights = model.head_weights
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        images = np.stack([s.image for s in chunk])
        logits, features = model.forward_features(images)
        predicted = predict_labels(logits, loss_spec)
        for offset, sample in enumerate(chunk):
            in_h, in_w = sample.image.shape
            for label in sample.labels:
                imap = intensity_map(features[offset], weights, label, mode, region_size, global_argmin)
                box = extract_bbox(imap, in_h, in_w, threshold_ratio).box
                if loss_spec.variant.is_multilabel:
                    correct = bool(predicted[offset, label] == 1)
                else:
                    correct = bool(predicted[offset] == label)
                records.append(LocalizationRecord(start + offset, label, box,
                                                  tuple(sample.boxes_for(label)), correct))
    return records


def evaluate_localization(model: ConvGapModel, samples: Sequence[LocalizationSample], mode: MapMode,
                          region_size: int, threshold_ratio: float, loss_spec: LossSpec,
                          iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                          global_argmin: bool = False) -> LocalizationMetrics:
    """GT-Loc y Top-1-Loc promediados sobre los pares (muestra, etiqueta presente)."""
    mode = MapMode(mode)
    records = localize(model, samples, loss_spec, mode, region_size, threshold_ratio, global_argmin)
    metrics = score_localization(records, len(samples), iou_threshold)
    LOG.info("Localización %s (R=%d): GT-Loc %.4f, Top-1-Loc %.4f sobre %d objetos",
             mode.value, region_size, metrics.gt_loc, metrics.top1_loc, metrics.n_objects)
    return metrics
