"""Bucle de entrenamiento mini-batch con Adam y métricas de clasificación.

El entrenamiento es determinista por semilla: el barajado de cada época sale
de un subflujo propio (índice = época) del `RngStream` de entrenamiento.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from core.errors import require
from core.losses_mi import LossSpec, batch_loss_and_grad, estimate_mi, mi_prior_for, predict_labels
from core.models import Model, predict_logits
from core.optim import AdamState, adam_step
from core.rng import RngStream

LOG = logging.getLogger(__name__)

SELECTION_METRICS = ("val_loss", "val_accuracy", "last")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    selection: str = "val_loss"

    def __post_init__(self) -> None:
        require(self.epochs >= 1, "epochs >= 1")
        require(self.batch_size >= 1, "batch_size >= 1")
        require(self.selection in SELECTION_METRICS, f"selection debe ser uno de {SELECTION_METRICS}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    val_mi_estimate: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class TrainingHistory:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def final_train_loss(self) -> float:
        return self.records[-1].train_loss if self.records else float("nan")


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    require(predicted.shape == labels.shape and labels.size >= 1, "accuracy: formas incompatibles o vacías")
    return float(np.mean(predicted == labels))


def per_class_recall(predicted: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Recall por clase; NaN para clases sin muestras."""
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    recalls = np.full(n_classes, np.nan)
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            recalls[c] = float(np.mean(predicted[mask] == c))
    return recalls


def per_class_accuracy(predicted: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    """Media de los recalls por clase (atenúa el dominio de las clases mayoritarias)."""
    recalls = per_class_recall(predicted, labels, n_classes)
    return float(np.nanmean(recalls))


def per_label_accuracy(predicted: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Multietiqueta: fracción de imágenes con presencia/ausencia de cada etiqueta acertada."""
    predicted = np.asarray(predicted)
    targets = np.asarray(targets)
    require(predicted.shape == targets.shape, "per_label_accuracy: formas incompatibles")
    return np.mean(predicted == targets, axis=0)


def evaluate_split(model: Model, X: np.ndarray, labels: np.ndarray, spec: LossSpec) -> Dict[str, float]:
    """Pérdida media, exactitud y (para cabezas softmax) estimación de MI en un split."""
    logits = predict_logits(model, X)
    loss, _ = batch_loss_and_grad(logits, labels, spec)
    predicted = predict_labels(logits, spec)
    if spec.variant.is_multilabel:
        acc = float(np.mean(per_label_accuracy(predicted, labels)))
        mi = float("nan")
    else:
        acc = accuracy(predicted, labels)
        mi = estimate_mi(model, X, labels, mi_prior_for(spec, model.n_classes)).mi_estimate
    return {"loss": loss, "accuracy": acc, "mi_estimate": mi}


def train(
    model: Model,
    X: np.ndarray,
    labels: np.ndarray,
    spec: LossSpec,
    config: TrainConfig,
    rng: RngStream,
    X_val: Optional[np.ndarray] = None,
    labels_val: Optional[np.ndarray] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainingHistory:
    """Entrena `model` en sitio.

    Con split de validación se conservan los parámetros de la mejor época según
    `config.selection`.

    Args:
        model: MlpModel o ConvGapModel (mutable durante el entrenamiento).
        X, labels: split de entrenamiento.
        spec: variante de salida/pérdida.
        config: hiperparámetros.
        rng: flujo de barajado.
        X_val, labels_val: split de validación opcional.
        on_epoch: callback por época (p. ej. el log CSV).

    Returns:
        Historial por época y la época elegida.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    require(n >= 1, "train: split de entrenamiento vacío")
    has_val = X_val is not None and labels_val is not None
    selection = config.selection if has_val else "last"

    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    history = TrainingHistory()
    best_score = np.inf
    best_params: Optional[Dict[str, np.ndarray]] = None

    for epoch in range(1, config.epochs + 1):
        order = rng.substream(epoch).permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            grads, loss = model.backward(X[idx], labels[idx], spec)
            adam_step(state, model.params, grads)
            total += loss * idx.size
            seen += idx.size
        train_loss = total / seen

        if has_val:
            metrics = evaluate_split(model, X_val, labels_val, spec)
        else:
            metrics = {"loss": float("nan"), "accuracy": float("nan"), "mi_estimate": float("nan")}
        record = EpochRecord(epoch, train_loss, metrics["loss"], metrics["accuracy"], metrics["mi_estimate"])
        history.records.append(record)
        LOG.info("Época %d/%d: train_loss=%.5f val_loss=%.5f val_acc=%.4f val_mi=%.4f",
                 epoch, config.epochs, record.train_loss, record.val_loss, record.val_accuracy,
                 record.val_mi_estimate)
        if on_epoch is not None:
            on_epoch(record)

        score = {"val_loss": record.val_loss, "val_accuracy": -record.val_accuracy, "last": 0.0}[selection]
        if selection == "last" or score < best_score:
            best_score = score
            history.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}

    if best_params is not None:
        model.params.update(best_params)
    LOG.info("Entrenamiento terminado: época elegida %d (%s)", history.best_epoch, selection)
    return history
