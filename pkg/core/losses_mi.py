"""Capas de salida softmax / PC-softmax / (PC-)sigmoid, sus pérdidas y la
lectura de información mutua a partir de los logits.

Un clasificador entrenado con entropía cruzada es un estimador de MI: la PMI
de un par (x, y) es n(x)_y − log Σ_y' P(y') exp(n(x)_y'), y la MI del dataset
es la media de esas PMI. PC-softmax (softmax corregido por el prior) hace que
log σ_p(n)_y sea exactamente esa PMI.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.errors import ContractViolation, DatasetError, require
from core.numerics import argmax_lowest, as_tensor, logsumexp, softmax

LOG = logging.getLogger(__name__)

PRIOR_SUM_TOL: float = 1e-12


@dataclass(frozen=True)
class Prior:
    """Distribución P(y) sobre M etiquetas (todas las entradas > 0)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64)
        require(probs.ndim == 1 and probs.size >= 1, "Prior: se espera un vector no vacío")
        require(bool(np.all(probs > 0)), "Prior: todas las probabilidades deben ser > 0")
        require(abs(float(np.sum(probs)) - 1.0) <= PRIOR_SUM_TOL, "Prior: no suma 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_classes(self) -> int:
        return int(self.probs.size)

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.probs == self.probs[0]))

    def entropy(self) -> float:
        """H(prior) = −Σ P log P, cota superior de I(X; Y)."""
        return float(-np.sum(self.probs * np.log(self.probs)))

    @classmethod
    def uniform(cls, n_classes: int) -> "Prior":
        require(n_classes >= 1, "Prior.uniform: n_classes >= 1")
        return cls(np.full(n_classes, 1.0 / n_classes))

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "Prior":
        """Prior empírico sin suavizado.

        Raises:
            DatasetError: si alguna clase no tiene muestras.
        """
        counts = np.asarray(counts, dtype=np.float64)
        if counts.size == 0 or np.any(counts <= 0):
            raise DatasetError(f"prior empírico con clases vacías: counts={counts.astype(int).tolist()}")
        probs = counts / counts.sum()
        # renormalizar una vez más deja la suma dentro de 1e-12
        return cls(probs / probs.sum())

    def to_dict(self) -> Dict[str, Any]:
        return {"probs": self.probs.tolist()}


def empirical_prior(labels: np.ndarray, n_classes: int) -> Prior:
    """Frecuencias de clase del split de entrenamiento."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
    return Prior.from_counts(counts[:n_classes])


class LossVariant(str, enum.Enum):
    SOFTMAX_CE = "softmax_ce"
    PC_SOFTMAX_CE = "pc_softmax_ce"
    SIGMOID_MULTILABEL = "sigmoid_multilabel"
    PC_SIGMOID_MULTILABEL = "pc_sigmoid_multilabel"

    @property
    def is_multilabel(self) -> bool:
        return self in (LossVariant.SIGMOID_MULTILABEL, LossVariant.PC_SIGMOID_MULTILABEL)

    @property
    def is_prior_corrected(self) -> bool:
        return self in (LossVariant.PC_SOFTMAX_CE, LossVariant.PC_SIGMOID_MULTILABEL)


@dataclass(frozen=True)
class LossSpec:
    """Variante de salida + prior.

    `prior` es obligatorio (y exclusivo) para `pc_softmax_ce`; `label_priors`
    (p_m por etiqueta, en (0, 1)) para `pc_sigmoid_multilabel`.
    """

    variant: LossVariant
    prior: Optional[Prior] = None
    label_priors: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        variant = LossVariant(self.variant)
        object.__setattr__(self, "variant", variant)
        needs_prior = variant is LossVariant.PC_SOFTMAX_CE
        needs_label_priors = variant is LossVariant.PC_SIGMOID_MULTILABEL
        require((self.prior is not None) == needs_prior,
                f"LossSpec({variant.value}): prior {'requerido' if needs_prior else 'no admitido'}")
        require((self.label_priors is not None) == needs_label_priors,
                f"LossSpec({variant.value}): label_priors {'requeridos' if needs_label_priors else 'no admitidos'}")
        if self.label_priors is not None:
            p = np.array(self.label_priors, dtype=np.float64)
            require(p.ndim == 1 and bool(np.all((p > 0) & (p < 1))),
                    "LossSpec: label_priors deben estar en (0, 1)")
            p.setflags(write=False)
            object.__setattr__(self, "label_priors", p)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "prior": None if self.prior is None else self.prior.probs.tolist(),
            "label_priors": None if self.label_priors is None else self.label_priors.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossSpec":
        prior = data.get("prior")
        label_priors = data.get("label_priors")
        return cls(
            variant=LossVariant(data["variant"]),
            prior=None if prior is None else Prior(np.asarray(prior, dtype=np.float64)),
            label_priors=None if label_priors is None else np.asarray(label_priors, dtype=np.float64),
        )


def empirical_label_priors(targets: np.ndarray) -> np.ndarray:
    """p_m = fracción de imágenes con la etiqueta m presente.

    Raises:
        DatasetError: si alguna etiqueta nunca (o siempre) aparece.
    """
    targets = np.asarray(targets, dtype=np.float64)
    p = targets.mean(axis=0)
    if np.any(p <= 0) or np.any(p >= 1):
        raise DatasetError(f"prior por etiqueta degenerado: {np.round(p, 4).tolist()}")
    return p


def _check_dims(logits: np.ndarray, prior: Optional[Prior]) -> None:
    require(logits.ndim >= 1 and logits.shape[-1] >= 1, "logits vacíos")
    if prior is not None:
        require(prior.n_classes == logits.shape[-1],
                f"dimensión de logits {logits.shape[-1]} != M del prior {prior.n_classes}")


def _prior_offsets(prior: Prior) -> np.ndarray:
    # log P − max log P: con prior uniforme es exactamente 0.0 en cada entrada
    logp = prior.log_probs
    return logp - np.max(logp)


def _log_normalizer(logits: np.ndarray, prior: Optional[Prior]) -> np.ndarray | float:
    """log Σ_y' P(y') exp(n_y'); sin prior, log Σ exp(n_y') − log M."""
    m = logits.shape[-1]
    if prior is None:
        return logsumexp(logits, axis=-1) - np.log(m)
    logp = prior.log_probs
    return logsumexp(logits + _prior_offsets(prior), axis=-1) + np.max(logp)


def pc_softmax(logits: np.ndarray, prior: Prior) -> np.ndarray:
    """σ_p(n)_y = exp(n_y) / Σ_y' P(y') exp(n_y').

    No es una distribución: Σ_y P(y) σ_p(n)_y = 1. Con prior uniforme es M·softmax.
    """
    logits = as_tensor(logits, "logits")
    _check_dims(logits, prior)
    return np.exp(pmi_all(logits, prior))


def pmi_all(logits: np.ndarray, prior: Optional[Prior] = None) -> np.ndarray:
    """PMI de todas las etiquetas; `prior=None` usa la forma uniforme + log M."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_dims(logits, prior)
    norm = _log_normalizer(logits, prior)
    return logits - np.expand_dims(np.asarray(norm), -1)


def pmi(logits: np.ndarray, label: int, prior: Optional[Prior] = None) -> float:
    """PMI(x, y) = n_y − log Σ P(y') exp(n_y').

    Raises:
        ContractViolation: etiqueta fuera de rango o dimensiones incompatibles.
    """
    logits = as_tensor(logits, "logits")
    require(logits.ndim == 1, "pmi: se espera un vector de logits")
    _check_label(label, logits.shape[-1])
    return float(logits[label] - _log_normalizer(logits, prior))


def _check_label(label: int, n_classes: int) -> None:
    if not (0 <= int(label) < n_classes):
        raise ContractViolation(f"etiqueta {label} fuera de rango [0, {n_classes})")


def pc_sigmoid(logit: float | np.ndarray, p: float | np.ndarray) -> float | np.ndarray:
    """exp(z) / (p·exp(z) + 1 − p): PC-softmax de dos clases con logits (z, 0).

    Raises:
        ContractViolation: si p no está en (0, 1).
    """
    p_arr = np.asarray(p, dtype=np.float64)
    require(bool(np.all((p_arr > 0) & (p_arr < 1))), f"pc_sigmoid: p fuera de (0, 1): {p}")
    z = np.asarray(logit, dtype=np.float64)
    out = np.exp(z - np.logaddexp(np.log(p_arr) + z, np.log1p(-p_arr)))
    return float(out) if out.ndim == 0 else out


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def cross_entropy_loss(logits: np.ndarray, label: int | np.ndarray, spec: LossSpec) -> float:
    """Pérdida de un ejemplo.

    Para las variantes softmax `label` es un índice; para las multietiqueta un
    vector binario de longitud M (la pérdida suma las M tareas binarias).
    """
    logits = as_tensor(logits, "logits")
    require(logits.ndim == 1, "cross_entropy_loss: se espera un vector de logits")
    labels = np.asarray([label]) if not spec.variant.is_multilabel else np.asarray(label)[None, :]
    loss, _ = batch_loss_and_grad(logits[None, :], labels, spec)
    return loss


def batch_loss_and_grad(logits: np.ndarray, labels: np.ndarray, spec: LossSpec) -> Tuple[float, np.ndarray]:
    """Pérdida media del batch y su gradiente respecto a los logits.

    Args:
        logits: (B, M).
        labels: (B,) enteros para softmax; (B, M) binario para multietiqueta.
        spec: variante de salida.

    Returns:
        (pérdida media, dL/dlogits de forma (B, M)).
    """
    logits = np.asarray(logits, dtype=np.float64)
    require(logits.ndim == 2 and logits.shape[0] >= 1, "batch_loss_and_grad: logits (B, M) con B >= 1")
    b, m = logits.shape
    variant = spec.variant

    if not variant.is_multilabel:
        labels = np.asarray(labels)
        require(labels.shape == (b,), f"labels: forma {labels.shape} != ({b},)")
        if np.any(labels < 0) or np.any(labels >= m):
            raise ContractViolation(f"etiquetas fuera de rango [0, {m})")
        labels = labels.astype(np.int64)
        prior = spec.prior if variant is LossVariant.PC_SOFTMAX_CE else None
        if prior is None:
            shifted = logits
            norm = logsumexp(logits, axis=-1)
        else:
            _check_dims(logits, prior)
            shifted = logits + _prior_offsets(prior)
            norm = logsumexp(shifted, axis=-1) + np.max(prior.log_probs)
        rows = np.arange(b)
        per_example = norm - logits[rows, labels]
        grad = softmax(shifted, axis=-1)
        grad[rows, labels] -= 1.0
        return float(np.mean(per_example)), grad / b

    targets = np.asarray(labels, dtype=np.float64)
    require(targets.shape == (b, m), f"targets: forma {targets.shape} != ({b}, {m})")
    require(bool(np.all((targets == 0) | (targets == 1))), "targets multietiqueta deben ser 0/1")
    if variant is LossVariant.PC_SIGMOID_MULTILABEL:
        require(spec.label_priors.size == m, "label_priors no coincide con M")
        logp = np.log(spec.label_priors)
        log1mp = np.log1p(-spec.label_priors)
        log_norm = np.logaddexp(logp + logits, log1mp)
        # presente: −(z − log_norm); ausente (logit 0): log_norm
        per_label = log_norm - targets * logits
        grad = sigmoid(logits + logp - log1mp) - targets
    else:
        # BCE estable: softplus(z) − t·z
        per_label = np.logaddexp(0.0, logits) - targets * logits
        grad = sigmoid(logits) - targets
    return float(np.mean(np.sum(per_label, axis=1))), grad / b


def predict_labels(logits: np.ndarray, spec: LossSpec) -> np.ndarray:
    """Decisión de clasificación para la variante de salida.

    softmax y PC-softmax: argmax de σ / σ_p (ambos monótonos en n_y, empates al
    índice menor). Multietiqueta: etiqueta presente si la puntuación supera el
    punto neutro (sigmoid ≥ 0.5, PC-sigmoid ≥ 1).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not spec.variant.is_multilabel:
        return np.asarray(argmax_lowest(logits, axis=-1))
    if spec.variant is LossVariant.PC_SIGMOID_MULTILABEL:
        return (pc_sigmoid(logits, spec.label_priors) >= 1.0).astype(np.int64)
    return (sigmoid(logits) >= 0.5).astype(np.int64)


def prior_corrected_decision(logits: np.ndarray, prior: Prior) -> np.ndarray:
    """argmax_y (n_y − log P(y)): re-basa logits de softmax a la decisión PC."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_dims(logits, prior)
    return np.asarray(argmax_lowest(logits - prior.log_probs, axis=-1))


def diff_pmi(logits: np.ndarray, label: int) -> float:
    """Diff(PMI) = PMI(x, y*) − media de PMI(x, y') para y' ≠ y*.

    Los términos log-sum-exp se cancelan: n_y* − media de los demás logits,
    independiente del prior.
    """
    logits = as_tensor(logits, "logits")
    require(logits.ndim == 1, "diff_pmi: se espera un vector de logits")
    m = logits.size
    require(m >= 2, "diff_pmi: M >= 2")
    _check_label(label, m)
    others = np.delete(logits, int(label))
    return float(logits[label] - np.sum(others) / (m - 1))


@dataclass(frozen=True)
class MiEstimate:
    mi_estimate: float
    per_sample_pmi: np.ndarray

    @property
    def std_error(self) -> float:
        """Error estándar de la media de PMI (0 con una sola muestra)."""
        n = self.per_sample_pmi.size
        if n < 2:
            return 0.0
        return float(np.std(self.per_sample_pmi, ddof=1) / np.sqrt(n))


def mi_prior_for(spec: LossSpec, n_classes: int) -> Optional[Prior]:
    """Prior con el que se lee la PMI de un modelo entrenado con `spec`.

    softmax usa la forma uniforme (+ log M); PC-softmax usa su prior.
    """
    if spec.variant is LossVariant.PC_SOFTMAX_CE:
        return spec.prior
    require(not spec.variant.is_multilabel, "la estimación de MI requiere una cabeza softmax")
    return None


def estimate_mi(model: Any, X: np.ndarray, y: np.ndarray, prior: Optional[Prior] = None,
                batch_size: int = 4096) -> MiEstimate:
    """MI del dataset = media de PMI(forward(x_i), y_i).

    Args:
        model: cualquier modelo con `forward(batch) -> logits`.
        X: entradas (N, ...).
        y: etiquetas (N,).
        prior: prior de la PMI; None = forma uniforme.
        batch_size: tamaño de los bloques de inferencia (no cambia el resultado).

    Raises:
        ContractViolation: dataset vacío o etiquetas fuera de rango.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    require(X.shape[0] >= 1, "estimate_mi: dataset vacío")
    require(y.shape == (X.shape[0],), "estimate_mi: etiquetas y entradas no coinciden")
    pmis = np.empty(X.shape[0], dtype=np.float64)
    for start in range(0, X.shape[0], batch_size):
        stop = min(start + batch_size, X.shape[0])
        logits = model.forward(X[start:stop])
        m = logits.shape[-1]
        if prior is not None:
            require(prior.n_classes == m, f"prior con M={prior.n_classes}, modelo con M={m}")
        if np.any(y[start:stop] >= m) or np.any(y[start:stop] < 0):
            raise ContractViolation(f"etiquetas fuera de rango [0, {m})")
        all_pmi = pmi_all(logits, prior)
        pmis[start:stop] = all_pmi[np.arange(stop - start), y[start:stop]]
    # np.mean usa suma por pares con orden fijo
    return MiEstimate(mi_estimate=float(np.mean(pmis)), per_sample_pmi=pmis)
