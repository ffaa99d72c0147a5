"""Aritmética numérica estable sobre arrays float64.

Los "tensores" del proyecto son `np.ndarray` de dtype float64 en orden C
(row-major). Las funciones públicas nunca devuelven NaN/Inf salvo que su
contrato lo diga.
"""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from core.errors import require

LOG = logging.getLogger(__name__)

GRADCHECK_STEP: float = 1e-5
GRADCHECK_FLOOR: float = 1e-8


def as_tensor(values: object, name: str = "tensor") -> np.ndarray:
    """Convierte a array float64 contiguo y verifica que sea finito.

    Raises:
        ContractViolation: si hay elementos no finitos.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    require(bool(np.all(np.isfinite(arr))), f"{name}: contiene valores no finitos")
    return arr


def logsumexp(v: np.ndarray, axis: int = -1) -> np.ndarray | float:
    """log Σ exp(v) restando el máximo antes de exponenciar.

    Con un vector devuelve un escalar; con un batch reduce sobre `axis`.

    Raises:
        ContractViolation: si el eje reducido está vacío.
    """
    v = np.asarray(v, dtype=np.float64)
    require(v.ndim > 0 and v.shape[axis] > 0, "logsumexp: vector vacío")
    vmax = np.max(v, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True)) + vmax
    out = np.squeeze(out, axis=axis)
    if out.ndim == 0:
        return float(out)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Normalización exponencial; cada fila suma 1."""
    logits = np.asarray(logits, dtype=np.float64)
    require(logits.ndim > 0 and logits.shape[axis] > 0, "softmax: vector vacío")
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    lse = logsumexp(logits, axis=axis)
    return logits - np.expand_dims(np.asarray(lse), axis)


def argmax_lowest(values: np.ndarray, axis: int = -1) -> np.ndarray | int:
    """argmax con empates resueltos por el índice más bajo (regla global)."""
    out = np.argmax(np.asarray(values), axis=axis)
    if np.ndim(out) == 0:
        return int(out)
    return out


def gradient_check(
    f: Callable[[np.ndarray], float],
    point: np.ndarray,
    analytic_grad: np.ndarray,
    h: float = GRADCHECK_STEP,
) -> float:
    """Compara un gradiente analítico con diferencias centrales.

    Args:
        f: función escalar evaluable en un entorno de `point`.
        point: punto de evaluación (no se modifica).
        analytic_grad: gradiente a verificar, misma forma que `point`.
        h: paso de las diferencias centrales por coordenada.

    Returns:
        Máximo error relativo |a - n| / max(|a|, |n|, 1e-8) sobre las coordenadas.

    Raises:
        ContractViolation: si las formas no coinciden.
    """
    point = np.asarray(point, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    require(point.shape == analytic.shape,
            f"gradient_check: forma {analytic.shape} != {point.shape}")

    flat = point.ravel()
    numeric = np.empty_like(flat)
    shifted = flat.copy()
    for i in range(flat.size):
        orig = shifted[i]
        shifted[i] = orig + h
        f_plus = float(f(shifted.reshape(point.shape)))
        shifted[i] = orig - h
        f_minus = float(f(shifted.reshape(point.shape)))
        shifted[i] = orig
        numeric[i] = (f_plus - f_minus) / (2.0 * h)

    a = analytic.ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), GRADCHECK_FLOOR)
    err = float(np.max(np.abs(a - numeric) / denom)) if flat.size else 0.0
    LOG.debug("gradient_check: %d coordenadas, error relativo máximo %.3e", flat.size, err)
    return err
