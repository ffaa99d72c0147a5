"""Persistencia de modelos en un único documento JSON versionado ("miest-model/1").

Estructura:
  {
    "format_version": "miest-model/1",
    "architecture": {...descriptor...},
    "loss": {"variant": ..., "prior": ..., "label_priors": ...},
    "parameters": {"W0": {"shape": [64, 2], "data": [...]}, ...},
    "metadata": {...}
  }

Los reales se escriben con la repr más corta que reproduce el float64 (a lo sumo
17 cifras significativas), así que cargar un modelo guardado devuelve los
mismos bits. Las claves van ordenadas: mismo modelo, mismos bytes.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from atomic_io import atomic_write_text
from core.errors import (
    ContractViolation,
    MalformedModelError,
    ShapeInconsistencyError,
    UnsupportedVersionError,
)
from core.losses_mi import LossSpec
from core.models import Model, build_from_descriptor
from outputs.report_writer import to_jsonable

LOG = logging.getLogger(__name__)

MODEL_FORMAT = "miest-model/1"


def model_document(model: Model, loss_spec: LossSpec, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    parameters = {}
    for name in sorted(model.params):
        arr = model.params[name]
        if not np.all(np.isfinite(arr)):
            raise ContractViolation(f"save_model: parámetro {name} con valores no finitos")
        parameters[name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    return {
        "format_version": MODEL_FORMAT,
        "architecture": model.descriptor(),
        "loss": loss_spec.to_dict(),
        "parameters": parameters,
        "metadata": to_jsonable(metadata or {}),
    }


def save_model(model: Model, path: Union[str, Path], loss_spec: LossSpec,
               metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Guarda arquitectura, parámetros y variante de salida.

    Args:
        model: MlpModel o ConvGapModel.
        path: archivo destino (escritura atómica).
        loss_spec: variante de salida con la que se entrenó (y su prior).
        metadata: datos libres (semilla, época elegida, build id...).
    """
    doc = model_document(model, loss_spec, metadata)
    written = atomic_write_text(path, json.dumps(doc, sort_keys=True, allow_nan=False) + "\n")
    LOG.info("Modelo %s guardado en %s", doc["architecture"]["kind"], written)
    return written


def _restore_parameters(model: Model, parameters: Any) -> None:
    if not isinstance(parameters, dict):
        raise MalformedModelError("'parameters' debe ser un objeto")
    expected = set(model.params)
    found = set(parameters)
    if expected != found:
        raise ShapeInconsistencyError(
            f"parámetros {sorted(found)} no coinciden con la arquitectura {sorted(expected)}")
    for name in sorted(expected):
        entry = parameters[name]
        try:
            shape = tuple(int(s) for s in entry["shape"])
            data = np.array(entry["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedModelError(f"parámetro {name} ilegible: {exc}") from exc
        if data.ndim != 1 or data.size != int(np.prod(shape)):
            raise ShapeInconsistencyError(f"{name}: {data.size} valores para la forma {list(shape)}")
        if shape != model.params[name].shape:
            raise ShapeInconsistencyError(
                f"{name}: forma {list(shape)} != {list(model.params[name].shape)} según la arquitectura")
        if not np.all(np.isfinite(data)):
            raise MalformedModelError(f"{name}: valores no finitos")
        model.params[name] = data.reshape(shape)


def load_model(path: Union[str, Path]) -> Tuple[Model, LossSpec, Dict[str, Any]]:
    """Carga un modelo guardado con `save_model`.

    Returns:
        (modelo, variante de salida, metadata).

    Raises:
        UnsupportedVersionError: format_version distinto de "miest-model/1".
        MalformedModelError: JSON truncado/ilegible o campos ausentes.
        ShapeInconsistencyError: parámetros que no encajan con la arquitectura.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"{path}: JSON inválido o truncado ({exc})") from exc
    if not isinstance(doc, dict):
        raise MalformedModelError(f"{path}: el documento no es un objeto")
    version = doc.get("format_version")
    if version != MODEL_FORMAT:
        raise UnsupportedVersionError(f"{path}: versión {version!r}, se esperaba {MODEL_FORMAT!r}")
    for key in ("architecture", "loss", "parameters"):
        if key not in doc:
            raise MalformedModelError(f"{path}: falta el campo '{key}'")
    try:
        model = build_from_descriptor(doc["architecture"])
    except (ContractViolation, KeyError, TypeError) as exc:
        raise MalformedModelError(f"{path}: descriptor de arquitectura inválido ({exc})") from exc
    try:
        loss_spec = LossSpec.from_dict(doc["loss"])
    except (ContractViolation, KeyError, TypeError, ValueError) as exc:
        raise MalformedModelError(f"{path}: variante de salida inválida ({exc})") from exc
    _restore_parameters(model, doc["parameters"])
    LOG.info("Modelo %s cargado desde %s", doc["architecture"].get("kind"), path)
    return model, loss_spec, doc.get("metadata", {})
