"""Escritura de reportes JSON y del log de entrenamiento CSV.

Diseño:
  - No importa módulos de `core/` ni `inputs/`.
  - Escritura atómica (temp + os.replace) para que un reporte nunca quede a medias.
  - Todo reporte lleva procedencia: format_version, seed y build_id.
  - NaN/Inf se serializan como null (JSON estricto).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from atomic_io import atomic_write_text

LOG = logging.getLogger(__name__)

REPORT_FORMAT = "miest-report/1"
TRAINING_LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "val_mi_estimate")

PathLike = Union[str, Path]


def to_jsonable(value: Any) -> Any:
    """Convierte escalares/arrays de numpy y floats no finitos a tipos JSON estrictos."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return to_jsonable(value.tolist())
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    return value


def build_report(payload: Mapping[str, Any], seed: Optional[int], build_id: str) -> Dict[str, Any]:
    """Añade la cabecera de procedencia al contenido del reporte."""
    report: Dict[str, Any] = {"format_version": REPORT_FORMAT, "seed": seed, "build_id": build_id}
    report.update(to_jsonable(dict(payload)))
    return report


def write_report(path: PathLike, payload: Mapping[str, Any], seed: Optional[int], build_id: str) -> Path:
    """Escribe un reporte JSON con procedencia.

    Args:
        path: destino (se crean los directorios padre).
        payload: contenido del reporte (métricas, estimaciones...).
        seed: semilla de la ejecución (None si el comando no usa aleatoriedad).
        build_id: identificador de versión tipo git-describe.

    Returns:
        La ruta escrita.
    """
    report = build_report(payload, seed, build_id)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    written = atomic_write_text(path, text)
    LOG.info("Reporte escrito en %s", written)
    return written


def read_report(path: PathLike) -> Dict[str, Any]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return "" if not math.isfinite(value) else repr(value)
    return str(value)


def write_training_log(path: PathLike, rows: Iterable[Mapping[str, Any]],
                       columns: Sequence[str] = TRAINING_LOG_COLUMNS) -> Path:
    """Log CSV por época; celdas no finitas quedan vacías."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    n = 0
    for row in rows:
        writer.writerow([_format_cell(row[c]) for c in columns])
        n += 1
    written = atomic_write_text(path, buffer.getvalue())
    LOG.info("Log de entrenamiento (%d épocas) escrito en %s", n, written)
    return written


def read_training_log(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
