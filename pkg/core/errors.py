"""Jerarquía de errores tipados del proyecto.

Todos los errores propios heredan de `MiestError` para que el orquestador
(`main.py`) pueda traducirlos a códigos de salida sin capturar excepciones
ajenas.
"""
from __future__ import annotations


class MiestError(Exception):
    """Raíz de todos los errores del proyecto."""


class ContractViolation(MiestError, ValueError):
    """Precondición de una operación incumplida (forma, rango, dominio)."""


class DatasetError(MiestError):
    """Dataset ausente, vacío o incompatible con el modelo/la pérdida."""


class ModelFormatError(MiestError):
    """Archivo de modelo ilegible."""


class UnsupportedVersionError(ModelFormatError):
    pass


class MalformedModelError(ModelFormatError):
    pass


class ShapeInconsistencyError(ModelFormatError):
    """El descriptor de arquitectura no coincide con los arrays guardados."""


class IdxFormatError(MiestError):
    """Archivo IDX inválido."""


class IdxBadMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


def require(condition: bool, message: str) -> None:
    """Lanza `ContractViolation(message)` si `condition` es falsa."""
    if not condition:
        raise ContractViolation(message)
