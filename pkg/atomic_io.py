"""Escrituras atómicas de archivos (temporal en el mismo directorio + os.replace).

Nivel transversal como `config.py`: no depende de ningún otro módulo del
proyecto, así `inputs/` y `outputs/` comparten la misma rutina sin importarse
entre sí.
"""
import os
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Escribe `data` en `path`; si algo falla el destino queda como estaba."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, target)
    finally:
        if os.path.exists(tmp_path):
            try:
                os.remove(tmp_path)
            except OSError:
                pass
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    """UTF-8, saltos de línea tal cual (sin traducción de plataforma)."""
    return atomic_write_bytes(path, text.encode("utf-8"))
