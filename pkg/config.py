"""Configuración del proyecto (valores por defecto seguros).

Este archivo lee variables de entorno para permitir configuraciones por
entorno (local, CI, benchmarks largos). No depende de ningún otro módulo del
proyecto; `main.py` resuelve la configuración efectiva de cada ejecución como
entorno < archivo `--config` JSON < flags explícitos.
"""
import os
from pathlib import Path
from typing import Final, Tuple

VERSION: Final[str] = "1.0.0"

# Identificador de build para la procedencia de los reportes (estilo git-describe)
BUILD_ID: Final[str] = os.getenv("MIEST_BUILD_ID", f"v{VERSION}")

# ============================================================================
# OPTIMIZADOR (Adam)
# ============================================================================

ADAM_LR: Final[float] = float(os.getenv("MIEST_ADAM_LR", "1e-3"))
ADAM_BETA1: Final[float] = float(os.getenv("MIEST_ADAM_BETA1", "0.9"))
ADAM_BETA2: Final[float] = float(os.getenv("MIEST_ADAM_BETA2", "0.999"))
ADAM_EPS: Final[float] = float(os.getenv("MIEST_ADAM_EPS", "1e-8"))

# ============================================================================
# ENTRENAMIENTO
# ============================================================================

BATCH_SIZE: Final[int] = int(os.getenv("MIEST_BATCH_SIZE", "128"))
EPOCHS_SYNTH: Final[int] = int(os.getenv("MIEST_EPOCHS_SYNTH", "30"))
EPOCHS_DIGITS: Final[int] = int(os.getenv("MIEST_EPOCHS_DIGITS", "10"))

# Calendario del benchmark de localización (más pasos que el `train` por defecto)
LOC_EPOCHS: Final[int] = int(os.getenv("MIEST_LOC_EPOCHS", "30"))
LOC_BATCH_SIZE: Final[int] = int(os.getenv("MIEST_LOC_BATCH_SIZE", "64"))
LOC_ADAM_LR: Final[float] = float(os.getenv("MIEST_LOC_ADAM_LR", "2e-3"))

# Tamaños de las capas ocultas del MLP, separados por comas (3 ocultas + salida = 4 capas)
MLP_HIDDEN: Final[Tuple[int, ...]] = tuple(
    int(h) for h in os.getenv("MIEST_MLP_HIDDEN", "64,64,64").split(",") if h.strip()
)

# Métrica de validación para elegir la época: val_loss | val_accuracy | last
SELECTION_METRIC: Final[str] = os.getenv("MIEST_SELECTION_METRIC", "val_loss")

# ============================================================================
# ORÁCULO Y LOCALIZACIÓN
# ============================================================================

ORACLE_SAMPLES: Final[int] = int(os.getenv("MIEST_ORACLE_SAMPLES", "1000000"))
REGION_SIZE: Final[int] = int(os.getenv("MIEST_REGION_SIZE", "1"))
THRESHOLD_RATIO: Final[float] = float(os.getenv("MIEST_THRESHOLD_RATIO", "0.2"))
IOU_THRESHOLD: Final[float] = float(os.getenv("MIEST_IOU_THRESHOLD", "0.5"))

# Glifos por clase del pool sintético de dígitos (make-mmnist --synthetic-digits)
SYNTH_DIGITS_PER_CLASS: Final[int] = int(os.getenv("MIEST_SYNTH_DIGITS_PER_CLASS", "200"))

# ============================================================================
# SALIDAS
# ============================================================================

OUTPUT_DIR: Final[str] = os.getenv("MIEST_OUTPUT_DIR", str(Path("outputs") / "runs"))
LOG_LEVEL: Final[str] = os.getenv("MIEST_LOG_LEVEL", "INFO")
