"""Configuración común de pytest: raíz del proyecto en sys.path y marca `slow`."""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from core.rng import RngStream  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="ejecuta también los tests de aceptación largos")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: entrenamiento completo; requiere --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="necesita --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> RngStream:
    return RngStream(1234, 0)


@pytest.fixture
def np_rng() -> np.random.Generator:
    """Generador para construir casos de prueba (no forma parte del código bajo test)."""
    return np.random.default_rng(20240601)
