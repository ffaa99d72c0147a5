"""Flujos aleatorios reproducibles basados en contador (Philox de numpy).

Un `RngStream` queda determinado por (seed, stream_id): la clave de Philox es
exactamente ese par, así que dos construcciones iguales producen la misma
secuencia en cualquier plataforma. Los subflujos (`substream`) derivan un
stream_id nuevo con `SeedSequence`, sin consumir estado del flujo padre.

Las normales se generan con Box-Muller sobre el flujo uniforme (no con el
ziggurat de numpy) para que la secuencia sea reproducible fuera de numpy.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from core.errors import require

_MASK64 = (1 << 64) - 1


class RngStream:
    """Flujo aleatorio de un único consumidor.

    Args:
        seed: semilla de 64 bits sin signo.
        stream_id: identificador del flujo dentro de la semilla.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        require(0 <= int(seed) <= _MASK64, f"seed fuera de rango: {seed}")
        require(0 <= int(stream_id) <= _MASK64, f"stream_id fuera de rango: {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def counter(self) -> np.ndarray:
        """Contador interno de Philox (4 palabras de 64 bits)."""
        return np.array(self._bitgen.state["state"]["counter"], dtype=np.uint64)

    def substream(self, index: int) -> "RngStream":
        """Flujo hijo independiente identificado por `index`."""
        ss = np.random.SeedSequence([self.seed, self.stream_id, int(index)])
        child_id = int(ss.generate_state(1, dtype=np.uint64)[0])
        return RngStream(self.seed, child_id)

    def uniform(self, size: int | Sequence[int] | None = None) -> np.ndarray | float:
        """Uniformes en [0, 1)."""
        return self._gen.random(size)

    def uniform_range(self, low: float, high: float, size: int | Sequence[int] | None = None) -> np.ndarray | float:
        return low + (high - low) * self._gen.random(size)

    def normal(self, size: int | Sequence[int]) -> np.ndarray:
        """Normales estándar por Box-Muller (pares coseno/seno intercalados)."""
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        n_pairs = (n + 1) // 2
        u1 = 1.0 - self._gen.random(n_pairs)  # (0, 1]: evita log(0)
        u2 = self._gen.random(n_pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * n_pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n].reshape(shape)

    def integers(self, low: int, high: int, size: int | Sequence[int] | None = None) -> np.ndarray | int:
        """Enteros en [low, high)."""
        out = self._gen.integers(low, high, size=size, dtype=np.int64)
        if size is None:
            return int(out)
        return out

    def bernoulli(self, p: float, size: int | Sequence[int] | None = None) -> np.ndarray | bool:
        u = self._gen.random(size)
        if size is None:
            return bool(u < p)
        return u < p

    def categorical(self, probs: np.ndarray, size: int) -> np.ndarray:
        """Muestras de una distribución discreta por CDF inversa."""
        cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
        u = self._gen.random(size) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, len(cdf) - 1).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
