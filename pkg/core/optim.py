"""Adam con corrección de sesgo, determinista y sin estado global."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from core.errors import require

DEFAULT_LR: float = 1e-3
DEFAULT_BETA1: float = 0.9
DEFAULT_BETA2: float = 0.999
DEFAULT_EPS: float = 1e-8


@dataclass
class AdamState:
    """Momentos por parámetro, contador de pasos e hiperparámetros."""

    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Dict[str, np.ndarray],
              grads: Dict[str, np.ndarray]) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Un paso de Adam: θ ← θ − lr·m̂ / (√v̂ + ε).

    Actualiza `params` y los momentos en sitio y los devuelve.

    Raises:
        ContractViolation: si faltan gradientes o las formas no coinciden.
    """
    require(set(grads) == set(params), f"adam_step: gradientes {sorted(grads)} != parámetros {sorted(params)}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name in sorted(params):
        p, g = params[name], grads[name]
        require(p.shape == g.shape, f"adam_step: {name} {g.shape} != {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
