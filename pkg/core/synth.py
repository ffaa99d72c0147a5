"""Benchmark sintético: mezclas de gaussianas isótropas y oráculo Monte Carlo de MI.

La mezcla de referencia tiene cinco componentes con medias escalares
(0, +2, −2, +4, −4) expandidas a vectores constantes c·1_D y covarianza
identidad. El dataset no balanceado usa 6000/12000/18000/24000/30000 muestras
por clase; el balanceado, 12000 por clase.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.errors import require
from core.losses_mi import Prior
from core.numerics import logsumexp
from core.rng import RngStream

LOG = logging.getLogger(__name__)

DEFAULT_SCALAR_MEANS: Tuple[float, ...] = (0.0, 2.0, -2.0, 4.0, -4.0)
UNBALANCED_COUNTS: Tuple[int, ...] = (6000, 12000, 18000, 24000, 30000)
BALANCED_COUNT: int = 12000
SPLIT_RATIOS: Tuple[float, float, float] = (0.70, 0.15, 0.15)

_LOG_2PI = math.log(2.0 * math.pi)
_MC_CHUNK = 100_000


@dataclass(frozen=True)
class MixtureSpec:
    """Mezcla de M gaussianas N(μ_y, I) en R^D con prior P(y)."""

    means: np.ndarray
    prior: Prior

    def __post_init__(self) -> None:
        means = np.array(self.means, dtype=np.float64)
        require(means.ndim == 2 and means.shape[0] >= 1 and means.shape[1] >= 1,
                f"MixtureSpec: means (M, D) con D >= 1, recibido {means.shape}")
        require(self.prior.n_classes == means.shape[0], "MixtureSpec: prior y medias con distinto M")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.means.shape[0])

    @classmethod
    def from_scalar_means(cls, dim: int, scalar_means: Sequence[float] = DEFAULT_SCALAR_MEANS,
                          prior: Optional[Prior] = None) -> "MixtureSpec":
        """Expande cada media escalar c a c·1_D."""
        require(dim >= 1, f"dim debe ser >= 1, recibido {dim}")
        scalars = np.asarray(scalar_means, dtype=np.float64)
        means = np.repeat(scalars[:, None], dim, axis=1)
        return cls(means=means, prior=prior or Prior.uniform(len(scalars)))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "M": self.n_classes, "means": self.means.tolist(),
                "prior": self.prior.probs.tolist()}


@dataclass(frozen=True)
class LabeledDataset:
    """X (N×D o N×H×W) y etiquetas enteras en {0..M−1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        require(X.shape[0] >= 1, "LabeledDataset: N >= 1")
        require(y.shape == (X.shape[0],), f"LabeledDataset: y {y.shape} no coincide con N={X.shape[0]}")
        require(bool(np.all(y >= 0)), "LabeledDataset: etiquetas negativas")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def class_counts(self, n_classes: int) -> np.ndarray:
        return np.bincount(self.y, minlength=n_classes)[:n_classes]

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx])


def sample(spec: MixtureSpec, counts: Sequence[int], rng: RngStream) -> LabeledDataset:
    """counts[y] filas de N(μ_y, I) por clase, barajadas.

    Cada clase usa su propio subflujo (índice = clase), así que el resultado no
    depende del orden de generación.

    Raises:
        ContractViolation: counts de longitud distinta a M, negativos o todos cero.
    """
    counts = [int(c) for c in counts]
    require(len(counts) == spec.n_classes, f"counts de longitud {len(counts)} != M={spec.n_classes}")
    require(all(c >= 0 for c in counts), "counts negativos")
    require(sum(counts) >= 1, "counts todos cero")
    xs, ys = [], []
    for label, count in enumerate(counts):
        if count == 0:
            continue
        noise = rng.substream(label).normal((count, spec.dim))
        xs.append(spec.means[label] + noise)
        ys.append(np.full(count, label, dtype=np.int64))
    X = np.concatenate(xs, axis=0)
    y = np.concatenate(ys)
    order = rng.substream(spec.n_classes).permutation(X.shape[0])
    LOG.debug("sample: %d filas, D=%d, counts=%s", X.shape[0], spec.dim, counts)
    return LabeledDataset(X[order], y[order])


def log_pdf(spec: MixtureSpec, x: np.ndarray) -> Tuple[np.ndarray | float, np.ndarray]:
    """(log P(x), log P(x|y) por clase).

    Acepta un punto (D,) o un batch (N, D); con un batch devuelve (N,) y (N, M).

    Raises:
        ContractViolation: si la dimensión no coincide.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    require(xb.ndim == 2 and xb.shape[1] == spec.dim, f"log_pdf: x con D={xb.shape[-1]} != {spec.dim}")
    sq = np.sum((xb[:, None, :] - spec.means[None, :, :]) ** 2, axis=-1)
    log_cond = -0.5 * spec.dim * _LOG_2PI - 0.5 * sq
    if spec.n_classes == 1:
        log_px = log_cond[:, 0].copy()
    else:
        log_px = np.asarray(logsumexp(log_cond + spec.prior.log_probs, axis=-1))
    if single:
        return float(log_px[0]), log_cond[0]
    return log_px, log_cond


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    n_samples: int


def mc_mi(spec: MixtureSpec, n_samples: int, rng: RngStream) -> McEstimate:
    """(1/N) Σ log P(x_i|y_i)/P(x_i) con (x_i, y_i) muestreados de la conjunta.

    Raises:
        ContractViolation: n_samples < 2.
    """
    require(n_samples >= 2, "mc_mi: n_samples >= 2")
    ratios = np.empty(n_samples, dtype=np.float64)
    for chunk, start in enumerate(range(0, n_samples, _MC_CHUNK)):
        stop = min(start + _MC_CHUNK, n_samples)
        stream = rng.substream(chunk)
        labels = stream.categorical(spec.prior.probs, stop - start)
        x = spec.means[labels] + stream.normal((stop - start, spec.dim))
        log_px, log_cond = log_pdf(spec, x)
        ratios[start:stop] = log_cond[np.arange(stop - start), labels] - log_px
    estimate = float(np.mean(ratios))
    std_error = float(np.std(ratios, ddof=1) / math.sqrt(n_samples))
    LOG.info("mc_mi: D=%d M=%d N=%d -> %.4f ± %.4f", spec.dim, spec.n_classes, n_samples, estimate, std_error)
    return McEstimate(estimate=estimate, std_error=std_error, n_samples=n_samples)


def split_indices(n: int, rng: RngStream,
                  ratios: Tuple[float, float, float] = SPLIT_RATIOS) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Índices train/val/test 70/15/15 sobre una permutación del flujo."""
    require(n >= 1, "split_indices: n >= 1")
    order = rng.permutation(n)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]


def split_dataset(ds: LabeledDataset, rng: RngStream) -> Tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    train, val, test = split_indices(len(ds), rng)
    require(min(len(train), len(val), len(test)) >= 1, "split_dataset: dataset demasiado pequeño para 70/15/15")
    return ds.subset(train), ds.subset(val), ds.subset(test)
