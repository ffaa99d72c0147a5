"""Las dos familias de red del proyecto, con forward y backward manuales.

- `MlpModel`: perceptrón multicapa (ReLU en capas ocultas, logits lineales)
  para los experimentos de MI sobre mezclas gaussianas.
- `ConvGapModel`: etapas conv (stride 1, padding válido, ReLU, max-pool 2x2
  opcional) -> global average pooling -> capa lineal SIN bias. Sin bias,
  n(x)_y = Σ_k W[y,k]·GAP(g_k) exactamente, lo que habilita CAM/infoCAM.

Los parámetros viven en un dict nombre -> ndarray float64; el optimizador
(`core.optim`) y el almacén de modelos (`outputs.model_store`) trabajan sobre
ese dict.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import require
from core.losses_mi import LossSpec, batch_loss_and_grad
from core.rng import RngStream

LOG = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]

DEFAULT_HIDDEN: Tuple[int, ...] = (64, 64, 64)

# elementos por bloque del producto fila a fila de `_dense`
_DENSE_BLOCK = 1 << 21


def _dense(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """a (N, J) · wᵀ (O, J) -> (N, O) sin gemm.

    Cada fila de la salida se reduce sólo sobre la fila correspondiente de `a`
    (suma por pares de numpy a lo largo del último eje): una muestra produce
    los mismos bits sola o dentro de un batch de cualquier tamaño.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, j = a.shape
    o = w.shape[0]
    out = np.empty((n, o), dtype=np.float64)
    step = max(1, _DENSE_BLOCK // max(1, o * j))
    for start in range(0, n, step):
        block = a[start:start + step]
        out[start:start + step] = (block[:, None, :] * w[None, :, :]).sum(axis=-1)
    return out


def _linear(a: np.ndarray, w: np.ndarray, exact: bool) -> np.ndarray:
    # el entrenamiento usa gemm: mismos shapes en cada corrida, mismos bits
    return _dense(a, w) if exact else a @ w.T


def _init_weight(shape: Tuple[int, ...], fan_in: int, fan_out: int,
                 rng: Optional[RngStream], init: str) -> np.ndarray:
    """Glorot uniforme U(−√(6/(fan_in+fan_out)), +√(...)) o ceros."""
    if init == "zeros":
        return np.zeros(shape, dtype=np.float64)
    require(init == "glorot", f"init desconocido: {init}")
    require(rng is not None, "init='glorot' requiere un RngStream")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_range(-limit, limit, shape)


class MlpModel:
    """Red feed-forward: capas ocultas ReLU y salida identidad (logits).

    Args:
        layer_dims: (D, ocultas..., M). Por defecto 3 ocultas + salida.
        rng: flujo del que se inicializan los pesos (biases a cero).
        init: "glorot" o "zeros".
    """

    kind = "mlp"

    def __init__(self, layer_dims: Sequence[int], rng: Optional[RngStream] = None, init: str = "glorot") -> None:
        dims = tuple(int(d) for d in layer_dims)
        require(len(dims) >= 2, "MlpModel: al menos entrada y salida")
        require(all(d >= 1 for d in dims), f"MlpModel: dimensiones inválidas {dims}")
        self.layer_dims = dims
        self.params: Params = {}
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"W{i}"] = _init_weight((fan_out, fan_in), fan_in, fan_out, rng, init)
            self.params[f"b{i}"] = np.zeros(fan_out, dtype=np.float64)

    @classmethod
    def build(cls, input_dim: int, n_classes: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
              rng: Optional[RngStream] = None, init: str = "glorot") -> "MlpModel":
        return cls((input_dim, *hidden, n_classes), rng=rng, init=init)

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return (self.layer_dims[0],)

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": self.kind, "layer_dims": list(self.layer_dims)}

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        require(batch.ndim == 2 and batch.shape[1] == self.layer_dims[0],
                f"MlpModel: batch {batch.shape} no coincide con D={self.layer_dims[0]}")
        return batch

    def forward(self, batch: np.ndarray) -> np.ndarray:
        logits, _ = self._forward_cached(self._check_batch(batch))
        return logits

    def _forward_cached(self, x: np.ndarray, exact: bool = True) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
        cache = []
        h = x
        for i in range(self.n_layers):
            z = _linear(h, self.params[f"W{i}"], exact) + self.params[f"b{i}"]
            cache.append((h, z))
            h = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
        return h, cache

    def backward(self, batch: np.ndarray, labels: np.ndarray, loss_spec: LossSpec) -> Tuple[Params, float]:
        """Gradientes de la pérdida media del batch + la pérdida."""
        x = self._check_batch(batch)
        logits, cache = self._forward_cached(x, exact=False)
        loss, delta = batch_loss_and_grad(logits, labels, loss_spec)
        grads: Params = {}
        for i in reversed(range(self.n_layers)):
            h_in, z = cache[i]
            if i < self.n_layers - 1:
                delta = delta * (z > 0.0)
            grads[f"W{i}"] = delta.T @ h_in
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.params[f"W{i}"]
        return grads, loss


@dataclass(frozen=True)
class ConvStage:
    """Etapa conv: kernel h×w, canales in/out, stride 1, padding válido, ReLU, max-pool 2×2 opcional.

    Con `bias=False` una región de entrada nula produce características nulas.
    """

    kernel_h: int
    kernel_w: int
    in_channels: int
    out_channels: int
    pool: bool = False
    bias: bool = True


def _conv_forward(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray],
                  exact: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    bsz, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    # im2col: (B·Ho·Wo, C·kh·kw)
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(bsz * ho * wo, c * kh * kw)
    out = _linear(cols, w.reshape(o, -1), exact)
    if b is not None:
        out = out + b
    return np.ascontiguousarray(out.reshape(bsz, ho, wo, o).transpose(0, 3, 1, 2)), cols


def _conv_backward(dout: np.ndarray, cols: np.ndarray, w: np.ndarray,
                   x_shape: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    bsz, c, h, wd = x_shape
    o, _, kh, kw = w.shape
    ho, wo = dout.shape[2], dout.shape[3]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(o, -1)).reshape(bsz, ho, wo, c, kh, kw)
    dx = np.zeros(x_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


def _maxpool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    bsz, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = x[:, :, :2 * h2, :2 * w2].reshape(bsz, c, h2, 2, w2, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, h2, w2, 4)
    # argmax devuelve el primer máximo en orden de barrido de la ventana
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool_backward(dout: np.ndarray, idx: np.ndarray, x_shape: Tuple[int, ...]) -> np.ndarray:
    bsz, c, h, w = x_shape
    h2, w2 = dout.shape[2], dout.shape[3]
    dwin = np.zeros((bsz, c, h2, w2, 4), dtype=np.float64)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dxc = dwin.reshape(bsz, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(bsz, c, 2 * h2, 2 * w2)
    dx = np.zeros(x_shape, dtype=np.float64)
    dx[:, :, :2 * h2, :2 * w2] = dxc
    return dx


class ConvGapModel:
    """conv -> GAP -> lineal (M×K) sin bias.

    Args:
        input_shape: (C, H, W) de la imagen de entrada.
        stages: etapas convolucionales en orden.
        n_classes: M.
        rng: flujo para la inicialización Glorot.
        init: "glorot" o "zeros".
        head_bias: variante sólo-clasificación con bias en la cabeza (no apta para CAM).
    """

    kind = "conv_gap"

    def __init__(self, input_shape: Sequence[int], stages: Sequence[ConvStage], n_classes: int,
                 rng: Optional[RngStream] = None, init: str = "glorot", head_bias: bool = False) -> None:
        shape = tuple(int(s) for s in input_shape)
        require(len(shape) == 3, f"ConvGapModel: input_shape (C, H, W), recibido {shape}")
        require(len(stages) >= 1, "ConvGapModel: al menos una etapa conv")
        require(n_classes >= 1, "ConvGapModel: n_classes >= 1")
        self.input_shape = shape
        self.stages = tuple(stages)
        self.n_classes = int(n_classes)
        self.head_bias = bool(head_bias)
        self.params: Params = {}

        c, h, w = shape
        for i, st in enumerate(self.stages):
            require(st.in_channels == c, f"etapa {i}: in_channels {st.in_channels} != {c}")
            h, w = h - st.kernel_h + 1, w - st.kernel_w + 1
            if st.pool:
                h, w = h // 2, w // 2
            require(h >= 1 and w >= 1, f"etapa {i}: el mapa de características queda vacío")
            fan_in = st.in_channels * st.kernel_h * st.kernel_w
            fan_out = st.out_channels * st.kernel_h * st.kernel_w
            self.params[f"conv{i}_W"] = _init_weight(
                (st.out_channels, st.in_channels, st.kernel_h, st.kernel_w), fan_in, fan_out, rng, init)
            if st.bias:
                self.params[f"conv{i}_b"] = np.zeros(st.out_channels, dtype=np.float64)
            c = st.out_channels
        self.feature_shape: Tuple[int, int, int] = (c, h, w)
        self.params["head_W"] = _init_weight((self.n_classes, c), c, self.n_classes, rng, init)
        if self.head_bias:
            self.params["head_b"] = np.zeros(self.n_classes, dtype=np.float64)

    def descriptor(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "input_shape": list(self.input_shape),
            "stages": [asdict(st) for st in self.stages],
            "n_classes": self.n_classes,
            "head_bias": self.head_bias,
        }

    @property
    def head_weights(self) -> np.ndarray:
        return self.params["head_W"]

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 3 and self.input_shape[0] == 1:
            x = x[:, None, :, :]
        require(x.ndim == 4 and x.shape[1:] == self.input_shape,
                f"ConvGapModel: batch {np.shape(batch)} no coincide con {self.input_shape}")
        return x

    def _forward_cached(self, x: np.ndarray,
                        exact: bool = True) -> Tuple[np.ndarray, np.ndarray, List[Dict[str, Any]]]:
        cache: List[Dict[str, Any]] = []
        h = x
        for i, st in enumerate(self.stages):
            entry: Dict[str, Any] = {"x_shape": h.shape}
            z, entry["cols"] = _conv_forward(h, self.params[f"conv{i}_W"], self.params.get(f"conv{i}_b"), exact)
            entry["z"] = z
            h = np.maximum(z, 0.0)
            if st.pool:
                entry["pool_in_shape"] = h.shape
                h, entry["pool_idx"] = _maxpool_forward(h)
            cache.append(entry)
        features = h
        gap = features.mean(axis=(2, 3))
        logits = _linear(gap, self.params["head_W"], exact)
        if self.head_bias:
            logits = logits + self.params["head_b"]
        return logits, features, cache

    def forward(self, batch: np.ndarray) -> np.ndarray:
        logits, _, _ = self._forward_cached(self._check_batch(batch))
        return logits

    def forward_features(self, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Logits (B, M) y mapas de características previos al pooling (B, K, H, W)."""
        logits, features, _ = self._forward_cached(self._check_batch(batch))
        return logits, features

    def backward(self, batch: np.ndarray, labels: np.ndarray, loss_spec: LossSpec) -> Tuple[Params, float]:
        x = self._check_batch(batch)
        logits, features, cache = self._forward_cached(x, exact=False)
        loss, dlogits = batch_loss_and_grad(logits, labels, loss_spec)
        grads: Params = {}
        gap = features.mean(axis=(2, 3))
        grads["head_W"] = dlogits.T @ gap
        if self.head_bias:
            grads["head_b"] = dlogits.sum(axis=0)
        hw = features.shape[2] * features.shape[3]
        dgap = dlogits @ self.params["head_W"]
        dh = np.broadcast_to((dgap / hw)[:, :, None, None], features.shape).copy()
        for i in reversed(range(len(self.stages))):
            entry = cache[i]
            if self.stages[i].pool:
                dh = _maxpool_backward(dh, entry["pool_idx"], entry["pool_in_shape"])
            dz = dh * (entry["z"] > 0.0)
            dh, grads[f"conv{i}_W"], db = _conv_backward(
                dz, entry["cols"], self.params[f"conv{i}_W"], entry["x_shape"])
            if self.stages[i].bias:
                grads[f"conv{i}_b"] = db
        return grads, loss


Model = MlpModel | ConvGapModel


def forward(model: Model, batch: np.ndarray) -> np.ndarray:
    """n_φ(x) para un batch; para ConvGapModel ver también `forward_features`."""
    return model.forward(batch)


def backward(model: Model, batch: np.ndarray, labels: np.ndarray, loss_spec: LossSpec) -> Tuple[Params, float]:
    return model.backward(batch, labels, loss_spec)


def predict_logits(model: Model, X: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Inferencia por bloques (resultado idéntico a un único forward)."""
    X = np.asarray(X, dtype=np.float64)
    chunks = [model.forward(X[i:i + batch_size]) for i in range(0, X.shape[0], batch_size)]
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, model.n_classes))


def default_digit_stages() -> Tuple[ConvStage, ...]:
    """Arquitectura por defecto para 28×56 -> mapas 32×11×25.

    3×3(1→16)+pool, 3×3(16→32), 1×1(32→32), todas sin bias: el fondo vacío
    del lienzo vale exactamente 0 en cada mapa de clase, así el umbral
    min-max de `extract_bbox` no queda por debajo del fondo.
    """
    return (
        ConvStage(3, 3, 1, 16, pool=True, bias=False),
        ConvStage(3, 3, 16, 32, bias=False),
        ConvStage(1, 1, 32, 32, bias=False),
    )


def build_from_descriptor(descriptor: Dict[str, Any]) -> Model:
    """Modelo con parámetros a cero a partir de su descriptor de arquitectura."""
    kind = descriptor.get("kind")
    if kind == MlpModel.kind:
        return MlpModel(descriptor["layer_dims"], init="zeros")
    if kind == ConvGapModel.kind:
        stages = [ConvStage(**{k: st[k] for k in ("kernel_h", "kernel_w", "in_channels", "out_channels", "pool")},
                            bias=bool(st.get("bias", True)))
                  for st in descriptor["stages"]]
        return ConvGapModel(descriptor["input_shape"], stages, descriptor["n_classes"],
                            init="zeros", head_bias=bool(descriptor.get("head_bias", False)))
    require(False, f"tipo de modelo desconocido: {kind}")
    raise AssertionError("unreachable")
