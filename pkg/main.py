"""Orquestador / CLI de miest.

Subcomandos:
    gen-synth     mezcla gaussiana -> dataset.csv, train/val/test.csv, oracle.json
    train         entrena un MLP (CSV) o un ConvGapModel (dataset doble dígito)
    estimate-mi   lectura de MI desde los logits frente al oráculo Monte Carlo
    evaluate      reporte de clasificación (exactitud, recall por clase, por etiqueta)
    make-mmnist   dataset de doble dígito (glifos sintéticos o IDX)
    cam           heatmaps PGM de una muestra, uno por modo
    locate        GT-Loc / Top-1-Loc por modo (+ reporte PDF opcional)

Configuración efectiva: variables de entorno (config.py) < `--config` JSON <
flags explícitos. Códigos de salida: 0 éxito, 1 fallo en ejecución, 2 uso.

Uso:
    python main.py gen-synth --dim 1 --balanced --seed 7 --out runs/d1
    python main.py train --data runs/d1 --loss softmax --seed 7 --out runs/d1/softmax
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from core.errors import ContractViolation, DatasetError, MiestError
from core.geometry import LocalizationSample
from core.infocam import MapMode, evaluate_localization, intensity_map, localize
from core.losses_mi import (
    LossSpec,
    LossVariant,
    Prior,
    empirical_label_priors,
    empirical_prior,
    estimate_mi,
    mi_prior_for,
    predict_labels,
    prior_corrected_decision,
)
from core.models import ConvGapModel, MlpModel, default_digit_stages, predict_logits
from core.rng import RngStream
from core.synth import (
    BALANCED_COUNT,
    DEFAULT_SCALAR_MEANS,
    LabeledDataset,
    MixtureSpec,
    mc_mi,
    sample,
    split_dataset,
    split_indices,
)
from core.training import TrainConfig, accuracy, per_class_accuracy, per_class_recall, per_label_accuracy, train
from inputs.datasets import (
    MANIFEST_NAME,
    load_double_digit,
    load_split,
    samples_to_arrays,
    save_double_digit,
    save_labeled_csv,
    save_splits,
    split_samples,
)
from inputs.digits import make_double_digit, pool_from_digits, synthetic_pool
from inputs.idx_reader import read_idx
from outputs.heatmap_writer import upsample, write_heatmap
from outputs.model_store import load_model, save_model
from outputs.report_generator import LocalizationPanel, ReportGenerator
from outputs.report_writer import read_report, write_report, write_training_log

LOG = logging.getLogger(__name__)

# Identificadores de flujo por propósito, todos derivados de la misma semilla
STREAM_DATA = 0
STREAM_SPLIT = 1
STREAM_ORACLE = 2
STREAM_INIT = 3
STREAM_SHUFFLE = 4
STREAM_POOL = 5

LOSS_CHOICES = {
    "softmax": LossVariant.SOFTMAX_CE,
    "pc-softmax": LossVariant.PC_SOFTMAX_CE,
    "sigmoid": LossVariant.SIGMOID_MULTILABEL,
    "pc-sigmoid": LossVariant.PC_SIGMOID_MULTILABEL,
}
ORACLE_NAME = "oracle.json"
MODEL_NAME = "model.json"
TRAINING_LOG_NAME = "training_log.csv"

EXIT_OK = 0
EXIT_FAILURE = 1


class UsageError(Exception):
    """Combinación de flags inválida detectada tras resolver la configuración."""


@dataclass
class RunConfig:
    """Configuración efectiva de una ejecución."""

    seed: Optional[int] = None
    loss: Optional[str] = None
    hidden: Tuple[int, ...] = config.MLP_HIDDEN
    lr: float = config.ADAM_LR
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    epochs: Optional[int] = None
    batch_size: int = config.BATCH_SIZE
    selection: str = config.SELECTION_METRIC
    head_bias: bool = False
    oracle_samples: int = config.ORACLE_SAMPLES
    region_size: int = config.REGION_SIZE
    threshold_ratio: float = config.THRESHOLD_RATIO
    iou_threshold: float = config.IOU_THRESHOLD
    global_argmin: bool = False
    output_dir: str = config.OUTPUT_DIR
    data_dir: Optional[str] = None
    model_path: Optional[str] = None

    def train_config(self, default_epochs: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs or default_epochs, batch_size=self.batch_size, lr=self.lr,
                           beta1=self.beta1, beta2=self.beta2, eps=self.eps, selection=self.selection)


RUN_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Entorno (defaults de RunConfig) < archivo --config < flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"--config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError(f"--config {args.config}: se espera un objeto JSON")
        unknown = sorted(set(data) - RUN_CONFIG_FIELDS)
        if unknown:
            raise UsageError(f"--config: claves desconocidas {unknown}")
        if "hidden" in data:
            data["hidden"] = tuple(int(h) for h in data["hidden"])
        cfg = replace(cfg, **data)
    overrides = {name: getattr(args, name) for name in RUN_CONFIG_FIELDS
                 if getattr(args, name, None) is not None}
    return replace(cfg, **overrides)


# ----------------------------------------------------------------------------
# Tipos de argumento
# ----------------------------------------------------------------------------

def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"se esperaba un entero, recibido {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"debe ser >= 1, recibido {value}")
    return value


def seed_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"semilla inválida {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("la semilla debe estar en [0, 2^64)")
    return value


def int_list(text: str) -> Tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"lista de enteros inválida {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("lista vacía")
    return values


def float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"lista de reales inválida {text!r}")


def map_mode(text: str) -> MapMode:
    try:
        return MapMode.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"modo desconocido {text!r} (cam, infocam, infocam-plus)")


def unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"debe estar en [0, 1], recibido {value}")
    return value


# ----------------------------------------------------------------------------
# Utilidades de datos
# ----------------------------------------------------------------------------

def _require_seed(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise UsageError("--seed es obligatorio para este comando")
    return int(cfg.seed)


def _data_dir(cfg: RunConfig) -> Path:
    if not cfg.data_dir:
        raise UsageError("--data (o `data_dir` en --config) es obligatorio para este comando")
    return Path(cfg.data_dir)


def _model_path(cfg: RunConfig) -> str:
    if not cfg.model_path:
        raise UsageError("--model (o `model_path` en --config) es obligatorio para este comando")
    return cfg.model_path


def _model_seed(metadata: Dict[str, Any], cfg: RunConfig) -> Optional[int]:
    """Semilla del reporte: la del entrenamiento guardada en el modelo."""
    seed = metadata.get("seed")
    return int(seed) if seed is not None else cfg.seed


def _is_double_digit(data_dir: Path) -> bool:
    return (data_dir / MANIFEST_NAME).is_file()


def _synthetic_n_classes(data_dir: Path, *datasets: LabeledDataset) -> int:
    oracle_path = data_dir / ORACLE_NAME
    if oracle_path.is_file():
        return int(read_report(oracle_path)["M"])
    return int(max(int(ds.y.max()) for ds in datasets)) + 1


def _double_digit_splits(data_dir: Path) -> Tuple[Dict[str, List[LocalizationSample]], Dict[str, Any]]:
    samples, manifest = load_double_digit(data_dir)
    train_idx, val_idx, test_idx = split_indices(len(samples), RngStream(int(manifest["seed"]), STREAM_SPLIT))
    return split_samples(samples, train_idx, val_idx, test_idx), manifest


def _pick_split(splits: Dict[str, Any], name: str) -> Any:
    chosen = splits[name]
    if len(chosen) == 0:
        raise DatasetError(f"el split '{name}' está vacío")
    return chosen


def _loss_spec(name: str, train_labels: np.ndarray, n_classes: int) -> LossSpec:
    variant = LOSS_CHOICES[name]
    if variant is LossVariant.PC_SOFTMAX_CE:
        return LossSpec(variant, prior=empirical_prior(train_labels, n_classes))
    if variant is LossVariant.PC_SIGMOID_MULTILABEL:
        return LossSpec(variant, label_priors=empirical_label_priors(train_labels))
    return LossSpec(variant)


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ----------------------------------------------------------------------------
# Comandos
# ----------------------------------------------------------------------------

def cmd_gen_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    means = args.means or DEFAULT_SCALAR_MEANS
    m = len(means)
    if args.balanced:
        counts = [BALANCED_COUNT] * m
    else:
        counts = list(args.counts)
        if len(counts) != m:
            raise UsageError(f"--counts tiene {len(counts)} entradas, la mezcla tiene {m} componentes")
        if any(c < 1 for c in counts):
            raise UsageError("--counts: cada clase necesita al menos una muestra")
    prior = Prior.from_counts(np.asarray(counts))
    spec = MixtureSpec.from_scalar_means(args.dim, means, prior)

    out = _out_dir(cfg)
    ds = sample(spec, counts, RngStream(seed, STREAM_DATA))
    train_ds, val_ds, test_ds = split_dataset(ds, RngStream(seed, STREAM_SPLIT))
    save_labeled_csv(ds, out / "dataset.csv")
    save_splits({"train": train_ds, "val": val_ds, "test": test_ds}, out)

    oracle = mc_mi(spec, cfg.oracle_samples, RngStream(seed, STREAM_ORACLE))
    write_report(out / ORACLE_NAME, {
        "dim": spec.dim,
        "M": spec.n_classes,
        "means": list(means),
        "counts": counts,
        "prior": spec.prior.probs,
        "prior_entropy": spec.prior.entropy(),
        "mc_mi": oracle.estimate,
        "std_error": oracle.std_error,
        "n_samples": oracle.n_samples,
    }, seed, config.BUILD_ID)
    LOG.info("gen-synth: %d filas (D=%d) en %s; oráculo MC %.4f ± %.4f",
             len(ds), spec.dim, out, oracle.estimate, oracle.std_error)
    return EXIT_OK


def _train_synthetic(data_dir: Path, cfg: RunConfig, seed: int):
    train_ds = load_split(data_dir, "train")
    val_ds = load_split(data_dir, "val")
    n_classes = _synthetic_n_classes(data_dir, train_ds, val_ds)
    loss_name = cfg.loss or "softmax"
    if LOSS_CHOICES[loss_name].is_multilabel:
        raise DatasetError(f"--loss {loss_name} requiere un dataset multietiqueta (make-mmnist)")
    spec = _loss_spec(loss_name, train_ds.y, n_classes)
    model = MlpModel.build(train_ds.X.shape[1], n_classes, cfg.hidden, rng=RngStream(seed, STREAM_INIT))
    history = train(model, train_ds.X, train_ds.y, spec, cfg.train_config(config.EPOCHS_SYNTH),
                    RngStream(seed, STREAM_SHUFFLE), val_ds.X, val_ds.y)
    return model, spec, history


def _train_double_digit(data_dir: Path, cfg: RunConfig, seed: int):
    splits, _ = _double_digit_splits(data_dir)
    loss_name = cfg.loss or "pc-sigmoid"
    if not LOSS_CHOICES[loss_name].is_multilabel:
        raise DatasetError(f"--loss {loss_name}: las imágenes de doble dígito requieren sigmoid o pc-sigmoid")
    X, targets = samples_to_arrays(_pick_split(splits, "train"))
    X_val, targets_val = samples_to_arrays(_pick_split(splits, "val"))
    spec = _loss_spec(loss_name, targets, targets.shape[1])
    model = ConvGapModel(X.shape[1:], default_digit_stages(), targets.shape[1],
                         rng=RngStream(seed, STREAM_INIT), head_bias=cfg.head_bias)
    history = train(model, X, targets, spec, cfg.train_config(config.EPOCHS_DIGITS),
                    RngStream(seed, STREAM_SHUFFLE), X_val, targets_val)
    return model, spec, history


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    data_dir = _data_dir(cfg)
    if not data_dir.is_dir():
        raise DatasetError(f"dataset no encontrado: {data_dir}")
    if _is_double_digit(data_dir):
        model, spec, history = _train_double_digit(data_dir, cfg, seed)
    else:
        model, spec, history = _train_synthetic(data_dir, cfg, seed)

    out = _out_dir(cfg)
    metadata = {"seed": seed, "best_epoch": history.best_epoch, "epochs": len(history.records),
                "selection": cfg.selection, "build_id": config.BUILD_ID}
    save_model(model, out / MODEL_NAME, spec, metadata)
    write_training_log(out / TRAINING_LOG_NAME, (r.to_dict() for r in history.records))
    return EXIT_OK


def _load_synthetic_split(data_dir: Path, split: str, n_model_classes: int) -> LabeledDataset:
    ds = load_split(data_dir, split)
    oracle_path = data_dir / ORACLE_NAME
    if oracle_path.is_file():
        m = int(read_report(oracle_path)["M"])
        if m != n_model_classes:
            raise DatasetError(f"el modelo tiene M={n_model_classes} salidas y el dataset M={m} clases")
    if int(ds.y.max()) >= n_model_classes:
        raise DatasetError(f"etiquetas hasta {int(ds.y.max())} para un modelo con M={n_model_classes}")
    return ds


def cmd_estimate_mi(args: argparse.Namespace, cfg: RunConfig) -> int:
    model, spec, metadata = load_model(_model_path(cfg))
    data_dir = _data_dir(cfg)
    if spec.variant.is_multilabel or _is_double_digit(data_dir):
        raise DatasetError("estimate-mi requiere un modelo softmax/PC-softmax y un dataset CSV")
    ds = _load_synthetic_split(data_dir, args.split, model.n_classes)
    estimate = estimate_mi(model, ds.X, ds.y, mi_prior_for(spec, model.n_classes))
    predicted = predict_labels(predict_logits(model, ds.X), spec)

    payload: Dict[str, Any] = {
        "loss": spec.variant.value,
        "split": args.split,
        "n": len(ds),
        "mi_estimate": estimate.mi_estimate,
        "mc_oracle": None,
        "std_error": None,
        "accuracy": accuracy(predicted, ds.y),
        "per_class_accuracy": per_class_accuracy(predicted, ds.y, model.n_classes),
    }
    oracle_path = data_dir / ORACLE_NAME
    if oracle_path.is_file():
        oracle = read_report(oracle_path)
        payload["mc_oracle"] = oracle["mc_mi"]
        payload["std_error"] = oracle["std_error"]
    out = Path(args.out_report) if args.out_report else _out_dir(cfg) / "mi_report.json"
    write_report(out, payload, _model_seed(metadata, cfg), config.BUILD_ID)
    LOG.info("estimate-mi: MI %.4f (oráculo %s), exactitud %.4f",
             estimate.mi_estimate, payload["mc_oracle"], payload["accuracy"])
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    model, spec, metadata = load_model(_model_path(cfg))
    data_dir = _data_dir(cfg)
    payload: Dict[str, Any] = {"loss": spec.variant.value, "split": args.split}
    if _is_double_digit(data_dir):
        if not spec.variant.is_multilabel:
            raise DatasetError("un dataset de doble dígito requiere un modelo multietiqueta")
        splits, _ = _double_digit_splits(data_dir)
        X, targets = samples_to_arrays(_pick_split(splits, args.split))
        predicted = predict_labels(predict_logits(model, X), spec)
        per_label = per_label_accuracy(predicted, targets)
        payload.update({"n": int(X.shape[0]), "per_label_accuracy": per_label,
                        "mean_label_accuracy": float(np.mean(per_label)),
                        "exact_match": float(np.mean(np.all(predicted == targets, axis=1)))})
    else:
        ds = _load_synthetic_split(data_dir, args.split, model.n_classes)
        logits = predict_logits(model, ds.X)
        predicted = predict_labels(logits, spec)
        payload.update({"n": len(ds), "accuracy": accuracy(predicted, ds.y),
                        "per_class_recall": per_class_recall(predicted, ds.y, model.n_classes),
                        "per_class_accuracy": per_class_accuracy(predicted, ds.y, model.n_classes)})
        if spec.variant is LossVariant.SOFTMAX_CE:
            train_prior = empirical_prior(load_split(data_dir, "train").y, model.n_classes)
            rebased = prior_corrected_decision(logits, train_prior)
            payload["prior_corrected_per_class_accuracy"] = per_class_accuracy(rebased, ds.y, model.n_classes)
    out = Path(args.out_report) if args.out_report else _out_dir(cfg) / "evaluation.json"
    write_report(out, payload, _model_seed(metadata, cfg), config.BUILD_ID)
    return EXIT_OK


def cmd_make_mmnist(args: argparse.Namespace, cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    if args.synthetic_digits:
        pool = synthetic_pool(args.per_class, RngStream(seed, STREAM_POOL))
        source = "synthetic"
    else:
        if not (args.idx_images and args.idx_labels):
            raise UsageError("indicar --synthetic-digits o --idx-images y --idx-labels")
        pool = pool_from_digits(read_idx(args.idx_images, args.idx_labels))
        source = f"idx:{Path(args.idx_images).name}"
    samples = make_double_digit(pool, args.n, RngStream(seed, STREAM_DATA))
    save_double_digit(samples, _out_dir(cfg), seed, source)
    return EXIT_OK


def _load_cam_model(path: str) -> Tuple[ConvGapModel, LossSpec]:
    model, spec, _ = load_model(path)
    if not isinstance(model, ConvGapModel):
        raise ContractViolation("los mapas de intensidad requieren un ConvGapModel")
    return model, spec


def cmd_cam(args: argparse.Namespace, cfg: RunConfig) -> int:
    model, _ = _load_cam_model(_model_path(cfg))
    samples, _ = load_double_digit(_data_dir(cfg))
    if not 0 <= args.sample < len(samples):
        raise DatasetError(f"--sample {args.sample} fuera de rango (0..{len(samples) - 1})")
    item = samples[args.sample]
    label = item.labels[0] if args.label is None else args.label
    _, features = model.forward_features(item.image[None, :, :])
    out = _out_dir(cfg)
    h, w = item.image.shape
    for mode in args.mode or list(MapMode):
        imap = intensity_map(features[0], model.head_weights, label, mode, cfg.region_size, cfg.global_argmin)
        write_heatmap(imap.grid, out / f"sample{args.sample}_label{label}_{mode.value}.pgm",
                      upsample_to=(h, w) if args.upsample else None)
    return EXIT_OK


def _report_panels(model: ConvGapModel, spec: LossSpec, samples: Sequence[LocalizationSample],
                   mode: MapMode, cfg: RunConfig) -> List[LocalizationPanel]:
    panels = []
    _, features = model.forward_features(np.stack([s.image for s in samples]))
    records = localize(model, samples, spec, mode, cfg.region_size, cfg.threshold_ratio, cfg.global_argmin)
    for rec in records:
        item = samples[rec.sample_index]
        imap = intensity_map(features[rec.sample_index], model.head_weights, rec.label, mode,
                             cfg.region_size, cfg.global_argmin)
        box = rec.predicted_box
        panels.append(LocalizationPanel(
            image=item.image,
            heatmap=upsample(imap.grid, item.image.shape),
            gt_boxes=[(b.x_min, b.y_min, b.x_max, b.y_max) for b in rec.gt_boxes],
            predicted_box=(box.x_min, box.y_min, box.x_max, box.y_max),
            label=rec.label,
            mode=mode.value,
            iou=rec.best_iou,
        ))
    return panels


def cmd_locate(args: argparse.Namespace, cfg: RunConfig) -> int:
    model, spec = _load_cam_model(_model_path(cfg))
    data_dir = _data_dir(cfg)
    splits, manifest = _double_digit_splits(data_dir)
    samples = _pick_split(splits, args.split)
    out = _out_dir(cfg)
    modes = args.mode or list(MapMode)
    metrics_by_mode: Dict[str, Dict[str, Any]] = {}
    for mode in modes:
        metrics = evaluate_localization(model, samples, mode, cfg.region_size, cfg.threshold_ratio, spec,
                                        cfg.iou_threshold, cfg.global_argmin)
        payload = {"mode": mode.value, "R": cfg.region_size, "threshold_ratio": cfg.threshold_ratio,
                   "iou_threshold": cfg.iou_threshold, "global_argmin": cfg.global_argmin,
                   "split": args.split, **metrics.to_dict()}
        write_report(out / f"locate_{mode.value}.json", payload, int(manifest["seed"]), config.BUILD_ID)
        metrics_by_mode[mode.value] = {**metrics.to_dict(), "region_size": cfg.region_size}

    if args.report_pdf:
        head = samples[:args.report_samples]
        panels = [p for mode in modes for p in _report_panels(model, spec, head, mode, cfg)]
        generator = ReportGenerator(title="Localización CAM / infoCAM / infoCAM+", dataset=str(data_dir),
                                    build_id=config.BUILD_ID, seed=int(manifest["seed"]))
        if generator.generate_report(metrics_by_mode, panels, args.report_pdf) is None:
            LOG.warning("No se generó el reporte PDF %s", args.report_pdf)
    return EXIT_OK


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--config", help="archivo JSON con valores de RunConfig (los flags tienen prioridad)")
    p.add_argument("--out", dest="output_dir", help="directorio de salida")
    if seed:
        p.add_argument("--seed", type=seed_int, help="semilla de 64 bits (obligatoria si el comando muestrea)")


def _add_training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", choices=sorted(LOSS_CHOICES), help="variante de salida/pérdida")
    p.add_argument("--hidden", type=int_list, help="tamaños ocultos del MLP, p. ej. 64,64,64")
    p.add_argument("--epochs", type=positive_int)
    p.add_argument("--batch-size", dest="batch_size", type=positive_int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--selection", choices=["val_loss", "val_accuracy", "last"])
    p.add_argument("--head-bias", dest="head_bias", action="store_true", default=None,
                   help="ConvGapModel con bias en la cabeza (sólo clasificación, no apto para CAM)")


def _add_localization(p: argparse.ArgumentParser) -> None:
    p.add_argument("--region", dest="region_size", type=positive_int, help="lado R de la ventana")
    p.add_argument("--global-argmin", dest="global_argmin", action="store_true", default=None,
                   help="infoCAM+: y' elegido una vez sobre la rejilla completa")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miest", description="Clasificadores como estimadores de MI")
    parser.add_argument("--log-level", default=None, help="nivel de logging (por defecto MIEST_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="genera la mezcla gaussiana y el oráculo MC")
    _add_common(p)
    p.add_argument("--dim", type=positive_int, required=True, help="dimensión D >= 1")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--balanced", action="store_true", help=f"{BALANCED_COUNT} muestras por clase")
    group.add_argument("--counts", type=int_list, help="muestras por clase, p. ej. 6000,12000,...")
    p.add_argument("--means", type=float_list, help="medias escalares (por defecto 0,2,-2,4,-4)")
    p.add_argument("--oracle-samples", dest="oracle_samples", type=positive_int)
    p.set_defaults(handler=cmd_gen_synth)

    p = sub.add_parser("train", help="entrena un modelo")
    _add_common(p)
    p.add_argument("--data", dest="data_dir", help="directorio de gen-synth o make-mmnist")
    _add_training(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("estimate-mi", help="MI leída de los logits frente al oráculo")
    _add_common(p, seed=False)
    p.add_argument("--model", dest="model_path", help="archivo model.json")
    p.add_argument("--data", dest="data_dir", help="directorio del dataset")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--report", dest="out_report", help="ruta del reporte JSON")
    p.set_defaults(handler=cmd_estimate_mi)

    p = sub.add_parser("evaluate", help="reporte de clasificación")
    _add_common(p, seed=False)
    p.add_argument("--model", dest="model_path", help="archivo model.json")
    p.add_argument("--data", dest="data_dir", help="directorio del dataset")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--report", dest="out_report", help="ruta del reporte JSON")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("make-mmnist", help="dataset de doble dígito")
    _add_common(p)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--synthetic-digits", dest="synthetic_digits", action="store_true")
    p.add_argument("--per-class", dest="per_class", type=positive_int, default=config.SYNTH_DIGITS_PER_CLASS)
    p.add_argument("--idx-images", dest="idx_images")
    p.add_argument("--idx-labels", dest="idx_labels")
    p.set_defaults(handler=cmd_make_mmnist)

    p = sub.add_parser("cam", help="heatmaps PGM de una muestra")
    _add_common(p, seed=False)
    p.add_argument("--model", dest="model_path", help="archivo model.json")
    p.add_argument("--data", dest="data_dir", help="directorio del dataset")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--label", type=int, help="etiqueta a explicar (por defecto la primera presente)")
    p.add_argument("--mode", type=map_mode, action="append", help="cam, infocam o infocam-plus (repetible)")
    p.add_argument("--upsample", action="store_true", help="interpola el heatmap al tamaño de la imagen")
    _add_localization(p)
    p.set_defaults(handler=cmd_cam)

    p = sub.add_parser("locate", help="GT-Loc / Top-1-Loc por modo")
    _add_common(p, seed=False)
    p.add_argument("--model", dest="model_path", help="archivo model.json")
    p.add_argument("--data", dest="data_dir", help="directorio del dataset")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--mode", type=map_mode, action="append", help="cam, infocam o infocam-plus (repetible)")
    p.add_argument("--threshold", dest="threshold_ratio", type=unit_interval)
    p.add_argument("--iou", dest="iou_threshold", type=unit_interval)
    p.add_argument("--report-pdf", dest="report_pdf", help="ruta del reporte PDF opcional")
    p.add_argument("--report-samples", dest="report_samples", type=positive_int, default=8)
    _add_localization(p)
    p.set_defaults(handler=cmd_locate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(args.log_level or config.LOG_LEVEL).upper(),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        cfg = resolve_run_config(args)
        return args.handler(args, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (MiestError, OSError) as exc:
        LOG.error("%s: %s", args.command, exc)
        return EXIT_FAILURE
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
