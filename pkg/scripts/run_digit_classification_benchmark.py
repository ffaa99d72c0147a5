"""
Benchmark de clasificación de un dígito: softmax frente a PC-softmax.

Para cada semilla arma un conjunto de dígitos 28×28 balanceado y otro
desbalanceado (los dígitos pares reducidos a una décima parte), entrena un
ConvGapModel de sólo clasificación (cabeza con bias) con cada pérdida y
reporta exactitud, exactitud media por clase y la MI leída de los logits en el
split de test.

Uso:
    python scripts/run_digit_classification_benchmark.py --per-class 1000 --seeds 0,1,2,3,4
    python scripts/run_digit_classification_benchmark.py --idx-images train-images-idx3-ubyte \
        --idx-labels train-labels-idx1-ubyte --per-class 3000
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import config
from core.losses_mi import LossSpec, LossVariant, empirical_prior, estimate_mi, mi_prior_for, predict_labels
from core.models import ConvGapModel, default_digit_stages, predict_logits
from core.rng import RngStream
from core.synth import LabeledDataset, split_dataset
from core.training import TrainConfig, accuracy, per_class_accuracy, per_class_recall, train
from inputs.digits import DigitPool, make_single_digit, pool_from_digits, single_digit_counts, synthetic_pool
from inputs.idx_reader import N_DIGIT_CLASSES, read_idx
from outputs.report_writer import write_report

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
LOG = logging.getLogger(__name__)

VARIANTS = (LossVariant.SOFTMAX_CE, LossVariant.PC_SOFTMAX_CE)


class DigitClassificationBenchmark:
    """Harness del benchmark de un dígito."""

    def __init__(self, output_dir: str, epochs: int, per_class: int, batch_size: int = config.BATCH_SIZE,
                 lr: float = config.ADAM_LR, idx_images: Optional[str] = None,
                 idx_labels: Optional[str] = None) -> None:
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.train_config = TrainConfig(epochs=epochs, batch_size=batch_size, lr=lr,
                                        beta1=config.ADAM_BETA1, beta2=config.ADAM_BETA2, eps=config.ADAM_EPS)
        self.per_class = per_class
        self._idx_pool: Optional[DigitPool] = None
        if idx_images:
            self._idx_pool = pool_from_digits(read_idx(idx_images, idx_labels))

    def _pool(self, seed: int) -> DigitPool:
        if self._idx_pool is not None:
            return self._idx_pool
        return synthetic_pool(self.per_class, RngStream(seed, 5))

    def _fit(self, splits: Sequence[LabeledDataset], variant: LossVariant, seed: int) -> Dict[str, Any]:
        train_ds, val_ds, test_ds = splits
        prior = empirical_prior(train_ds.y, N_DIGIT_CLASSES) if variant is LossVariant.PC_SOFTMAX_CE else None
        spec = LossSpec(variant, prior=prior)
        model = ConvGapModel(train_ds.X.shape[1:], default_digit_stages(), N_DIGIT_CLASSES,
                             rng=RngStream(seed, 3), head_bias=True)
        train(model, train_ds.X, train_ds.y, spec, self.train_config, RngStream(seed, 4), val_ds.X, val_ds.y)
        predicted = predict_labels(predict_logits(model, test_ds.X), spec)
        mi = estimate_mi(model, test_ds.X, test_ds.y, mi_prior_for(spec, N_DIGIT_CLASSES))
        return {
            "accuracy": accuracy(predicted, test_ds.y),
            "per_class_accuracy": per_class_accuracy(predicted, test_ds.y, N_DIGIT_CLASSES),
            "per_class_recall": per_class_recall(predicted, test_ds.y, N_DIGIT_CLASSES),
            "mi_estimate": mi.mi_estimate,
            "mi_std_error": mi.std_error,
        }

    def run(self, seeds: Sequence[int], balanced: bool) -> List[Dict[str, Any]]:
        counts = single_digit_counts(self.per_class, balanced)
        rows = []
        for seed in seeds:
            ds = make_single_digit(self._pool(seed), counts, RngStream(seed, 0))
            splits = split_dataset(ds, RngStream(seed, 1))
            row: Dict[str, Any] = {"seed": seed, "balanced": balanced, "counts": counts}
            for variant in VARIANTS:
                for key, value in self._fit(splits, variant, seed).items():
                    row[f"{variant.value}_{key}"] = value
            LOG.info("%s seed=%d: exactitud por clase softmax %.4f, pc-softmax %.4f",
                     "balanceado" if balanced else "desbalanceado", seed,
                     row["softmax_ce_per_class_accuracy"], row["pc_softmax_ce_per_class_accuracy"])
            rows.append(row)
        summary = {f"mean_{v.value}_per_class_accuracy": float(np.mean([r[f"{v.value}_per_class_accuracy"]
                                                                          for r in rows]))
                   for v in VARIANTS}
        name = "balanced" if balanced else "unbalanced"
        write_report(self.output_dir / f"digits_{name}.json", {"rows": rows, **summary}, seeds[0], config.BUILD_ID)
        return rows


def main() -> None:
    parser = argparse.ArgumentParser(description="Softmax vs PC-softmax sobre dígitos de una etiqueta")
    parser.add_argument("--seeds", default="0,1,2,3,4", help="semillas separadas por comas")
    parser.add_argument("--epochs", type=int, default=config.EPOCHS_DIGITS)
    parser.add_argument("--per-class", type=int, default=1000, help="imágenes por clase en la versión balanceada")
    parser.add_argument("--idx-images")
    parser.add_argument("--idx-labels")
    parser.add_argument("--output", default="digit_outputs", help="directorio de resultados")
    args = parser.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    bench = DigitClassificationBenchmark(args.output, args.epochs, args.per_class,
                                         idx_images=args.idx_images, idx_labels=args.idx_labels)
    bench.run(seeds, balanced=True)
    bench.run(seeds, balanced=False)


if __name__ == "__main__":
    main()
