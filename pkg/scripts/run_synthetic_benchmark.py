"""
Benchmark de MI sobre las mezclas gaussianas sintéticas.

Para cada dimensión D y cada semilla: genera la mezcla (balanceada o no
balanceada), entrena un MLP con softmax y otro con PC-softmax, lee la MI de
los logits en el split de test y la compara con el oráculo Monte Carlo.
Opcionalmente mide la consistencia del estimador (N=3,000 frente a N=30,000).

Uso:
    python scripts/run_synthetic_benchmark.py --dims 1,2,5,10 --seeds 0,1,2,3,4 --output bench_outputs
    python scripts/run_synthetic_benchmark.py --dims 2 --consistency --output bench_outputs
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

# Cuando ejecutamos el script directamente, Python añade `scripts/` al
# sys.path; añadimos la raíz del proyecto para importar `core`, `outputs`...
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import config
from core.losses_mi import LossSpec, LossVariant, Prior, empirical_prior, estimate_mi, mi_prior_for, predict_labels
from core.models import MlpModel, predict_logits
from core.rng import RngStream
from core.synth import (
    BALANCED_COUNT,
    DEFAULT_SCALAR_MEANS,
    UNBALANCED_COUNTS,
    LabeledDataset,
    MixtureSpec,
    mc_mi,
    sample,
    split_dataset,
)
from core.training import TrainConfig, accuracy, per_class_accuracy, train
from outputs.report_writer import write_report

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
LOG = logging.getLogger(__name__)

CONSISTENCY_SIZES = (3000, 30000)


class SyntheticBenchmark:
    """Harness del benchmark sintético."""

    def __init__(self, output_dir: str, epochs: int, oracle_samples: int) -> None:
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.train_config = TrainConfig(epochs=epochs, batch_size=config.BATCH_SIZE, lr=config.ADAM_LR,
                                        beta1=config.ADAM_BETA1, beta2=config.ADAM_BETA2, eps=config.ADAM_EPS)
        self.oracle_samples = oracle_samples

    def _fit(self, splits: Sequence[LabeledDataset], n_classes: int, variant: LossVariant,
             seed: int) -> Dict[str, float]:
        train_ds, val_ds, test_ds = splits
        prior = empirical_prior(train_ds.y, n_classes) if variant is LossVariant.PC_SOFTMAX_CE else None
        spec = LossSpec(variant, prior=prior)
        model = MlpModel.build(train_ds.X.shape[1], n_classes, config.MLP_HIDDEN, rng=RngStream(seed, 3))
        train(model, train_ds.X, train_ds.y, spec, self.train_config, RngStream(seed, 4), val_ds.X, val_ds.y)
        predicted = predict_labels(predict_logits(model, test_ds.X), spec)
        mi = estimate_mi(model, test_ds.X, test_ds.y, mi_prior_for(spec, n_classes))
        return {
            "mi_estimate": mi.mi_estimate,
            "mi_std_error": mi.std_error,
            "accuracy": accuracy(predicted, test_ds.y),
            "per_class_accuracy": per_class_accuracy(predicted, test_ds.y, n_classes),
        }

    def run_table(self, dims: Sequence[int], seeds: Sequence[int], balanced: bool) -> List[Dict[str, Any]]:
        counts = [BALANCED_COUNT] * len(DEFAULT_SCALAR_MEANS) if balanced else list(UNBALANCED_COUNTS)
        prior = Prior.from_counts(np.asarray(counts))
        rows = []
        for dim in dims:
            spec = MixtureSpec.from_scalar_means(dim, DEFAULT_SCALAR_MEANS, prior)
            oracle = mc_mi(spec, self.oracle_samples, RngStream(seeds[0], 2))
            for seed in seeds:
                splits = split_dataset(sample(spec, counts, RngStream(seed, 0)), RngStream(seed, 1))
                row: Dict[str, Any] = {"dim": dim, "seed": seed, "balanced": balanced,
                                       "mc_oracle": oracle.estimate, "std_error": oracle.std_error}
                for variant in (LossVariant.SOFTMAX_CE, LossVariant.PC_SOFTMAX_CE):
                    for key, value in self._fit(splits, spec.n_classes, variant, seed).items():
                        row[f"{variant.value}_{key}"] = value
                LOG.info("D=%d seed=%d: softmax %.4f, pc-softmax %.4f, MC %.4f", dim, seed,
                         row["softmax_ce_mi_estimate"], row["pc_softmax_ce_mi_estimate"], oracle.estimate)
                rows.append(row)
        name = "balanced" if balanced else "unbalanced"
        write_report(self.output_dir / f"synthetic_{name}.json", {"rows": rows}, seeds[0], config.BUILD_ID)
        return rows

    def run_consistency(self, dim: int, seeds: Sequence[int]) -> Dict[str, Any]:
        """|estimación − oráculo| mediana por tamaño de entrenamiento."""
        spec = MixtureSpec.from_scalar_means(dim)
        oracle = mc_mi(spec, self.oracle_samples, RngStream(seeds[0], 2))
        m = spec.n_classes
        result: Dict[str, Any] = {"dim": dim, "mc_oracle": oracle.estimate}
        for n_train in CONSISTENCY_SIZES:
            errors = []
            for seed in seeds:
                # n_train filas de entrenamiento tras el split 70/15/15
                per_class = int(np.ceil(n_train / 0.7 / m))
                splits = split_dataset(sample(spec, [per_class] * m, RngStream(seed, 0)), RngStream(seed, 1))
                estimate = self._fit(splits, m, LossVariant.SOFTMAX_CE, seed)["mi_estimate"]
                errors.append(abs(estimate - oracle.estimate))
            result[f"median_abs_error_{n_train}"] = float(np.median(errors))
            LOG.info("Consistencia D=%d N=%d: mediana |error| %.4f", dim, n_train, np.median(errors))
        write_report(self.output_dir / f"consistency_d{dim}.json", result, seeds[0], config.BUILD_ID)
        return result


def main() -> None:
    parser = argparse.ArgumentParser(description="Benchmark de MI sobre mezclas gaussianas")
    parser.add_argument("--dims", default="1,2,5,10", help="dimensiones separadas por comas")
    parser.add_argument("--seeds", default="0,1,2,3,4", help="semillas separadas por comas")
    parser.add_argument("--epochs", type=int, default=config.EPOCHS_SYNTH)
    parser.add_argument("--oracle-samples", type=int, default=config.ORACLE_SAMPLES)
    parser.add_argument("--consistency", action="store_true", help="sólo el experimento de consistencia")
    parser.add_argument("--output", default="bench_outputs", help="directorio de resultados")
    args = parser.parse_args()

    dims = [int(d) for d in args.dims.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    bench = SyntheticBenchmark(args.output, args.epochs, args.oracle_samples)
    if args.consistency:
        for dim in dims:
            bench.run_consistency(dim, seeds)
        return
    bench.run_table(dims, seeds, balanced=True)
    bench.run_table(dims, seeds, balanced=False)


if __name__ == "__main__":
    main()
