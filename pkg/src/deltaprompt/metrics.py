"""Run metrics, their CSV/JSON serialization, and the harmonic mean.

The per-epoch CSV and the checkpoint are the byte-deterministic artifacts:
identical config and seed must reproduce them exactly, so the CSV carries no
timing data and floats are written with shortest round-trip repr.  Wall clock
and other run-local values live in the JSON summary instead.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field

from .augment import Augmentation
from .config import ExperimentConfig
from .errors import DataError

__all__ = [
    "EpochRecord",
    "RunMetrics",
    "harmonic_mean",
    "write_metrics_csv",
    "write_summary_json",
    "CSV_VERSION",
]

CSV_VERSION = 1
_AUGS = list(Augmentation)


def harmonic_mean(a: float, b: float) -> float:
    """2ab / (a + b); defined as 0 when both inputs are 0 (with a warning).

    Accepts accuracies as fractions or percentages, hence the [0, 100] bound.
    """
    if not (0 <= a <= 100 and 0 <= b <= 100):
        raise DataError(f"harmonic_mean needs inputs in [0, 100], got {a}, {b}")
    if a == 0 and b == 0:
        warnings.warn("harmonic_mean of two zeros; returning 0", stacklevel=2)
        return 0.0
    return 2.0 * a * b / (a + b)


@dataclass
class EpochRecord:
    """State after one epoch.  Epoch 0 is the pre-training profile, so its
    loss fields are None; ``sampler_weights`` are the weights that were in
    force during the epoch."""

    epoch: int
    total_loss: float | None
    ce_loss: float | None
    adtriplet_loss: float | None
    silhouette: float
    per_augmentation: dict[Augmentation, float]
    sampler_weights: dict[Augmentation, float]


@dataclass
class RunMetrics:
    seed: int
    records: list[EpochRecord] = field(default_factory=list)
    base_accuracy: float = 0.0
    new_accuracy: float = 0.0
    harmonic: float = 0.0
    wall_clock_seconds: float = 0.0
    clamp_warnings: int = 0
    new_class_train_accesses: int = 0
    parameter_count: int = 0

    def final_silhouette(self) -> float:
        if not self.records:
            raise DataError("no epoch records")
        return self.records[-1].silhouette

    def initial_silhouette(self) -> float:
        if not self.records:
            raise DataError("no epoch records")
        return self.records[0].silhouette


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def csv_header() -> list[str]:
    return (
        ["version", "epoch", "total_loss", "ce_loss", "adtriplet_loss", "silhouette"]
        + [f"sil_{a.value}" for a in _AUGS]
        + [f"weight_{a.value}" for a in _AUGS]
        + ["base_acc", "new_acc", "harmonic_mean"]
    )


def write_metrics_csv(path, metrics: RunMetrics) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header())
        for rec in metrics.records:
            writer.writerow(
                [str(CSV_VERSION), str(rec.epoch), _fmt(rec.total_loss),
                 _fmt(rec.ce_loss), _fmt(rec.adtriplet_loss), _fmt(rec.silhouette)]
                + [_fmt(rec.per_augmentation.get(a)) for a in _AUGS]
                + [_fmt(rec.sampler_weights.get(a)) for a in _AUGS]
                + ["", "", ""]
            )
        writer.writerow(
            [str(CSV_VERSION), "final", "", "", "", ""]
            + [""] * (2 * len(_AUGS))
            + [_fmt(metrics.base_accuracy), _fmt(metrics.new_accuracy),
               _fmt(metrics.harmonic)]
        )


def write_summary_json(path, metrics: RunMetrics, config: ExperimentConfig) -> None:
    payload = {
        "format_version": 1,
        "seed": metrics.seed,
        "base_accuracy": metrics.base_accuracy,
        "new_accuracy": metrics.new_accuracy,
        "harmonic_mean": metrics.harmonic,
        "initial_silhouette": metrics.initial_silhouette(),
        "final_silhouette": metrics.final_silhouette(),
        "wall_clock_seconds": metrics.wall_clock_seconds,
        "prob_clamp_warnings": metrics.clamp_warnings,
        "new_class_train_accesses": metrics.new_class_train_accesses,
        "parameter_count": metrics.parameter_count,
        "config": asdict(config),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
