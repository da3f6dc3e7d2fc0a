"""Training loop, evaluation, and run artifact writing.

One episode per base-class training image per epoch, single-episode batches.
Per episode: build the four-view delta grid, the adversarial triplet on it,
and cross entropy on the first augmented view (whose meta token conditions
the prompt), then one SGD step.  After each epoch the delta tokens of the
validation partition are profiled; with weighted sampling enabled the
resulting silhouette scores set the next epoch's augmentation distribution.
Held-out ("new") classes are never read by the loop, which the dataset's
access counter proves after the fact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .augment import Augmentation, apply_augmentation
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .dataset import ToyDataset, generate_dataset
from .encoders import FrozenEncoders
from .episodes import Episode, sample_episode
from .errors import DataError, NumericError
from .losses import (
    LossWeights,
    adtriplet_loss,
    clamp_warning_count,
    cross_entropy,
    reset_clamp_warnings,
    total_loss,
)
from .metrics import EpochRecord, RunMetrics, harmonic_mean, write_metrics_csv, write_summary_json
from .optim import SGD
from .profiling import SamplerWeights, profile_deltas, wrs_weights
from .prompts import PromptModel
from .seeding import generator

__all__ = ["TrainResult", "build_world", "train", "evaluate", "episode_losses",
           "save_run_artifacts"]


@dataclass
class TrainResult:
    config: ExperimentConfig
    dataset: ToyDataset
    encoders: FrozenEncoders
    model: PromptModel
    metrics: RunMetrics


def build_world(config: ExperimentConfig) -> tuple[ToyDataset, FrozenEncoders, PromptModel]:
    """Dataset, frozen encoders, and a fresh prompt model for one config."""
    config.validate()
    ds = generate_dataset(config.n_classes, config.per_class, config.image_size,
                          config.shots, config.seed)
    encoders = FrozenEncoders.build(
        config.n_classes, config.image_size, config.feature_dim,
        config.context_length, config.tau, config.seed,
    )
    model = PromptModel.build(encoders, config.seed,
                              bottleneck_ratio=config.resolved_bottleneck_ratio())
    return ds, encoders, model


def _delta_pair(model: PromptModel, episode: Episode, reference, image, aug, seed):
    augmented = apply_augmentation(image, aug, seed)
    pi_aug = model.meta_token(augmented)
    return augmented, pi_aug, ad.sub(pi_aug, reference)


def episode_losses(
    model: PromptModel,
    episode: Episode,
    candidates: list[int],
    weights: LossWeights,
    margin: float,
    constraint_mode: str,
    class_mean_refs: dict[int, list] | None = None,
) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor]:
    """(total, adtriplet, ce) for one episode.

    ``class_mean_refs`` maps class id to its train images when the delta
    reference is the class mean; None selects the canonical same-image
    reference.  Episode order defines the grid slots: x1's class is class 1
    and the first drawn augmentation is A.
    """
    if class_mean_refs is None:
        ref1 = model.meta_token(episode.x1)
        ref2 = model.meta_token(episode.x2)
    else:
        ref1 = model.mean_meta_token(class_mean_refs[episode.class_1])
        ref2 = model.mean_meta_token(class_mean_refs[episode.class_2])

    view_a1, pi_a1, d1a = _delta_pair(model, episode, ref1, episode.x1,
                                      episode.aug_a, episode.seed_a1)
    _, _, d1b = _delta_pair(model, episode, ref1, episode.x1,
                            episode.aug_b, episode.seed_b1)
    _, _, d2a = _delta_pair(model, episode, ref2, episode.x2,
                            episode.aug_a, episode.seed_a2)
    _, _, d2b = _delta_pair(model, episode, ref2, episode.x2,
                            episode.aug_b, episode.seed_b2)

    adt = adtriplet_loss(d1a, d1b, d2a, d2b, margin, constraint_mode)
    probs = model.predict_probs(view_a1, candidates, meta=pi_a1)
    ce = cross_entropy(probs, candidates.index(episode.class_1))
    return total_loss(adt, ce, weights), adt, ce


def evaluate(model: PromptModel, ds: ToyDataset, split: str) -> float:
    """Test accuracy with candidates restricted to the split's classes.

    The prompt is conditioned on the un-augmented image's own meta token.
    """
    classes = ds.split_classes(split)
    correct = 0
    total = 0
    with ad.no_grad():
        for cid in classes:
            for image in ds.test[cid]:
                probs = model.predict_probs(image, classes)
                if classes[int(np.argmax(probs.data))] == cid:
                    correct += 1
                total += 1
    return correct / total


def train(config: ExperimentConfig, out_dir: str | Path | None = None) -> TrainResult:
    """Run the full protocol; write artifacts when ``out_dir`` is given."""
    started = time.perf_counter()
    config.validate()
    reset_clamp_warnings()
    ds, encoders, model = build_world(config)
    base = ds.base_classes
    episodes_per_epoch = len(base) * config.shots
    optimizer = SGD(
        model.params(),
        lr=config.learning_rate,
        momentum=config.momentum,
        schedule=config.schedule,
        total_steps=config.epochs * episodes_per_epoch,
    )
    loss_weights = LossWeights(alpha=config.alpha, beta=config.beta)
    episode_rng = generator(config.seed, "episodes")
    class_mean_refs = (
        {c: list(ds.train[c]) for c in base}
        if config.delta_reference == "class_mean" else None
    )
    # Note: with the class-mean reference the refs read train images directly,
    # not via the counted accessor; only base classes ever appear in the map.

    metrics = RunMetrics(seed=config.seed, parameter_count=model.parameter_count())
    sampler = SamplerWeights.uniform(epoch=1)  # first epoch always uniform

    report, _ = profile_deltas(model, ds, base, config.profile_samples, 0, config.seed)
    metrics.records.append(EpochRecord(
        epoch=0, total_loss=None, ce_loss=None, adtriplet_loss=None,
        silhouette=report.overall, per_augmentation=dict(report.per_label),
        sampler_weights={a: sampler.prob_of(a) for a in Augmentation},
    ))

    step = 0
    for epoch in range(1, config.epochs + 1):
        order = [(cid, idx) for cid in base for idx in range(config.shots)]
        order = [order[i] for i in episode_rng.permutation(len(order))]
        sums = {"total": 0.0, "adt": 0.0, "ce": 0.0}
        for cid, idx in order:
            episode = sample_episode(ds, sampler, episode_rng, classes=base,
                                     fixed_first=(cid, idx))
            try:
                total, adt, ce = episode_losses(
                    model, episode, base, loss_weights, config.margin,
                    config.constraint_mode, class_mean_refs,
                )
                ad.backward(total)
                optimizer.step()
            except NumericError as exc:
                raise NumericError(f"episode {step} (epoch {epoch}): {exc}") from exc
            sums["total"] += total.item()
            sums["adt"] += adt.item()
            sums["ce"] += ce.item()
            step += 1

        report, _ = profile_deltas(model, ds, base, config.profile_samples, epoch, config.seed)
        n = len(order)
        metrics.records.append(EpochRecord(
            epoch=epoch,
            total_loss=sums["total"] / n,
            ce_loss=sums["ce"] / n,
            adtriplet_loss=sums["adt"] / n,
            silhouette=report.overall,
            per_augmentation=dict(report.per_label),
            sampler_weights={a: sampler.prob_of(a) for a in Augmentation},
        ))
        if config.weighted_sampling and epoch < config.epochs:
            sampler = wrs_weights(report, config.profile_temperature, epoch=epoch + 1)

    metrics.base_accuracy = evaluate(model, ds, "base")
    metrics.new_accuracy = evaluate(model, ds, "new")
    metrics.harmonic = harmonic_mean(metrics.base_accuracy, metrics.new_accuracy)
    metrics.clamp_warnings = clamp_warning_count()
    metrics.new_class_train_accesses = ds.new_class_train_accesses()
    metrics.wall_clock_seconds = time.perf_counter() - started

    result = TrainResult(config=config, dataset=ds, encoders=encoders,
                         model=model, metrics=metrics)
    if out_dir is not None:
        save_run_artifacts(result, out_dir)
    return result


def save_run_artifacts(result: TrainResult, out_dir: str | Path) -> dict[str, Path]:
    """Write checkpoint, metrics CSV, and summary JSON; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "checkpoint": out / "model.ckpt",
        "metrics_csv": out / "metrics.csv",
        "summary_json": out / "summary.json",
    }
    save_checkpoint(paths["checkpoint"],
                    {k: v.data for k, v in result.model.params().items()})
    write_metrics_csv(paths["metrics_csv"], result.metrics)
    write_summary_json(paths["summary_json"], result.metrics, result.config)
    return paths


def load_model(config: ExperimentConfig, checkpoint_blocks: dict[str, np.ndarray]
               ) -> tuple[ToyDataset, FrozenEncoders, PromptModel]:
    """Rebuild the world from config and overwrite trainables from a checkpoint."""
    ds, encoders, model = build_world(config)
    params = model.params()
    missing = set(params) - set(checkpoint_blocks)
    extra = set(checkpoint_blocks) - set(params)
    if missing or extra:
        raise DataError(
            f"checkpoint blocks do not match model: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}"
        )
    for name, tensor in params.items():
        blob = checkpoint_blocks[name]
        if blob.shape != tensor.data.shape:
            raise DataError(
                f"checkpoint block {name!r} has shape {blob.shape}, "
                f"model expects {tensor.data.shape}"
            )
        tensor.data = blob.astype(np.float64).copy()
    return ds, encoders, model
