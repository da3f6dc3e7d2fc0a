"""Cluster-quality profiling of delta meta tokens and the sampler it drives.

After each epoch the trainer embeds validation images under every
augmentation type, measures how well the resulting delta tokens cluster by
augmentation (silhouette score, Euclidean metric), and optionally converts
those scores into sampling weights for the next epoch: low-silhouette
(poorly separated) augmentation types get sampled more often.  A small PCA
utility supports 2-D inspection of the same embeddings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .augment import STOCHASTIC, Augmentation, apply_augmentation
from .dataset import ToyDataset
from .errors import ConfigError, DataError, NumericError, SamplingError
from .prompts import PromptModel
from .seeding import stream_seed

__all__ = [
    "SilhouetteReport",
    "silhouette_samples",
    "silhouette_scores",
    "SamplerWeights",
    "wrs_weights",
    "wrs_sample",
    "PCAResult",
    "pca_project",
    "ProfilePoints",
    "collect_delta_points",
    "profile_deltas",
    "write_embedding_dump",
]

AUG_ORDER = list(Augmentation)


# ---------------------------------------------------------------------------
# silhouette


@dataclass
class SilhouetteReport:
    """Per-cluster mean silhouette plus the pooled mean over all points.

    ``singleton_labels`` lists clusters with one point; the convention gives
    those points score 0 and they still count toward the overall mean.
    """

    per_label: dict[Hashable, float]
    counts: dict[Hashable, int]
    overall: float
    singleton_labels: tuple = ()


def _distance_matrix(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        diff = points - points[i]
        out[i] = np.sqrt((diff * diff).sum(axis=1))
    return out


def silhouette_samples(points: np.ndarray, labels: Sequence[Hashable]) -> np.ndarray:
    """Per-point silhouette (b - a) / max(a, b), 0/0 treated as 0."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] != len(labels):
        raise DataError(
            f"points {points.shape} and {len(labels)} labels do not line up"
        )
    if not np.isfinite(points).all():
        raise NumericError("silhouette: non-finite points")
    label_list = list(labels)
    unique = list(dict.fromkeys(label_list))
    if len(unique) < 2:
        raise DataError("silhouette needs at least two clusters")
    masks = {lab: np.array([l == lab for l in label_list]) for lab in unique}
    dist = _distance_matrix(points)
    scores = np.zeros(points.shape[0])
    for i in range(points.shape[0]):
        own = masks[label_list[i]].copy()
        own[i] = False
        others = [dist[i, masks[lab]].mean() for lab in unique if lab != label_list[i]]
        b = min(others)
        if not own.any():
            scores[i] = 0.0  # singleton cluster
            continue
        a = dist[i, own].mean()
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return scores


def silhouette_scores(points: np.ndarray, labels: Sequence[Hashable]) -> SilhouetteReport:
    scores = silhouette_samples(points, labels)
    label_list = list(labels)
    unique = list(dict.fromkeys(label_list))
    per_label: dict[Hashable, float] = {}
    counts: dict[Hashable, int] = {}
    singletons = []
    for lab in unique:
        mask = np.array([l == lab for l in label_list])
        counts[lab] = int(mask.sum())
        per_label[lab] = float(scores[mask].mean())
        if counts[lab] == 1:
            singletons.append(lab)
    return SilhouetteReport(
        per_label=per_label,
        counts=counts,
        overall=float(scores.mean()),
        singleton_labels=tuple(singletons),
    )


# ---------------------------------------------------------------------------
# weighted random sampling of augmentation types


@dataclass
class SamplerWeights:
    """Sampling distribution over the augmentation vocabulary.

    ``probs`` is aligned with the Augmentation enum order.  ``imputed`` names
    types whose silhouette was missing from the report and was replaced by
    the overall mean before the softmax.
    """

    probs: np.ndarray
    temperature: float
    epoch: int = 0
    imputed: tuple[Augmentation, ...] = ()
    _cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (len(AUG_ORDER),):
            raise ConfigError(f"weights must cover all {len(AUG_ORDER)} types, got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any():
            raise NumericError("sampler weights must be finite and non-negative")
        total = p.sum()
        if total <= 0:
            raise NumericError("sampler weights sum to zero")
        self.probs = p / total
        self._cumulative = np.cumsum(self.probs)

    @classmethod
    def uniform(cls, epoch: int = 0) -> "SamplerWeights":
        n = len(AUG_ORDER)
        return cls(probs=np.full(n, 1.0 / n), temperature=1.0, epoch=epoch)

    def prob_of(self, augmentation: Augmentation) -> float:
        return float(self.probs[AUG_ORDER.index(augmentation)])


def wrs_weights(report: SilhouetteReport, temperature: float = 1.0,
                epoch: int = 0) -> SamplerWeights:
    """softmax(-score / temperature) over the augmentation vocabulary.

    Lower silhouette (worse separation) gives a larger weight, so confusable
    augmentation types are drawn more often next epoch.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    known = {k: v for k, v in report.per_label.items() if isinstance(k, Augmentation)}
    if not known:
        raise ConfigError("report contains no augmentation-keyed scores")
    fill = float(np.mean(list(known.values())))
    imputed = tuple(a for a in AUG_ORDER if a not in known)
    scores = np.array([known.get(a, fill) for a in AUG_ORDER])
    if not np.isfinite(scores).all():
        raise NumericError("non-finite silhouette scores")
    z = -scores / temperature
    z -= z.max()
    e = np.exp(z)
    return SamplerWeights(probs=e / e.sum(), temperature=temperature, epoch=epoch,
                          imputed=imputed)


def _draw(cumulative: np.ndarray, rng: np.random.Generator) -> int:
    return int(np.searchsorted(cumulative, rng.random(), side="right"))


def wrs_sample(weights: SamplerWeights,
               rng: np.random.Generator | int) -> tuple[Augmentation, Augmentation]:
    """Draw two distinct augmentation types.

    The first follows the weights; the second follows the weights renormalized
    with the first type excluded.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if int(np.count_nonzero(weights.probs)) < 2:
        raise SamplingError("cannot draw two distinct types: fewer than 2 have mass")
    first = _draw(weights._cumulative, rng)
    rest = weights.probs.copy()
    rest[first] = 0.0
    second = _draw(np.cumsum(rest / rest.sum()), rng)
    return AUG_ORDER[first], AUG_ORDER[second]


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PCAResult:
    """Projection onto the leading principal axes.

    ``rank_deficient`` is set when fewer positive-variance axes exist than
    were requested; ``projected`` then has that smaller width.
    """

    projected: np.ndarray
    explained_variance_ratio: np.ndarray
    components: np.ndarray
    mean: np.ndarray
    rank_deficient: bool


def pca_project(points: np.ndarray, out_dim: int = 2) -> PCAResult:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise DataError(f"pca needs an (n, d) array with n >= 2, got {points.shape}")
    if out_dim < 1:
        raise ConfigError(f"out_dim must be >= 1, got {out_dim}")
    if not np.isfinite(points).all():
        raise NumericError("pca: non-finite points")
    mean = points.mean(axis=0)
    centered = points - mean
    cov = centered.T @ centered / (points.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if total == 0.0:
        # all points identical: no variance to explain
        keep = 0
    else:
        tol = eigvals[0] * 1e-12
        keep = int((eigvals > tol).sum())
    width = min(out_dim, keep)
    comps = eigvecs[:, :width]
    # deterministic sign: largest-magnitude entry of each axis is positive
    for j in range(width):
        k = int(np.argmax(np.abs(comps[:, j])))
        if comps[k, j] < 0:
            comps[:, j] = -comps[:, j]
    ratios = eigvals[:width] / total if total > 0 else np.zeros(0)
    return PCAResult(
        projected=centered @ comps,
        explained_variance_ratio=ratios,
        components=comps,
        mean=mean,
        rank_deficient=width < out_dim,
    )


# ---------------------------------------------------------------------------
# delta-token profiling over the validation partition


@dataclass
class ProfilePoints:
    """Delta tokens for every (validation image, augmentation type) pair."""

    points: np.ndarray
    augmentations: list[Augmentation]
    class_ids: list[int]
    n_images: int
    capped: bool


def collect_delta_points(
    model: PromptModel,
    ds: ToyDataset,
    classes: Sequence[int],
    n_samples: int,
    epoch: int,
    master_seed: int,
) -> ProfilePoints:
    """Embed up to ``n_samples`` validation images under all augmentations.

    Images are taken round-robin across ``classes`` for even coverage; the
    request is capped at the number of distinct validation images available.
    Stochastic augmentations get one fixed seed per (epoch, image, type).
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    classes = list(classes)
    if not classes:
        raise ConfigError("no classes to profile")
    available = sum(len(ds.val[c]) for c in classes)
    capped = n_samples > available
    n = min(n_samples, available)
    chosen = []
    i = 0
    while len(chosen) < n:
        cid = classes[i % len(classes)]
        idx = i // len(classes)
        if idx < len(ds.val[cid]):
            chosen.append(ds.val[cid][idx])
        i += 1
    points = np.empty((n * len(AUG_ORDER), model.encoders.feature_dim))
    augmentations: list[Augmentation] = []
    class_ids: list[int] = []
    k = 0
    for s_idx, image in enumerate(chosen):
        reference = model.meta_token_np(image)
        for a_idx, aug in enumerate(AUG_ORDER):
            seed = (
                stream_seed(master_seed, "profiling", epoch, s_idx, a_idx)
                if aug in STOCHASTIC
                else 0
            )
            augmented = apply_augmentation(image, aug, seed)
            points[k] = model.meta_token_np(augmented) - reference
            augmentations.append(aug)
            class_ids.append(image.class_id)
            k += 1
    return ProfilePoints(
        points=points,
        augmentations=augmentations,
        class_ids=class_ids,
        n_images=n,
        capped=capped,
    )


def profile_deltas(
    model: PromptModel,
    ds: ToyDataset,
    classes: Sequence[int],
    n_samples: int,
    epoch: int,
    master_seed: int,
) -> tuple[SilhouetteReport, ProfilePoints]:
    pts = collect_delta_points(model, ds, classes, n_samples, epoch, master_seed)
    return silhouette_scores(pts.points, pts.augmentations), pts


def write_embedding_dump(path, profile: ProfilePoints, epoch: int) -> None:
    """CSV dump: class_id, augmentation, epoch, then the delta coordinates."""
    d = profile.points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "augmentation", "epoch"] + [f"e{i}" for i in range(d)])
        for cid, aug, vec in zip(profile.class_ids, profile.augmentations, profile.points):
            writer.writerow([cid, aug.value, epoch] + [repr(float(x)) for x in vec])
