"""Training objectives: cross entropy, margin triplet, and the adversarial
triplet over a 2-class x 2-augmentation delta-token grid.

The adversarial orientation is fixed: a triplet's positive shares the
anchor's AUGMENTATION (different class), the negative shares the anchor's
CLASS (different augmentation).  Pulling same-augmentation deltas together
while pushing same-class deltas apart is what strips class identity out of
the metanet's augmentation response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import autodiff as ad
from .errors import ConfigError
from .prompts import DeltaMetaToken

__all__ = [
    "LossWeights",
    "CONSTRAINT_MODES",
    "PROB_FLOOR",
    "cross_entropy",
    "triplet_loss",
    "adtriplet_loss",
    "grid_from_tokens",
    "total_loss",
    "clamp_warning_count",
    "reset_clamp_warnings",
]

CONSTRAINT_MODES = ("constraints4", "constraints2")
PROB_FLOOR = 1e-12

_clamp_warnings = 0


def clamp_warning_count() -> int:
    return _clamp_warnings


def reset_clamp_warnings() -> None:
    global _clamp_warnings
    _clamp_warnings = 0


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights: total = alpha * adversarial-triplet + beta * CE."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"loss weights must be non-negative, got {self}")
        if self.alpha == 0 and self.beta == 0:
            raise ConfigError("loss weights cannot both be zero")


def cross_entropy(probs: ad.Tensor, label_index: int) -> ad.Tensor:
    """-log p[label].  Probabilities below PROB_FLOOR are clamped and counted."""
    if probs.data.ndim != 1:
        raise ConfigError(f"cross_entropy expects a probability vector, got {probs.shape}")
    if not 0 <= label_index < probs.shape[0]:
        raise ConfigError(
            f"label index {label_index} out of range for {probs.shape[0]} candidates"
        )
    global _clamp_warnings
    if float(probs.data[label_index]) < PROB_FLOOR:
        _clamp_warnings += 1
    picked = ad.element(probs, label_index)
    return ad.scalar_mul(ad.log(picked, floor=PROB_FLOOR), -1.0)


def triplet_loss(anchor: ad.Tensor, positive: ad.Tensor, negative: ad.Tensor,
                 margin: float) -> ad.Tensor:
    """max(0, ||a - p|| - ||a - n|| + margin)."""
    if margin <= 0:
        raise ConfigError(f"triplet margin must be positive, got {margin}")
    d_pos = ad.euclidean_distance(anchor, positive)
    d_neg = ad.euclidean_distance(anchor, negative)
    return ad.relu(ad.add(ad.sub(d_pos, d_neg), ad.constant(margin)))


def adtriplet_loss(
    delta_1a: ad.Tensor,
    delta_1b: ad.Tensor,
    delta_2a: ad.Tensor,
    delta_2b: ad.Tensor,
    margin: float,
    mode: str = "constraints4",
) -> ad.Tensor:
    """Adversarial triplet over the delta grid (class 1/2 x augmentation A/B).

    constraints4 sums two mirrored triplets; constraints2 keeps the single
    triplet anchored at class 1 / augmentation B.  With every delta equal both
    hinges sit at the margin, so the values are 2 * margin and margin.
    """
    if mode not in CONSTRAINT_MODES:
        raise ConfigError(f"unknown constraint mode {mode!r}; expected {CONSTRAINT_MODES}")
    if mode == "constraints4":
        first = triplet_loss(delta_1a, delta_2a, delta_1b, margin)
        second = triplet_loss(delta_2b, delta_1b, delta_2a, margin)
        return ad.add(first, second)
    return triplet_loss(delta_1b, delta_2b, delta_1a, margin)


def grid_from_tokens(
    tokens: Sequence[DeltaMetaToken],
) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor, ad.Tensor]:
    """Orient four delta tokens into (1A, 1B, 2A, 2B) slots.

    Requires a complete 2-class x 2-augmentation grid.  Slot order is
    deterministic: the smaller class id is class 1, the earlier enum member
    is augmentation A.  Training code that owns an episode should assign
    slots itself (episode order defines class 1 and augmentation A there).
    """
    if len(tokens) != 4:
        raise ConfigError(f"delta grid needs exactly 4 tokens, got {len(tokens)}")
    classes = sorted({t.class_id for t in tokens})
    augs = sorted({t.augmentation for t in tokens}, key=lambda a: list(type(a)).index(a))
    if len(classes) != 2 or len(augs) != 2:
        raise ConfigError(
            f"delta grid needs 2 classes x 2 augmentations, got classes={classes} "
            f"augmentations={[a.value for a in augs]}"
        )
    by_key = {(t.class_id, t.augmentation): t for t in tokens}
    if len(by_key) != 4:
        raise ConfigError("delta grid has duplicate (class, augmentation) cells")
    try:
        return (
            by_key[(classes[0], augs[0])].delta,
            by_key[(classes[0], augs[1])].delta,
            by_key[(classes[1], augs[0])].delta,
            by_key[(classes[1], augs[1])].delta,
        )
    except KeyError as missing:
        raise ConfigError(f"delta grid missing cell {missing.args[0]}") from None


def total_loss(adtriplet: ad.Tensor, ce: ad.Tensor, weights: LossWeights) -> ad.Tensor:
    return ad.add(ad.scalar_mul(adtriplet, weights.alpha),
                  ad.scalar_mul(ce, weights.beta))
