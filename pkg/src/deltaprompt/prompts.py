"""Conditional prompt model: learnable context plus an instance metanet.

A prompt for class y is the sequence ``[v_1 + pi, ..., v_M + pi, c_y]`` where
``v_m`` are learnable context rows, ``c_y`` is the frozen class embedding and
``pi`` is the metanet output for the input image.  The delta meta token of an
(image, augmentation) pair is ``metanet(f(aug(x))) - metanet(f(x))``;
gradients flow through both terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .augment import Augmentation, ToyImage, apply_augmentation
from .encoders import FrozenEncoders
from .errors import ConfigError, ShapeError
from .seeding import generator

__all__ = ["PromptModel", "DeltaMetaToken", "default_bottleneck_ratio"]

CONTEXT_INIT_STD = 0.02
# Unit-variance metanet init: small inits leave delta tokens orders of
# magnitude below the triplet margin, where the hinge plateau starves the
# adversarial loss of gradient within the short training budget.
METANET_INIT_STD = 1.0


def default_bottleneck_ratio(feature_dim: int) -> int:
    return 16 if feature_dim >= 32 else 4


@dataclass
class DeltaMetaToken:
    """Metanet response to one augmentation of one image."""

    delta: ad.Tensor
    class_id: int
    augmentation: Augmentation


class PromptModel:
    def __init__(self, encoders: FrozenEncoders, context: np.ndarray,
                 w_down: np.ndarray, w_up: np.ndarray):
        d = encoders.feature_dim
        m = encoders.context_length
        if context.shape != (m, d):
            raise ShapeError(f"context must be {(m, d)}, got {context.shape}")
        hidden = w_down.shape[0]
        if w_down.shape != (hidden, d) or w_up.shape != (d, hidden):
            raise ShapeError(
                f"metanet shapes inconsistent: down {w_down.shape}, up {w_up.shape}"
            )
        self.encoders = encoders
        self.context = ad.parameter(context)
        self.w_down = ad.parameter(w_down)
        self.w_up = ad.parameter(w_up)

    @classmethod
    def build(cls, encoders: FrozenEncoders, seed: int,
              bottleneck_ratio: int | None = None) -> "PromptModel":
        d = encoders.feature_dim
        r = bottleneck_ratio or default_bottleneck_ratio(d)
        if d % r != 0:
            raise ConfigError(f"feature_dim {d} not divisible by bottleneck ratio {r}")
        hidden = d // r
        if hidden < 1:
            raise ConfigError(f"bottleneck ratio {r} leaves no hidden units for d={d}")
        rng = generator(seed, "model")
        context = rng.normal(0.0, CONTEXT_INIT_STD, size=(encoders.context_length, d))
        w_down = rng.normal(0.0, METANET_INIT_STD, size=(hidden, d))
        w_up = rng.normal(0.0, METANET_INIT_STD, size=(d, hidden))
        return cls(encoders, context, w_down, w_up)

    # -- bookkeeping --------------------------------------------------------

    @property
    def hidden_dim(self) -> int:
        return self.w_down.shape[0]

    def params(self) -> dict[str, ad.Tensor]:
        return {"context": self.context, "metanet_down": self.w_down,
                "metanet_up": self.w_up}

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params().values())

    # -- meta tokens --------------------------------------------------------

    def meta_token_from_features(self, features: ad.Tensor) -> ad.Tensor:
        hidden = ad.relu(ad.matmul(self.w_down, features))
        return ad.matmul(self.w_up, hidden)

    def meta_token(self, image: ToyImage) -> ad.Tensor:
        return self.meta_token_from_features(self.encoders.encode_image(image))

    def meta_token_np(self, image: ToyImage) -> np.ndarray:
        """Tape-free meta token; same arithmetic as the graph path."""
        feat = self.encoders.image_features_np(image)
        hidden = self.w_down.data @ feat
        return self.w_up.data @ np.where(hidden > 0.0, hidden, 0.0)

    def mean_meta_token(self, images: list[ToyImage]) -> ad.Tensor:
        """Mean metanet output over a set of images (class-mean reference)."""
        if not images:
            raise ConfigError("mean_meta_token: empty image list")
        stacked = ad.stack_rows([self.meta_token(im) for im in images])
        pool = ad.constant(np.full(len(images), 1.0 / len(images)))
        return ad.matmul(pool, stacked)

    def delta_meta_token(
        self,
        image: ToyImage,
        augmentation: Augmentation,
        seed: int = 0,
        reference: ad.Tensor | None = None,
    ) -> DeltaMetaToken:
        """Delta token for one augmentation of ``image``.

        The default reference is the un-augmented image's own meta token; a
        caller may pass a precomputed reference (e.g. a class mean) instead.
        """
        augmented = apply_augmentation(image, augmentation, seed)
        pi_aug = self.meta_token(augmented)
        if reference is None:
            reference = self.meta_token(image)
        delta = ad.sub(pi_aug, reference)
        return DeltaMetaToken(delta=delta, class_id=image.class_id,
                              augmentation=Augmentation(augmentation))

    # -- prompts and prediction ---------------------------------------------

    def assemble_prompt(self, meta: ad.Tensor, class_id: int) -> ad.Tensor:
        """(M+1, d) sequence: shifted context rows then the class embedding."""
        if meta.shape != (self.encoders.feature_dim,):
            raise ShapeError(
                f"meta token must be ({self.encoders.feature_dim},), got {meta.shape}"
            )
        rows = [
            ad.add(ad.row(self.context, m), meta)
            for m in range(self.encoders.context_length)
        ]
        rows.append(ad.constant(self.encoders.class_embedding(class_id)))
        return ad.stack_rows(rows)

    def predict_probs(
        self,
        image: ToyImage,
        candidate_classes: list[int],
        meta: ad.Tensor | None = None,
    ) -> ad.Tensor:
        """Class distribution over ``candidate_classes`` for ``image``.

        ``meta`` defaults to the image's own meta token, which is the
        evaluation-time path; training passes the augmented view's token
        explicitly so the same node conditions both the prompt and the loss.
        """
        if not candidate_classes:
            raise ConfigError("predict_probs: empty candidate set")
        if len(set(candidate_classes)) != len(candidate_classes):
            raise ConfigError("predict_probs: duplicate candidate classes")
        features = self.encoders.encode_image(image)
        if meta is None:
            meta = self.meta_token_from_features(features)
        inv_tau = 1.0 / self.encoders.tau
        logits = []
        for cid in candidate_classes:
            prompt = self.assemble_prompt(meta, cid)
            text = self.encoders.encode_text_prompt(prompt)
            logits.append(ad.scalar_mul(ad.cosine_similarity(features, text), inv_tau))
        return ad.softmax(ad.stack_scalars(logits))
