"""Frozen image/text encoder pair over the toy world.

The image featurizer is a fixed random affine map over flattened pixels
followed by tanh.  The text encoder mean-pools a (M+1, d) prompt sequence and
passes it through a fixed 2-layer tanh net.  Class embeddings are fixed unit
vectors.  Nothing in here ever receives a gradient; the text encoder stays
differentiable with respect to its input sequence only.

The two sides must behave like a pretrained pair: a prompt that carries class
k's embedding has to land near class k's image-feature direction, otherwise
similarity scores carry no class signal and held-out classes could never be
recognized.  We get that property by calibrating the second text layer at
construction: solve least squares so each class-anchor prompt maps onto that
class's mean probe feature, then add seeded noise in the left null space so
the net stays generic away from the anchors.  Probe renders are drawn from
the encoder seed stream, never from dataset partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .augment import ToyImage
from .dataset import render_class_image
from .errors import DataError, ShapeError
from .seeding import generator

__all__ = ["FrozenEncoders"]

PROBES_PER_CLASS = 16
ANCHOR_GAIN = 0.75  # |target| < 1 keeps atanh finite
W1_GAIN = 3.0
NULL_NOISE = 0.5


@dataclass
class FrozenEncoders:
    """Fixed featurizer, text net, and class embeddings for one seed."""

    n_classes: int
    image_size: int
    feature_dim: int
    context_length: int
    tau: float
    w_img: np.ndarray
    b_img: np.ndarray
    w1_text: np.ndarray
    w2_text: np.ndarray
    class_embeddings: np.ndarray  # (K, d), unit rows

    # constant Tensor views, built lazily so dataclass stays plain
    def __post_init__(self) -> None:
        m1 = self.context_length + 1
        self._pool = ad.constant(np.full(m1, 1.0 / m1))
        self._w1_t = ad.constant(self.w1_text)
        self._w2_t = ad.constant(self.w2_text)

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        n_classes: int,
        image_size: int,
        feature_dim: int,
        context_length: int,
        tau: float,
        seed: int,
    ) -> "FrozenEncoders":
        if tau <= 0:
            raise DataError(f"tau must be positive, got {tau}")
        d = feature_dim
        in_dim = image_size * image_size * 3
        rng = generator(seed, "encoders")
        w_img = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(d, in_dim))
        b_img = rng.normal(0.0, 0.1, size=d)
        w1 = rng.normal(0.0, W1_GAIN / np.sqrt(d), size=(d, d))
        emb = rng.normal(size=(n_classes, d))
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)

        enc = cls(
            n_classes=n_classes,
            image_size=image_size,
            feature_dim=d,
            context_length=context_length,
            tau=float(tau),
            w_img=w_img,
            b_img=b_img,
            w1_text=w1,
            w2_text=np.zeros((d, d)),
            class_embeddings=emb,
        )

        # Mean probe feature per class defines the alignment targets.
        mu = np.zeros((n_classes, d))
        for cid in range(n_classes):
            feats = [
                enc.image_features_np(
                    render_class_image(cid, n_classes, image_size,
                                       generator(seed, "encoders", cid, i))
                )
                for i in range(PROBES_PER_CLASS)
            ]
            mu[cid] = np.mean(feats, axis=0)
        mu /= np.linalg.norm(mu, axis=1, keepdims=True)

        m1 = context_length + 1
        anchors = np.tanh(w1 @ (emb.T / m1))  # (d, K) columns h_k
        targets = np.arctanh(ANCHOR_GAIN * mu).T  # (d, K)
        w2t, *_ = np.linalg.lstsq(anchors.T, targets.T, rcond=None)
        w2 = w2t.T
        # Seeded texture on the complement of the anchor span; anchor images
        # are untouched because the projector kills span(h_k).
        null_proj = np.eye(d) - anchors @ np.linalg.pinv(anchors)
        w2 = w2 + rng.normal(0.0, NULL_NOISE / np.sqrt(d), size=(d, d)) @ null_proj

        return cls(
            n_classes=n_classes,
            image_size=image_size,
            feature_dim=d,
            context_length=context_length,
            tau=float(tau),
            w_img=w_img,
            b_img=b_img,
            w1_text=w1,
            w2_text=w2,
            class_embeddings=emb,
        )

    # -- image side ---------------------------------------------------------

    def image_features_np(self, image: ToyImage) -> np.ndarray:
        p = image.pixels
        if p.shape != (self.image_size, self.image_size, 3):
            raise ShapeError(
                f"encoder expects {(self.image_size, self.image_size, 3)} pixels, got {p.shape}"
            )
        return np.tanh(self.w_img @ p.reshape(-1) + self.b_img)

    def encode_image(self, image: ToyImage) -> ad.Tensor:
        """Image feature as a constant tensor (pixels are never trained)."""
        return ad.constant(self.image_features_np(image))

    # -- text side ----------------------------------------------------------

    def encode_text_prompt(self, sequence: ad.Tensor) -> ad.Tensor:
        """Differentiable text feature of a (context_length + 1, d) sequence."""
        m1 = self.context_length + 1
        if sequence.shape != (m1, self.feature_dim):
            raise ShapeError(
                f"prompt sequence must be {(m1, self.feature_dim)}, got {sequence.shape}"
            )
        pooled = ad.matmul(self._pool, sequence)
        hidden = ad.tanh(ad.matmul(self._w1_t, pooled))
        return ad.tanh(ad.matmul(self._w2_t, hidden))

    def text_features_np(self, sequence: np.ndarray) -> np.ndarray:
        m1 = self.context_length + 1
        if sequence.shape != (m1, self.feature_dim):
            raise ShapeError(
                f"prompt sequence must be {(m1, self.feature_dim)}, got {sequence.shape}"
            )
        pooled = sequence.mean(axis=0)
        return np.tanh(self.w2_text @ np.tanh(self.w1_text @ pooled))

    def class_embedding(self, class_id: int) -> np.ndarray:
        if not 0 <= class_id < self.n_classes:
            raise DataError(f"class id {class_id} out of range (K={self.n_classes})")
        return self.class_embeddings[class_id]

    # -- integrity ----------------------------------------------------------

    def state_bytes(self) -> bytes:
        """All frozen weights, concatenated; training must leave this unchanged."""
        return b"".join(
            np.ascontiguousarray(a).tobytes()
            for a in (self.w_img, self.b_img, self.w1_text, self.w2_text,
                      self.class_embeddings)
        )
