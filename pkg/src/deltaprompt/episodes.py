"""Episode construction: two classes, two augmentation types, four views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import Augmentation, ToyImage
from .dataset import ToyDataset
from .errors import SamplingError
from .profiling import SamplerWeights, wrs_sample

__all__ = ["Episode", "sample_episode"]


@dataclass
class Episode:
    """One training step's raw material.

    ``seed_*`` are the augmentation seeds for the four views aug_a/b applied
    to x1/x2; they are drawn for every episode so RNG consumption does not
    depend on which augmentation types came up.
    """

    x1: ToyImage
    x2: ToyImage
    aug_a: Augmentation
    aug_b: Augmentation
    seed_a1: int
    seed_b1: int
    seed_a2: int
    seed_b2: int

    @property
    def class_1(self) -> int:
        return self.x1.class_id

    @property
    def class_2(self) -> int:
        return self.x2.class_id


def sample_episode(
    ds: ToyDataset,
    weights: SamplerWeights,
    rng: np.random.Generator | int,
    classes: list[int] | None = None,
    fixed_first: tuple[int, int] | None = None,
) -> Episode:
    """Draw an episode: distinct classes, distinct augmentation types.

    ``fixed_first`` pins (class id, train index) of x1, which the training
    loop uses to give every base train image one turn per epoch; x2 is always
    uniform over the other classes' train images.  Draw order is fixed:
    classes and images first, then the augmentation pair, then four seeds.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    pool = list(ds.base_classes if classes is None else classes)
    pool = [c for c in pool if len(ds.train.get(c, ()))]
    if len(pool) < 2:
        raise SamplingError(
            f"cannot draw two distinct classes: only {len(pool)} have train images"
        )
    if fixed_first is not None:
        cid1, idx1 = fixed_first
        if cid1 not in pool:
            raise SamplingError(f"fixed class {cid1} not in the sampling pool")
    else:
        cid1 = pool[int(rng.integers(len(pool)))]
        idx1 = int(rng.integers(len(ds.train[cid1])))
    others = [c for c in pool if c != cid1]
    cid2 = others[int(rng.integers(len(others)))]
    idx2 = int(rng.integers(len(ds.train[cid2])))
    x1 = ds.train_image(cid1, idx1)
    x2 = ds.train_image(cid2, idx2)
    aug_a, aug_b = wrs_sample(weights, rng)
    seeds = [int(s) for s in rng.integers(0, 2**62, size=4)]
    return Episode(
        x1=x1, x2=x2, aug_a=aug_a, aug_b=aug_b,
        seed_a1=seeds[0], seed_b1=seeds[1], seed_a2=seeds[2], seed_b2=seeds[3],
    )
