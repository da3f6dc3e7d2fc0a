"""Episode sampling: distinctness, pinning, and pair-frequency statistics."""

import numpy as np
import pytest

from deltaprompt.dataset import generate_dataset
from deltaprompt.errors import SamplingError
from deltaprompt.profiling import AUG_ORDER, SamplerWeights
from deltaprompt.episodes import sample_episode


@pytest.fixture(scope="module")
def ds():
    return generate_dataset(n_classes=4, per_class=24, image_size=8, shots=8, seed=0)


def test_episode_draws_distinct_classes_and_augmentations(ds):
    w = SamplerWeights.uniform()
    rng = np.random.default_rng(0)
    for _ in range(500):
        ep = sample_episode(ds, w, rng)
        assert ep.class_1 != ep.class_2
        assert ep.aug_a is not ep.aug_b
        assert ep.class_1 in ds.base_classes and ep.class_2 in ds.base_classes


def test_episode_always_consumes_four_seeds(ds):
    w = SamplerWeights.uniform()
    ep = sample_episode(ds, w, rng=3)
    seeds = {ep.seed_a1, ep.seed_b1, ep.seed_a2, ep.seed_b2}
    assert len(seeds) == 4
    assert all(0 <= s < 2**62 for s in seeds)


def test_episode_sampling_is_seed_deterministic(ds):
    w = SamplerWeights.uniform()
    a = sample_episode(ds, w, rng=42)
    b = sample_episode(ds, w, rng=42)
    assert (a.class_1, a.class_2, a.aug_a, a.aug_b) == (b.class_1, b.class_2, b.aug_a, b.aug_b)
    assert np.array_equal(a.x1.pixels, b.x1.pixels)
    assert (a.seed_a1, a.seed_b1, a.seed_a2, a.seed_b2) == (
        b.seed_a1, b.seed_b1, b.seed_a2, b.seed_b2
    )


def test_fixed_first_pins_the_anchor_image(ds):
    w = SamplerWeights.uniform()
    img = ds.train[1][5]
    for i in range(20):
        ep = sample_episode(ds, w, rng=i, fixed_first=(1, 5))
        assert np.array_equal(ep.x1.pixels, img.pixels)
        assert ep.class_2 != 1
    with pytest.raises(SamplingError):
        sample_episode(ds, w, rng=0, fixed_first=(3, 0))  # class 3 is held out


def test_episode_reads_go_through_the_access_counter(ds):
    before = dict(ds.train_access_counts)
    sample_episode(ds, SamplerWeights.uniform(), rng=9)
    after = ds.train_access_counts
    assert sum(after.values()) == sum(before.values()) + 2


def test_class_pool_override_and_degenerate_pools(ds):
    w = SamplerWeights.uniform()
    ep = sample_episode(ds, w, rng=1, classes=[2, 3])
    assert {ep.class_1, ep.class_2} == {2, 3}
    with pytest.raises(SamplingError):
        sample_episode(ds, w, rng=0, classes=[0])
    with pytest.raises(SamplingError):
        sample_episode(ds, w, rng=0, classes=[])


def test_uniform_weights_cover_ordered_pairs_evenly(ds):
    # under uniform weights each of the 14*13 ordered augmentation pairs
    # should land within 3 sigma of n/182 (fixed seed keeps this stable)
    w = SamplerWeights.uniform()
    rng = np.random.default_rng(1)
    n = 100_000
    counts = {}
    for _ in range(n):
        ep = sample_episode(ds, w, rng)
        key = (ep.aug_a, ep.aug_b)
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 14 * 13
    p = 1.0 / (14 * 13)
    sigma = np.sqrt(n * p * (1 - p))
    worst = max(abs(c - n * p) for c in counts.values())
    assert worst < 3.0 * sigma, f"worst pair deviation {worst:.1f} vs 3 sigma {3 * sigma:.1f}"


def test_skewed_weights_shift_pair_frequencies(ds):
    probs = np.full(14, 0.01)
    probs[0] = 1.0
    w = SamplerWeights(probs=probs, temperature=1.0)
    rng = np.random.default_rng(8)
    first = [sample_episode(ds, w, rng).aug_a for _ in range(2_000)]
    share = np.mean([a is AUG_ORDER[0] for a in first])
    assert share > 0.8
