"""Frozen encoder pair: determinism, shapes, and input-only differentiability."""

import numpy as np
import pytest

from deltaprompt import autodiff as ad
from deltaprompt.augment import ToyImage
from deltaprompt.encoders import FrozenEncoders
from deltaprompt.errors import DataError, ShapeError


def _build(seed=0, d=16, size=8, n_classes=4, m=4, tau=0.07):
    return FrozenEncoders.build(
        n_classes=n_classes, image_size=size, feature_dim=d,
        context_length=m, tau=tau, seed=seed,
    )


def _image(seed=0, size=8):
    rng = np.random.default_rng(seed)
    return ToyImage(pixels=rng.uniform(0, 1, (size, size, 3)), class_id=0)


def test_build_is_seed_deterministic():
    assert _build(seed=5).state_bytes() == _build(seed=5).state_bytes()


def test_different_seeds_give_different_weights():
    assert _build(seed=0).state_bytes() != _build(seed=1).state_bytes()


def test_image_features_shape_and_tanh_range():
    enc = _build()
    f = enc.image_features_np(_image())
    assert f.shape == (16,)
    assert np.all(np.abs(f) < 1.0)


def test_encode_image_matches_numpy_path_and_is_constant():
    enc = _build()
    img = _image(3)
    t = enc.encode_image(img)
    assert np.array_equal(t.data, enc.image_features_np(img))
    assert not t.requires_grad


def test_image_size_mismatch_raises():
    enc = _build(size=8)
    with pytest.raises(ShapeError):
        enc.image_features_np(_image(size=16))


def test_class_embeddings_are_unit_rows():
    enc = _build()
    norms = np.linalg.norm(enc.class_embeddings, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    with pytest.raises(DataError):
        enc.class_embedding(99)


def test_text_encoder_output_shape_and_range():
    enc = _build()
    seq = np.random.default_rng(0).normal(size=(5, 16))
    f = enc.text_features_np(seq)
    assert f.shape == (16,)
    assert np.all(np.abs(f) < 1.0)


def test_text_encoder_rejects_wrong_sequence_shape():
    enc = _build()
    with pytest.raises(ShapeError):
        enc.text_features_np(np.zeros((4, 16)))
    with pytest.raises(ShapeError):
        enc.encode_text_prompt(ad.constant(np.zeros((5, 8))))


def test_graph_and_numpy_text_paths_agree():
    enc = _build()
    seq = np.random.default_rng(1).normal(size=(5, 16))
    got = enc.encode_text_prompt(ad.constant(seq)).data
    assert np.allclose(got, enc.text_features_np(seq), atol=1e-12)


def test_mean_pooling_makes_token_order_irrelevant():
    enc = _build()
    rng = np.random.default_rng(2)
    seq = rng.normal(size=(5, 16))
    perm = rng.permutation(5)
    a = enc.text_features_np(seq)
    b = enc.text_features_np(seq[perm])
    assert np.allclose(a, b, atol=1e-12)


def test_text_encoder_gradient_flows_to_sequence_only():
    enc = _build()
    seq = ad.parameter(np.random.default_rng(3).normal(size=(5, 16)))
    out = enc.encode_text_prompt(seq)
    ad.backward(ad.sum_all(out))
    assert seq.grad is not None
    assert np.any(seq.grad != 0.0)
    # frozen weights never accumulate gradient
    assert enc._w1_t.grad is None
    assert enc._w2_t.grad is None


def test_text_encoder_gradient_matches_finite_differences():
    enc = _build(d=8, m=2)
    rng = np.random.default_rng(4)
    seq = ad.parameter(rng.normal(size=(3, 8)) * 0.5)

    def f():
        feat = enc.encode_text_prompt(seq)
        return ad.matmul(feat, feat)

    result = ad.finite_difference_check(f, [seq])
    assert result.max_rel_error < 1e-4
    assert not result.near_kink


def test_rotated_view_of_an_asymmetric_image_moves_the_features():
    from deltaprompt.augment import Augmentation, apply_augmentation
    from deltaprompt.dataset import render_class_image

    enc = _build(seed=0, d=16, size=8)
    # the diagonal-stripe template (class 3 of 4) is not 180-degree symmetric
    img = render_class_image(3, 4, 8, np.random.default_rng(0))
    rotated = apply_augmentation(img, Augmentation.ROT180)
    a = enc.image_features_np(img)
    b = enc.image_features_np(rotated)
    assert np.linalg.norm(a - b) > 0.0


def test_tau_validation():
    with pytest.raises(DataError):
        _build(tau=0.0)
    with pytest.raises(DataError):
        _build(tau=-1.0)


def test_calibration_aligns_class_anchor_prompts():
    # a prompt holding only class k's embedding must point closer to class k's
    # probe-feature mean than to any other class's; this is the stand-in for a
    # pretrained vision/language pairing
    from deltaprompt.dataset import render_class_image
    from deltaprompt.seeding import generator

    enc = _build(seed=0, d=32, size=16, n_classes=8)
    mu = []
    for cid in range(8):
        feats = [
            enc.image_features_np(render_class_image(cid, 8, 16, generator(0, "encoders", cid, i)))
            for i in range(16)
        ]
        mu.append(np.mean(feats, axis=0))
    mu = np.array(mu)
    mu /= np.linalg.norm(mu, axis=1, keepdims=True)

    hits = 0
    for cid in range(8):
        seq = np.zeros((5, 32))
        seq[4] = enc.class_embedding(cid)
        g = enc.text_features_np(seq)
        sims = mu @ (g / np.linalg.norm(g))
        hits += int(np.argmax(sims) == cid)
    assert hits >= 7
