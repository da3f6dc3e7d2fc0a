"""Shared fixtures: tape hygiene and a small reusable world."""

import pytest

import deltaprompt.autodiff as ad
from deltaprompt.config import ExperimentConfig
from deltaprompt.train import build_world


@pytest.fixture(autouse=True)
def _clean_tape():
    ad._TAPE.entries.clear()
    ad._TAPE.consumed = False
    ad._TAPE.recording = True
    ad.reset_kink_margin()
    yield
    ad._TAPE.entries.clear()
    ad._TAPE.consumed = False
    ad._TAPE.recording = True


def small_config(**overrides) -> ExperimentConfig:
    """A fast config for harness-level tests: 4 classes, 2 epochs."""
    base = dict(
        seed=0,
        n_classes=4,
        per_class=24,
        image_size=16,
        shots=8,
        epochs=2,
        profile_samples=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base).validate()


@pytest.fixture(scope="session")
def small_world():
    """Read-only dataset/encoders/model for the small config.

    Tests that mutate the model (training, optimizer steps) must build their
    own world instead of using this fixture.
    """
    return build_world(small_config())
