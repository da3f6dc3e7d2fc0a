"""Config schema, defaults, validation, and the key=value file format."""

import dataclasses

import pytest

from deltaprompt.config import ExperimentConfig, load_config, save_config
from deltaprompt.errors import ConfigError


def test_defaults_pin_the_standard_protocol():
    c = ExperimentConfig()
    assert (c.seed, c.n_classes, c.per_class, c.image_size, c.shots) == (0, 8, 40, 16, 16)
    assert (c.feature_dim, c.context_length, c.tau) == (32, 4, 0.07)
    assert (c.epochs, c.learning_rate, c.momentum, c.schedule) == (10, 0.002, 0.9, "cosine")
    assert (c.alpha, c.beta, c.margin) == (1.0, 1.0, 0.2)
    assert c.constraint_mode == "constraints4"
    assert c.weighted_sampling is False
    assert c.delta_reference == "same_image"
    assert (c.profile_samples, c.profile_temperature) == (100, 1.0)
    assert c.resolved_bottleneck_ratio() == 16
    c.validate()


def test_bottleneck_auto_resolution():
    assert ExperimentConfig(feature_dim=32).resolved_bottleneck_ratio() == 16
    assert ExperimentConfig(feature_dim=16).resolved_bottleneck_ratio() == 4
    assert ExperimentConfig(feature_dim=16, bottleneck_ratio=8).resolved_bottleneck_ratio() == 8


@pytest.mark.parametrize(
    "overrides",
    [
        {"seed": -1},
        {"n_classes": 7},
        {"n_classes": 2},
        {"per_class": 10},
        {"image_size": 4},
        {"shots": 39},
        {"feature_dim": 2},
        {"context_length": 0},
        {"tau": 0.0},
        {"epochs": 0},
        {"learning_rate": -0.1},
        {"momentum": 1.0},
        {"schedule": "warmup"},
        {"alpha": -1.0},
        {"alpha": 0.0, "beta": 0.0},
        {"margin": 0.0},
        {"constraint_mode": "constraints3"},
        {"delta_reference": "episode_mean"},
        {"profile_samples": 0},
        {"profile_temperature": 0.0},
        {"feature_dim": 30},  # not divisible by the auto ratio
    ],
)
def test_validation_rejects_bad_fields(overrides):
    with pytest.raises(ConfigError):
        ExperimentConfig(**overrides).validate()


def test_save_load_round_trip_is_lossless(tmp_path):
    cfg = ExperimentConfig(
        seed=3, n_classes=6, per_class=30, shots=12, feature_dim=16,
        bottleneck_ratio=4, epochs=7, learning_rate=0.0125, alpha=0.5,
        weighted_sampling=True, delta_reference="class_mean",
        profile_samples=42, out_dir="runs/exp3",
    )
    path = tmp_path / "exp.cfg"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_round_trip_preserves_float_precision(tmp_path):
    cfg = ExperimentConfig(learning_rate=1e-3 + 1e-17, tau=0.07)
    path = tmp_path / "exp.cfg"
    save_config(cfg, path)
    back = load_config(path)
    assert back.learning_rate == cfg.learning_rate
    assert back.tau == 0.07


def test_saved_file_is_sectioned_key_value_text(tmp_path):
    path = tmp_path / "exp.cfg"
    save_config(ExperimentConfig(), path)
    text = path.read_text()
    for section in ("[run]", "[dataset]", "[model]", "[training]", "[profiling]", "[output]"):
        assert section in text
    assert "weighted_sampling = off" in text
    assert "classes = 8" in text


def test_partial_files_fall_back_to_defaults(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("[training]\nepochs = 3\nalpha = 0.5\n")
    cfg = load_config(path)
    assert cfg.epochs == 3
    assert cfg.alpha == 0.5
    assert cfg == dataclasses.replace(ExperimentConfig(), epochs=3, alpha=0.5)


def test_bottleneck_ratio_accepts_auto(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("[model]\nbottleneck_ratio = auto\n")
    assert load_config(path).bottleneck_ratio == 0


def test_boolean_spellings(tmp_path):
    path = tmp_path / "exp.cfg"
    for raw, want in [("on", True), ("true", True), ("1", True),
                      ("off", False), ("no", False), ("0", False)]:
        path.write_text(f"[training]\nweighted_sampling = {raw}\n")
        assert load_config(path).weighted_sampling is want
    path.write_text("[training]\nweighted_sampling = maybe\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_sections_and_keys_are_rejected(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("[experimental]\nfoo = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)
    path.write_text("[training]\nlearning_rte = 0.1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path)


def test_malformed_values_and_files_are_rejected(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("[training]\nepochs = many\n")
    with pytest.raises(ConfigError, match="bad value"):
        load_config(path)
    path.write_text("epochs = 3\n")  # key before any section header
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.cfg")


def test_save_refuses_invalid_configs(tmp_path):
    with pytest.raises(ConfigError):
        save_config(ExperimentConfig(epochs=0), tmp_path / "bad.cfg")
