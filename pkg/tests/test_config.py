import pytest

from promptvoice.config import ConfigError, load_config, resolve_config, save_config


def test_defaults_resolve():
    config = resolve_config({})
    assert config.features.mel_bins == 80
    assert config.acoustic.diffusion_steps == 100


def test_resolution_idempotent():
    config = resolve_config({"acoustic": {"hidden_dim": 32}})
    again = resolve_config(config.to_dict())
    assert config == again
    assert config.hash() == again.hash()


def test_partial_override_keeps_other_defaults():
    config = resolve_config({"training": {"base_lr": 0.01}})
    assert config.training.base_lr == 0.01
    assert config.training.warmup_steps == 4000


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown config section"):
        resolve_config({"nonsense": {}})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        resolve_config({"features": {"mel_bin": 80}})


def test_type_mismatch_rejected():
    with pytest.raises(ConfigError, match="expected int"):
        resolve_config({"features": {"mel_bins": "eighty"}})
    with pytest.raises(ConfigError, match="expected bool"):
        resolve_config({"training": {"use_speaker_prompt": 1}})


def test_nonpositive_values_rejected():
    with pytest.raises(ConfigError, match="positive"):
        resolve_config({"features": {"mel_bins": 0}})
    with pytest.raises(ConfigError, match="positive"):
        resolve_config({"training": {"base_lr": -1.0}})


def test_zero_allowed_where_meaningful():
    config = resolve_config(
        {
            "training": {
                "max_steps": 0,
                "checkpoint_every": 0,
                "validation_speaker_fraction": 0.0,
                "weight_decay": 0.0,
            },
            "acoustic": {"dropout": 0.0},
        }
    )
    assert config.training.checkpoint_every == 0


def test_cross_field_validation():
    with pytest.raises(ConfigError, match="f0_min_hz"):
        resolve_config({"features": {"f0_min_hz": 500.0, "f0_max_hz": 400.0}})
    with pytest.raises(ConfigError, match="beta_min"):
        resolve_config({"acoustic": {"beta_min": 0.5, "beta_max": 0.1}})


def test_hash_changes_with_values():
    a = resolve_config({})
    b = resolve_config({"training": {"seed": 1}})
    assert a.hash() != b.hash()


def test_yaml_round_trip(tmp_path):
    config = resolve_config({"acoustic": {"hidden_dim": 48}})
    path = tmp_path / "config.yaml"
    save_config(config, path)
    assert load_config(path) == config


def test_load_config_none_gives_defaults():
    assert load_config(None) == resolve_config({})
