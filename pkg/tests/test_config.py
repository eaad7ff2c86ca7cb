"""Config loading, coercion, validation, overrides."""

import pytest

from provsentry.config import (PipelineConfig, apply_overrides, load_config,
                               overrides_from_strings)


def test_defaults_validate():
    PipelineConfig().validate()


def test_effective_p_min_falls_back_to_tau():
    cfg = PipelineConfig(rl_tau=0.05)
    assert cfg.effective_p_min() == 0.05
    cfg = PipelineConfig(rl_tau=0.05, rl_p_min=0.2)
    assert cfg.effective_p_min() == 0.2


def test_validate_rejects_bad_ranges():
    with pytest.raises(ValueError, match="rl_tau"):
        PipelineConfig(rl_tau=0.0).validate()
    with pytest.raises(ValueError, match="rl_p_init"):
        PipelineConfig(rl_p_init=1.5).validate()
    with pytest.raises(ValueError, match="malicious_budget"):
        PipelineConfig(malicious_budget=0.0).validate()
    with pytest.raises(ValueError, match="batch_size"):
        PipelineConfig(batch_size=1).validate()
    with pytest.raises(ValueError, match="gnn_layers"):
        PipelineConfig(gnn_layers=0).validate()


def test_load_config_parses_types_and_comments(tmp_path):
    path = tmp_path / "pipeline.cfg"
    path.write_text(
        "# tuning\n"
        "hidden_dim = 32\n"
        "\n"
        "learning_rate = 0.005\n"
        "rl_enabled = false\n"
    )
    cfg = load_config(path)
    assert cfg.hidden_dim == 32
    assert cfg.learning_rate == 0.005
    assert cfg.rl_enabled is False
    assert cfg.token_dim == PipelineConfig().token_dim


def test_load_config_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("hidden_dim = 32\nnot a config line\n")
    with pytest.raises(ValueError, match=":2:"):
        load_config(path)
    path.write_text("mystery_knob = 3\n")
    with pytest.raises(ValueError, match="unknown config key"):
        load_config(path)
    path.write_text("hidden_dim = banana\n")
    with pytest.raises(ValueError, match=":1:"):
        load_config(path)


def test_load_config_over_base(tmp_path):
    base = PipelineConfig(hidden_dim=16, token_dim=16)
    path = tmp_path / "cfg"
    path.write_text("hidden_dim = 48\n")
    cfg = load_config(path, base=base)
    assert cfg.hidden_dim == 48
    assert cfg.token_dim == 16
    assert base.hidden_dim == 16   # base untouched


def test_round_trip_dict():
    cfg = PipelineConfig(hidden_dim=24, rl_enabled=False)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown config keys"):
        PipelineConfig.from_dict({"mystery_knob": 1})


def test_overrides_from_strings_coerces():
    out = overrides_from_strings({"rl_tau": "0.05", "max_epochs": "20",
                                  "rl_enabled": "yes"})
    assert out == {"rl_tau": 0.05, "max_epochs": 20, "rl_enabled": True}
    with pytest.raises(ValueError, match="unknown config key"):
        overrides_from_strings({"nope": "1"})
    with pytest.raises(ValueError, match="bool"):
        overrides_from_strings({"rl_enabled": "maybe"})


def test_apply_overrides_returns_validated_copy():
    cfg = PipelineConfig()
    out = apply_overrides(cfg, {"rl_tau": 0.05})
    assert out.rl_tau == 0.05
    assert cfg.rl_tau == 0.02
    with pytest.raises(ValueError):
        apply_overrides(cfg, {"rl_tau": 2.0})
