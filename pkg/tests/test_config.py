import pytest

from ehrqa.config import PipelineConfig, ReaderSelection
from ehrqa.errors import ConfigError
from ehrqa.reader import VerifierConfig


def test_config_round_trip(config, tmp_path):
    path = tmp_path / "config.json"
    config.save(str(path))
    reloaded = PipelineConfig.load(str(path))
    assert reloaded.to_dict() == config.to_dict()
    assert reloaded == config


def test_defaults_are_sensible():
    cfg = PipelineConfig()
    assert cfg.enable_splitting and cfg.enable_plausible
    assert not cfg.include_natural_empties
    assert cfg.separator == "，"
    assert "。" in cfg.sentence_delimiters
    assert "，" in cfg.bridge_chars
    assert cfg.verifier.max_answer_chars == 64
    assert cfg.reader.backend == "oracle"


def test_ratio_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(split_ratios=(0.5, 0.4, 0.2))


def test_delta_must_be_finite_in_config():
    with pytest.raises(ConfigError):
        PipelineConfig(verifier=VerifierConfig(delta=float("inf")))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        PipelineConfig.from_dict({"bogus_knob": 1})


def test_unknown_backend_rejected():
    with pytest.raises(ConfigError, match="backend"):
        ReaderSelection(backend="astrology")


def test_registries_built_from_config(config):
    types = config.type_registry()
    assert "disease" in types.ner_queryable_types
    assert "family_member-disease" in types.class_names()
    registry = config.template_registry()
    assert registry.directional_for("family_member-disease")
    assert registry.ner_for("abnormality")


def test_template_registry_validates_against_types(config):
    config.templates.append(
        {
            "template_id": "bad",
            "relation_class": "ghost-class",
            "direction": "query-right",
            "pattern": "What {X}?",
        }
    )
    with pytest.raises(ConfigError, match="not in type registry"):
        config.template_registry()
