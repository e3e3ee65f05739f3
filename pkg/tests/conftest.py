import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ehrqa.config import PipelineConfig

SAMPLE_DIR = os.path.join(os.path.dirname(__file__), "..", "sample_data")


@pytest.fixture(scope="session")
def sample_config_path() -> str:
    return os.path.join(SAMPLE_DIR, "config.json")


@pytest.fixture(scope="session")
def sample_annotations_path() -> str:
    return os.path.join(SAMPLE_DIR, "annotations.jsonl")


@pytest.fixture()
def config(sample_config_path) -> PipelineConfig:
    return PipelineConfig.load(sample_config_path)


@pytest.fixture()
def types(config):
    return config.type_registry()


@pytest.fixture()
def registry(config):
    return config.template_registry()
