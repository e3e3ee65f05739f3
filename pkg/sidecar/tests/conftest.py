import os

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def tiny_dataset_path() -> str:
    return os.path.join(FIXTURES, "tiny_train.json")


@pytest.fixture(scope="session")
def golden_exchange_path() -> str:
    return os.path.join(GOLDEN, "stub_exchange.json")
