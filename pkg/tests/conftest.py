import pytest

from stagewatch import EngineConfig, reference_plan


@pytest.fixture
def plan():
    return reference_plan()


@pytest.fixture
def config():
    return EngineConfig()
