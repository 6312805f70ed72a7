import pathlib

import pytest

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "demos" / "scenarios"


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
