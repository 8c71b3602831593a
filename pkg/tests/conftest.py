import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
REPO_DIR = TESTS_DIR.parent
sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def repo_dir() -> Path:
    return REPO_DIR


@pytest.fixture(scope="session")
def reference_config_path() -> Path:
    return REPO_DIR / "configs" / "reference.toml"


@pytest.fixture(scope="session")
def timelines_dir() -> Path:
    return REPO_DIR / "timelines"
