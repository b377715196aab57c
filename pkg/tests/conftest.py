from __future__ import annotations

from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def history_fixture(data_dir: Path) -> Path:
    return data_dir / "history_sample.csv"
