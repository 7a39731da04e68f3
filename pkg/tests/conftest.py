from __future__ import annotations

import sys
from pathlib import Path

import pytest
from PIL import Image

from ladder.mock_bridge import write_mock_weights


def make_image(path: Path, width: int, height: int, color=(90, 120, 60)) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (width, height), color).save(path)
    return path


@pytest.fixture
def image_factory(tmp_path):
    counter = [0]

    def _make(width: int = 100, height: int = 80, name: str | None = None) -> Path:
        counter[0] += 1
        name = name or f"img{counter[0]:03d}.png"
        return make_image(tmp_path / name, width, height)

    return _make


@pytest.fixture
def mock_bridge_cmd():
    return [sys.executable, "-m", "ladder.mock_bridge"]


@pytest.fixture
def mock_weights(tmp_path):
    def _write(name: str = "weights.json", **fields) -> Path:
        return write_mock_weights(tmp_path / name, **fields)

    return _write
