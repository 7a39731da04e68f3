from __future__ import annotations

import sys
from pathlib import Path

import pytest
from PIL import Image

BRIDGE = [sys.executable, "-m", "yolo_bridge.cli"]


def make_image(path: Path, width: int = 64, height: int = 48, color=(60, 110, 70)) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (width, height), color).save(path)
    return path


@pytest.fixture
def toy_weights(tmp_path):
    from yolo_bridge import init_weights

    path = tmp_path / "base.pt"
    init_weights(path, ["low", "high"], img_size=64)
    return path
