"""Fine-tuning loop for the grid detector on a YOLO-layout dataset."""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn
from PIL import Image

from .data import read_labels, training_pairs, validate_layout
from .letterbox import letterbox
from .model import STRIDE, GridDetector


def _image_tensor(path: Path, img_size: int) -> torch.Tensor:
    array, _ = letterbox(Image.open(path), img_size)
    return torch.from_numpy(array).permute(2, 0, 1)


def _targets_for(
    label_path: Path, grid: int
) -> list[tuple[int, int, int, float, float, float, float]]:
    """(cls, cell_y, cell_x, off_x, off_y, w, h) per ground-truth box.

    Normalized label coordinates are grid-aligned directly; letterboxing
    preserves normalized geometry up to the padding, which the square
    synthetic exports of this toolchain do not use.
    """
    out = []
    for cls, cx, cy, w, h in read_labels(label_path):
        cell_x = min(int(cx * grid), grid - 1)
        cell_y = min(int(cy * grid), grid - 1)
        out.append((cls, cell_y, cell_x, cx * grid - cell_x, cy * grid - cell_y, w, h))
    return out


def train(
    data_yaml: Path,
    base_weights_model: GridDetector | None,
    classes: list[str],
    img_size: int,
    epochs: int,
    lr: float = 1e-3,
    seed: int = 0,
) -> GridDetector:
    torch.manual_seed(seed)
    validate_layout(data_yaml)
    model = GridDetector(len(classes), img_size)
    if base_weights_model is not None:
        base_state = base_weights_model.state_dict()
        own_state = model.state_dict()
        # transfer everything that fits; the head is reinitialized when the
        # class count changed
        for key, value in base_state.items():
            if key in own_state and own_state[key].shape == value.shape:
                own_state[key] = value
        model.load_state_dict(own_state)
    model.train()

    pairs = training_pairs(data_yaml, "train")
    grid = img_size // STRIDE
    bce = nn.BCEWithLogitsLoss()
    ce = nn.CrossEntropyLoss()
    mse = nn.MSELoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)

    for _ in range(max(1, epochs)):
        for img_path, lbl_path in pairs:
            x = _image_tensor(img_path, img_size).unsqueeze(0)
            logits = model(x)[0]
            obj_target = torch.zeros(grid, grid)
            loss = torch.zeros(())
            targets = _targets_for(lbl_path, grid)
            for cls, cy, cx, off_x, off_y, w, h in targets:
                obj_target[cy, cx] = 1.0
                cell = logits[:, cy, cx]
                box_pred = torch.sigmoid(cell[1:5])
                box_want = torch.tensor([off_x, off_y, w, h])
                loss = loss + mse(box_pred, box_want)
                if 0 <= cls < len(classes):
                    loss = loss + ce(
                        cell[5:].unsqueeze(0), torch.tensor([cls], dtype=torch.long)
                    )
            loss = loss + bce(logits[0], obj_target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

    model.eval()
    return model
