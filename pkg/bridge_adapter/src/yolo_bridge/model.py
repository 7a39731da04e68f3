"""A compact single-scale grid detector.

Small enough to train for an epoch on CPU in seconds, yet structured like
its bigger relatives: a strided conv backbone and a dense prediction head
emitting, per grid cell, an objectness logit, a box in cell-offset/size
parametrization, and class logits.
"""

from __future__ import annotations

import torch
from torch import nn

STRIDE = 8
WEIGHTS_FORMAT = "ladder-yolo-bridge-v1"


class GridDetector(nn.Module):
    def __init__(self, num_classes: int, img_size: int = 64):
        super().__init__()
        if img_size <= 0 or img_size % STRIDE != 0:
            raise ValueError(f"img_size must be a positive multiple of {STRIDE}")
        self.num_classes = num_classes
        self.img_size = img_size
        self.backbone = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Conv2d(64, 5 + num_classes, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, S, S) -> (B, 5 + C, S/8, S/8) raw logits."""
        return self.head(self.backbone(x))

    @torch.no_grad()
    def decode(self, logits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Raw logits for one image -> (boxes, scores, classes) in network pixels.

        Box confidence is objectness times the best class probability.
        """
        gh, gw = logits.shape[-2], logits.shape[-1]
        grid_y, grid_x = torch.meshgrid(
            torch.arange(gh, dtype=torch.float32),
            torch.arange(gw, dtype=torch.float32),
            indexing="ij",
        )
        obj = torch.sigmoid(logits[0])
        cx = (grid_x + torch.sigmoid(logits[1])) * STRIDE
        cy = (grid_y + torch.sigmoid(logits[2])) * STRIDE
        w = torch.sigmoid(logits[3]) * self.img_size
        h = torch.sigmoid(logits[4]) * self.img_size
        cls_prob = torch.softmax(logits[5:], dim=0)
        best_prob, best_cls = cls_prob.max(dim=0)
        scores = (obj * best_prob).flatten()
        boxes = torch.stack(
            [cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], dim=-1
        ).reshape(-1, 4)
        return boxes, scores, best_cls.flatten()


def save_weights(path, model: GridDetector, classes: list[str]) -> None:
    torch.save(
        {
            "format": WEIGHTS_FORMAT,
            "classes": list(classes),
            "img_size": model.img_size,
            "state": model.state_dict(),
        },
        path,
    )


class BadWeights(Exception):
    pass


def load_weights(path) -> tuple[GridDetector, list[str]]:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise BadWeights(f"cannot load weights {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != WEIGHTS_FORMAT:
        raise BadWeights(f"{path} is not a {WEIGHTS_FORMAT} artifact")
    classes = list(payload.get("classes", []))
    if not classes:
        raise BadWeights(f"{path} carries no class list")
    model = GridDetector(len(classes), int(payload.get("img_size", 64)))
    try:
        model.load_state_dict(payload["state"])
    except Exception as e:
        raise BadWeights(f"{path} state dict does not fit the architecture: {e}") from e
    model.eval()
    return model, classes


def init_weights(path, classes: list[str], img_size: int = 64, seed: int = 0) -> None:
    """Fresh randomly-initialized weights; the stand-in for a pretrained base."""
    torch.manual_seed(seed)
    model = GridDetector(len(classes), img_size)
    save_weights(path, model, classes)
