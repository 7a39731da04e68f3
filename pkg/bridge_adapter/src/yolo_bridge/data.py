"""YOLO-layout dataset loading and layout validation."""

from __future__ import annotations

from pathlib import Path

import yaml


class DatasetLayoutError(Exception):
    """Malformed dataset; carries the first offending path as str(exc)."""


IMAGE_EXTS = {".jpg", ".jpeg", ".png"}


def validate_layout(data_yaml: Path) -> dict:
    """Check the export layout; returns the parsed yaml on success."""
    if not data_yaml.is_file():
        raise DatasetLayoutError(str(data_yaml))
    try:
        spec = yaml.safe_load(data_yaml.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError):
        raise DatasetLayoutError(str(data_yaml))
    if not isinstance(spec, dict) or any(
        k not in spec for k in ("train", "val", "nc", "names")
    ):
        raise DatasetLayoutError(str(data_yaml))
    root = data_yaml.parent
    if not (root / "classes.names").is_file():
        raise DatasetLayoutError(str(root / "classes.names"))
    for key in ("train", "val"):
        img_dir = root / str(spec[key])
        if not img_dir.is_dir():
            raise DatasetLayoutError(str(img_dir))
        lbl_dir = root / str(spec[key]).replace("images", "labels", 1)
        if not lbl_dir.is_dir():
            raise DatasetLayoutError(str(lbl_dir))
    return spec


def read_labels(path: Path) -> list[tuple[int, float, float, float, float]]:
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise DatasetLayoutError(str(path))
        try:
            cls = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError:
            raise DatasetLayoutError(str(path))
        out.append((cls, cx, cy, w, h))
    return out


def training_pairs(data_yaml: Path, side: str = "train") -> list[tuple[Path, Path]]:
    """(image, label-file) pairs for one split side ("train" or "val")."""
    spec = validate_layout(data_yaml)
    root = data_yaml.parent
    img_dir = root / str(spec[side])
    lbl_dir = root / str(spec[side]).replace("images", "labels", 1)
    pairs = []
    for img in sorted(img_dir.iterdir()):
        if img.suffix.lower() not in IMAGE_EXTS:
            continue
        lbl = lbl_dir / (img.stem + ".txt")
        if not lbl.is_file():
            raise DatasetLayoutError(str(lbl))
        read_labels(lbl)  # surface corrupt files before training starts
        pairs.append((img, lbl))
    return pairs
