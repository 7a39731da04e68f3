"""YOLO-format dataset snapshots: stable class map, seeded split, deterministic export."""

from __future__ import annotations

import hashlib
import json
import random
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .annotations import SOURCE_HUMAN, SOURCE_MODEL, AnnotationDoc
from .errors import MappingError, ValidationError
from .geometry import BBox, NormalizedBox, clamp, denormalize, normalize

ClassMap = list[str]


@dataclass(frozen=True)
class DatasetSnapshot:
    """A frozen export: content hash, class map, and the two image lists."""

    snapshot_id: str
    class_map: ClassMap
    train_images: list[str]
    test_images: list[str]
    root: Path


def build_class_map(
    docs: Iterable[AnnotationDoc], pinned: Sequence[str] | None = None
) -> ClassMap:
    """Pinned labels keep their indices; new labels append in first-seen order
    over docs sorted by image path."""
    labels: list[str] = list(pinned) if pinned else []
    if len(set(labels)) != len(labels):
        raise ValidationError(f"pinned class map has duplicates: {labels}")
    seen = set(labels)
    for doc in sorted(docs, key=lambda d: d.image_path):
        for s in doc.shapes:
            if s.label not in seen:
                seen.add(s.label)
                labels.append(s.label)
    return labels


def split(
    image_paths: Iterable[str], test_fraction: float, seed: int
) -> tuple[list[str], list[str]]:
    """Deterministic (train, test) partition.

    Shuffles the path-sorted input with a seeded RNG and takes
    round(n * test_fraction) paths for the test side; both sides come back
    path-sorted. Same inputs and seed always give the same partition.
    """
    if not 0.0 <= test_fraction <= 1.0:
        raise ValidationError(f"test_fraction {test_fraction} outside [0, 1]")
    paths = sorted(image_paths)
    shuffled = list(paths)
    random.Random(seed).shuffle(shuffled)
    n_test = round(len(paths) * test_fraction)
    return sorted(shuffled[n_test:]), sorted(shuffled[:n_test])


def format_label_line(class_index: int, bbox: BBox, image_w: int, image_h: int) -> str:
    n = normalize(clamp(bbox, image_w, image_h), image_w, image_h)
    return f"{class_index} {n.cx:.6f} {n.cy:.6f} {n.w:.6f} {n.h:.6f}"


def parse_label_file(path: Path, image_w: int, image_h: int) -> list[tuple[int, BBox]]:
    """Read one YOLO label file back into pixel-space boxes."""
    out: list[tuple[int, BBox]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ValidationError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        idx = int(parts[0])
        cx, cy, w, h = (float(p) for p in parts[1:])
        out.append((idx, denormalize(NormalizedBox(cx, cy, w, h), image_w, image_h)))
    return out


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def export_yolo(
    docs: Mapping[str, AnnotationDoc],
    class_map: Sequence[str],
    split_lists: tuple[Sequence[str], Sequence[str]],
    out_dir: Path | str,
    include_model_labels: bool = False,
    seed: int | None = None,
    test_fraction: float | None = None,
) -> DatasetSnapshot:
    """Write the YOLO training layout and return its content-hashed snapshot.

    ``docs`` maps each image path (relative to its corpus root) to its
    document; every path in ``split_lists`` must be a key. By default only
    human-verified shapes are exported: raw model labels enter training data
    only behind the explicit flag, since the loop expects a person to vouch
    for boxes before they retrain the model.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise ValidationError(f"export directory {out_dir} is not empty")
    train, test = (list(split_lists[0]), list(split_lists[1]))
    if set(train) & set(test):
        raise ValidationError("train and test splits overlap")

    label_index = {label: i for i, label in enumerate(class_map)}
    if len(label_index) != len(class_map):
        raise ValidationError(f"class map has duplicates: {list(class_map)}")

    basenames: dict[str, str] = {}
    for rel in train + test:
        name = Path(rel).name
        if name in basenames:
            raise ValidationError(
                f"basename collision between {basenames[name]!r} and {rel!r}"
            )
        basenames[name] = rel

    wanted_sources = (
        (SOURCE_HUMAN, SOURCE_MODEL) if include_model_labels else (SOURCE_HUMAN,)
    )

    written: list[Path] = []
    for side, rels in (("train", train), ("test", test)):
        img_dir = out_dir / "images" / side
        lbl_dir = out_dir / "labels" / side
        img_dir.mkdir(parents=True, exist_ok=True)
        lbl_dir.mkdir(parents=True, exist_ok=True)
        for rel in rels:
            doc = docs.get(rel)
            if doc is None:
                raise ValidationError(f"no document for split entry {rel!r}")
            if doc.root is None:
                raise ValidationError(f"document for {rel!r} has no root directory")
            src = doc.root / doc.image_path
            dst = img_dir / Path(rel).name
            shutil.copyfile(src, dst)
            written.append(dst)

            lines = []
            for s in doc.shapes:
                if s.source not in wanted_sources:
                    continue
                if s.label not in label_index:
                    raise MappingError(
                        f"label {s.label!r} on image {rel!r} missing from class map"
                    )
                lines.append(
                    format_label_line(
                        label_index[s.label], s.bbox, doc.image_width, doc.image_height
                    )
                )
            # Empty label files are written on purpose: negatives inform
            # training and the trainer expects one file per image.
            lbl = lbl_dir / (Path(rel).stem + ".txt")
            lbl.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
            written.append(lbl)

    names_path = out_dir / "classes.names"
    names_path.write_text("".join(c + "\n" for c in class_map), encoding="utf-8")
    written.append(names_path)

    yaml_path = out_dir / "dataset.yaml"
    yaml_path.write_text(
        yaml.safe_dump(
            {
                "train": "images/train",
                "val": "images/test",
                "nc": len(class_map),
                "names": list(class_map),
            },
            sort_keys=False,
        ),
        encoding="utf-8",
    )
    written.append(yaml_path)

    manifest = {
        p.relative_to(out_dir).as_posix(): _sha256_file(p) for p in written
    }
    snapshot_id = hashlib.sha256(
        json.dumps(manifest, sort_keys=True).encode("utf-8")
    ).hexdigest()

    snapshot_doc = {
        "snapshot_id": snapshot_id,
        "seed": seed,
        "test_fraction": test_fraction,
        "class_map": list(class_map),
        "train_images": train,
        "test_images": test,
        "files": manifest,
    }
    (out_dir / "snapshot.json").write_text(
        json.dumps(snapshot_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    return DatasetSnapshot(
        snapshot_id=snapshot_id,
        class_map=list(class_map),
        train_images=train,
        test_images=test,
        root=out_dir,
    )
