"""Built-in mock bridge: a deterministic, dependency-free stand-in detector.

Implements the full bridge subprocess protocol so the engine (and its
tests) can run the whole predict/edit/retrain loop without any deep
learning runtime. Behavior is driven by the weight file, which is plain
JSON:

    {"kind": "ladder-mock-weights",
     "mode": "none" | "fixed" | "echo" | "replay",
     "classes": ["low", "moderate", "high"],
     "boxes_per_image": 2,        # fixed: deterministic grid boxes per image
     "confidence": 0.9,           # base confidence for fixed boxes
     "detections": {...},         # replay: image basename -> detection list
     "train_sleep": 0.0}          # train: artificial duration in seconds

Modes: "none" predicts nothing; "fixed" lays a deterministic grid of boxes
sized from the image; "echo" re-emits the human shapes of each image's
sidecar at confidence 1.0; "replay" plays back canned detections.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import yaml
from PIL import Image, UnidentifiedImageError

WEIGHTS_KIND = "ladder-mock-weights"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_WEIGHTS = 2
EXIT_BAD_IMAGE = 3
EXIT_BAD_DATASET = 4


def write_mock_weights(path: Path | str, **fields) -> Path:
    """Convenience for tests and demos: write a mock weight file."""
    payload = {"kind": WEIGHTS_KIND, "mode": "none", "classes": []}
    payload.update(fields)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def _load_weights(path: str) -> dict | None:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError):
        return None
    if not isinstance(data, dict) or data.get("kind") != WEIGHTS_KIND:
        return None
    return data


def _fixed_boxes(w: int, h: int, n: int, classes: list[str], base_conf: float):
    """Deterministic non-overlapping grid of n boxes inside a w x h image."""
    if n <= 0 or not classes:
        return []
    k = max(1, math.ceil(math.sqrt(n)))
    cell_w = w / k
    cell_h = h / k
    out = []
    for i in range(n):
        col, row = i % k, i // k
        if row >= k:
            break
        x1 = col * cell_w + 0.2 * cell_w
        y1 = row * cell_h + 0.2 * cell_h
        x2 = col * cell_w + 0.8 * cell_w
        y2 = row * cell_h + 0.8 * cell_h
        out.append(
            {
                "class_index": i % len(classes),
                "bbox": [x1, y1, x2, y2],
                "confidence": max(0.3, base_conf - 0.05 * i),
            }
        )
    return out


def _echo_boxes(image_path: Path, classes: list[str], conf: float):
    sidecar = image_path.with_suffix(".json")
    if not sidecar.exists():
        return []
    try:
        doc = json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return []
    out = []
    for shape in doc.get("shapes", []):
        if shape.get("shape_type", "rectangle") != "rectangle":
            continue
        if shape.get("source", "human") != "human":
            continue
        label = shape.get("label")
        if label not in classes:
            continue
        (x1, y1), (x2, y2) = shape["points"]
        out.append(
            {
                "class_index": classes.index(label),
                "bbox": [min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2)],
                "confidence": conf,
            }
        )
    return out


def _postprocess(dets: list[dict], conf: float, iou_thr: float) -> list[dict]:
    # Same greedy rule the engine uses; re-application there is idempotent.
    from .geometry import BBox, iou as box_iou

    kept: list[dict] = []
    dets = [d for d in dets if d["confidence"] >= conf]
    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i]["confidence"], dets[i]["class_index"], i),
    )
    for i in order:
        d = dets[i]
        db = BBox(*d["bbox"])
        if not any(
            k["class_index"] == d["class_index"]
            and box_iou(BBox(*k["bbox"]), db) >= iou_thr
            for k in kept
        ):
            kept.append(d)
    return kept


def cmd_verify(args) -> int:
    if _load_weights(args.weights) is None:
        print(f"unusable mock weights: {args.weights}", file=sys.stderr)
        return EXIT_BAD_WEIGHTS
    return EXIT_OK


def cmd_detect(args) -> int:
    weights = _load_weights(args.weights)
    if weights is None:
        print(f"unusable mock weights: {args.weights}", file=sys.stderr)
        return EXIT_BAD_WEIGHTS
    try:
        entries = [
            line for line in Path(args.images).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except OSError as e:
        print(f"cannot read image list: {e}", file=sys.stderr)
        return EXIT_FAILURE

    mode = weights.get("mode", "none")
    classes = list(weights.get("classes", []))
    base_conf = float(weights.get("confidence", 0.9 if mode == "fixed" else 1.0))
    replay = weights.get("detections", {})

    lines = []
    for entry in entries:
        path = Path(entry)
        try:
            with Image.open(path) as im:
                w, h = im.size
        except (OSError, UnidentifiedImageError, ValueError):
            print(str(path), file=sys.stderr)
            return EXIT_BAD_IMAGE
        if mode == "fixed":
            dets = _fixed_boxes(
                w, h, int(weights.get("boxes_per_image", 1)), classes, base_conf
            )
        elif mode == "echo":
            dets = _echo_boxes(path, classes, base_conf)
        elif mode == "replay":
            dets = list(replay.get(entry, replay.get(path.name, [])))
        else:
            dets = []
        dets = _postprocess(dets, args.conf, args.iou)
        lines.append(json.dumps({"image": entry, "detections": dets}))

    try:
        Path(args.out).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8"
        )
    except OSError as e:
        print(f"cannot write output: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _check_dataset(data_yaml: Path) -> str | None:
    """Return the first offending path, or None when the layout is sound."""
    if not data_yaml.exists():
        return str(data_yaml)
    try:
        spec = yaml.safe_load(data_yaml.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError):
        return str(data_yaml)
    if not isinstance(spec, dict):
        return str(data_yaml)
    for key in ("train", "val", "nc", "names"):
        if key not in spec:
            return str(data_yaml)
    root = data_yaml.parent
    if not (root / "classes.names").exists():
        return str(root / "classes.names")
    for key in ("train", "val"):
        img_dir = root / spec[key]
        if not img_dir.is_dir():
            return str(img_dir)
        lbl_dir = root / str(spec[key]).replace("images", "labels", 1)
        if not lbl_dir.is_dir():
            return str(lbl_dir)
        for lbl in sorted(lbl_dir.glob("*.txt")):
            for line in lbl.read_text(encoding="utf-8").splitlines():
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 5:
                    return str(lbl)
                try:
                    int(parts[0])
                    [float(p) for p in parts[1:]]
                except ValueError:
                    return str(lbl)
    return None


def cmd_train(args) -> int:
    offending = _check_dataset(Path(args.data))
    if offending is not None:
        print(offending, file=sys.stderr)
        return EXIT_BAD_DATASET
    base = _load_weights(args.base_weights)
    if base is None:
        print(f"unusable mock weights: {args.base_weights}", file=sys.stderr)
        return EXIT_BAD_WEIGHTS
    sleep = float(base.get("train_sleep", 0.0))
    if sleep > 0:
        time.sleep(sleep)
    artifact = dict(base)
    artifact["trained_epochs"] = int(base.get("trained_epochs", 0)) + int(args.epochs)
    artifact["trained_with"] = str(args.data)
    artifact["parent_weights"] = str(args.base_weights)
    try:
        out = Path(args.out_weights)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(artifact, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        print(f"cannot write artifact: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladder-mock-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("detect")
    p.add_argument("--weights", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--conf", type=float, default=0.25)
    p.add_argument("--iou", type=float, default=0.45)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("train")
    p.add_argument("--data", required=True)
    p.add_argument("--base-weights", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
