"""Bridge protocol entry point: verify / detect / train.

Exit codes follow the protocol: 0 ok, 2 bad weights, 3 unreadable image
(named on stderr), 4 malformed dataset (first offending file on stderr),
1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch
from PIL import Image, UnidentifiedImageError
from torchvision.ops import nms as tv_nms

from .data import DatasetLayoutError, validate_layout
from .letterbox import letterbox
from .model import BadWeights, load_weights, save_weights
from .train import train as run_training

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_WEIGHTS = 2
EXIT_BAD_IMAGE = 3
EXIT_BAD_DATASET = 4


def cmd_verify(args) -> int:
    try:
        load_weights(args.weights)
    except BadWeights as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_WEIGHTS
    return EXIT_OK


def _detect_one(model, image_path: Path, conf: float, iou: float) -> list[dict]:
    with Image.open(image_path) as im:
        array, mapping = letterbox(im, model.img_size)
    x = torch.from_numpy(array).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        logits = model(x)[0]
    boxes, scores, cls_idx = model.decode(logits)
    keep = scores >= conf
    boxes, scores, cls_idx = boxes[keep], scores[keep], cls_idx[keep]
    out: list[dict] = []
    # class-wise suppression, then map back to original pixel space
    for c in cls_idx.unique():
        mask = cls_idx == c
        kept = tv_nms(boxes[mask], scores[mask], iou)
        for bi in kept:
            x1, y1, x2, y2 = boxes[mask][bi].tolist()
            ox1, oy1, ox2, oy2 = mapping.to_original(x1, y1, x2, y2)
            if ox2 <= ox1 or oy2 <= oy1:
                continue
            out.append(
                {
                    "class_index": int(c),
                    "bbox": [ox1, oy1, ox2, oy2],
                    "confidence": float(min(max(scores[mask][bi].item(), 0.0), 1.0)),
                }
            )
    out.sort(key=lambda d: -d["confidence"])
    return out


def cmd_detect(args) -> int:
    try:
        model, _ = load_weights(args.weights)
    except BadWeights as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_WEIGHTS
    try:
        entries = [
            line
            for line in Path(args.images).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except OSError as e:
        print(f"cannot read image list: {e}", file=sys.stderr)
        return EXIT_FAILURE

    torch.manual_seed(0)
    lines = []
    for entry in entries:
        path = Path(entry)
        try:
            detections = _detect_one(model, path, args.conf, args.iou)
        except (OSError, UnidentifiedImageError, ValueError):
            print(str(path), file=sys.stderr)
            return EXIT_BAD_IMAGE
        lines.append(json.dumps({"image": entry, "detections": detections}))
    try:
        Path(args.out).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    except OSError as e:
        print(f"cannot write output: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_train(args) -> int:
    data_yaml = Path(args.data)
    try:
        spec = validate_layout(data_yaml)
    except DatasetLayoutError as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_DATASET
    base_model = None
    img_size = 64
    try:
        base_model, _ = load_weights(args.base_weights)
        img_size = base_model.img_size
    except BadWeights as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_WEIGHTS

    classes = [str(n) for n in spec["names"]]
    try:
        model = run_training(data_yaml, base_model, classes, img_size, args.epochs)
    except DatasetLayoutError as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_DATASET
    except Exception as e:
        print(f"training failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        out = Path(args.out_weights)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_weights(out, model, classes)
    except OSError as e:
        print(f"cannot write artifact: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladder-yolo-bridge")
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
