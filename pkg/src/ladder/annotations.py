"""Per-image annotation documents: sidecar JSON persistence and provenance-aware edits.

Every image may carry a `<basename>.json` sidecar holding its labeled
rectangles. Shapes record whether a human drew (or vouched for) them or a
model proposed them; any human edit of a model shape flips its provenance.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from PIL import Image, UnidentifiedImageError

from .errors import (
    DimensionMismatchError,
    ImageError,
    MappingError,
    ShapeNotFoundError,
    SidecarParseError,
    ValidationError,
)
from .geometry import BBox, area, clamp, from_anchor_points
from .postprocess import Detection

FORMAT_VERSION = "1"
SOURCE_HUMAN = "human"
SOURCE_MODEL = "model"

_SHAPE_KEYS = {"id", "label", "shape_type", "points", "source", "confidence"}
_DOC_KEYS = {"format_version", "imagePath", "imageWidth", "imageHeight", "shapes"}


def new_shape_id() -> str:
    return uuid.uuid4().hex[:12]


@dataclass
class Shape:
    """A labeled rectangle with provenance.

    ``confidence`` is present exactly when ``source == "model"``; the moment a
    human touches the shape it becomes a human shape and the score is dropped.
    """

    shape_id: str
    label: str
    bbox: BBox
    source: str = SOURCE_HUMAN
    confidence: float | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class AnnotationDoc:
    """All annotations for one image, sized to that image's true pixels."""

    image_path: str
    image_width: int
    image_height: int
    shapes: list[Shape] = field(default_factory=list)
    format_version: str = FORMAT_VERSION
    extra: dict = field(default_factory=dict)
    # Directory holding the image and its sidecar; not serialized.
    root: Path | None = field(default=None, compare=False, repr=False)


# --- wire form -------------------------------------------------------------


def shape_to_json(s: Shape) -> dict:
    d: dict = {
        "id": s.shape_id,
        "label": s.label,
        "shape_type": "rectangle",
        "points": s.bbox.as_points(),
        "source": s.source,
    }
    if s.confidence is not None:
        d["confidence"] = s.confidence
    d.update(s.extra)
    return d


def shape_from_json(d: Mapping) -> Shape:
    if d.get("shape_type", "rectangle") != "rectangle":
        raise ValidationError(f"unsupported shape_type {d.get('shape_type')!r}")
    points = d.get("points")
    if not isinstance(points, list) or len(points) != 2:
        raise ValidationError(f"shape {d.get('id')!r} needs exactly two corner points")
    bbox = from_anchor_points(points[0], points[1])
    source = d.get("source", SOURCE_HUMAN)
    confidence = d.get("confidence")
    return Shape(
        shape_id=str(d.get("id") or new_shape_id()),
        label=str(d.get("label", "")),
        bbox=bbox,
        source=source,
        confidence=float(confidence) if confidence is not None else None,
        extra={k: v for k, v in d.items() if k not in _SHAPE_KEYS},
    )


def doc_to_json(doc: AnnotationDoc) -> dict:
    d: dict = {
        "format_version": doc.format_version,
        "imagePath": doc.image_path,
        "imageWidth": doc.image_width,
        "imageHeight": doc.image_height,
        "shapes": [shape_to_json(s) for s in doc.shapes],
    }
    d.update(doc.extra)
    return d


def doc_from_json(data: Mapping) -> AnnotationDoc:
    for key in ("imagePath", "imageWidth", "imageHeight"):
        if key not in data:
            raise ValidationError(f"sidecar missing required key {key!r}")
    shapes_raw = data.get("shapes", [])
    if not isinstance(shapes_raw, list):
        raise ValidationError("sidecar 'shapes' must be a list")
    return AnnotationDoc(
        image_path=str(data["imagePath"]),
        image_width=int(data["imageWidth"]),
        image_height=int(data["imageHeight"]),
        shapes=[shape_from_json(s) for s in shapes_raw],
        format_version=str(data.get("format_version", FORMAT_VERSION)),
        extra={k: v for k, v in data.items() if k not in _DOC_KEYS},
    )


def doc_token(doc: AnnotationDoc) -> str:
    """Content hash used as the optimistic-concurrency token."""
    payload = json.dumps(doc_to_json(doc), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# --- validation -------------------------------------------------------------


def validate_doc(doc: AnnotationDoc) -> None:
    """Commit-time invariants; raises ValidationError listing offending shapes."""
    bad: list[str] = []
    reasons: list[str] = []
    seen: set[str] = set()
    for s in doc.shapes:
        if s.shape_id in seen:
            bad.append(s.shape_id)
            reasons.append(f"duplicate shape id {s.shape_id!r}")
        seen.add(s.shape_id)
        if not s.label.strip():
            bad.append(s.shape_id)
            reasons.append(f"shape {s.shape_id!r} has an empty label")
        if s.source not in (SOURCE_HUMAN, SOURCE_MODEL):
            bad.append(s.shape_id)
            reasons.append(f"shape {s.shape_id!r} has unknown source {s.source!r}")
        if s.source == SOURCE_HUMAN and s.confidence is not None:
            bad.append(s.shape_id)
            reasons.append(f"human shape {s.shape_id!r} carries a confidence")
        if s.source == SOURCE_MODEL and (
            s.confidence is None or not 0.0 <= s.confidence <= 1.0
        ):
            bad.append(s.shape_id)
            reasons.append(f"model shape {s.shape_id!r} needs confidence in [0, 1]")
        if area(s.bbox) <= 0:
            bad.append(s.shape_id)
            reasons.append(f"shape {s.shape_id!r} has zero area")
    if bad:
        raise ValidationError("; ".join(reasons), shape_ids=sorted(set(bad)))


def _clamp_shapes(doc: AnnotationDoc) -> AnnotationDoc:
    shapes = [
        replace(s, bbox=clamp(s.bbox, doc.image_width, doc.image_height))
        for s in doc.shapes
    ]
    return replace(doc, shapes=shapes)


# --- persistence ------------------------------------------------------------


def sidecar_path(image_path: Path | str) -> Path:
    return Path(image_path).with_suffix(".json")


def image_size(image_path: Path | str) -> tuple[int, int]:
    try:
        with Image.open(image_path) as im:
            return im.size
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise ImageError(f"cannot read image {image_path}: {e}") from e


def load_doc(image_path: Path | str) -> AnnotationDoc:
    """Load the image's annotations; an empty doc when no sidecar exists."""
    image_path = Path(image_path)
    w, h = image_size(image_path)
    sc = sidecar_path(image_path)
    if not sc.exists():
        return AnnotationDoc(image_path.name, w, h, [], root=image_path.parent)
    text = sc.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SidecarParseError(f"malformed sidecar {sc}: {e}", offset=e.pos) from e
    if not isinstance(data, dict):
        raise SidecarParseError(f"sidecar {sc} is not a JSON object", offset=0)
    doc = doc_from_json(data)
    if (doc.image_width, doc.image_height) != (w, h):
        raise DimensionMismatchError(
            f"sidecar {sc} says {doc.image_width}x{doc.image_height}, "
            f"image is {w}x{h}"
        )
    doc.root = image_path.parent
    return _clamp_shapes(doc)


def save_doc(doc: AnnotationDoc, image_path: Path | str | None = None) -> Path:
    """Atomically write the sidecar next to the image and return its path.

    The document is validated first; a failed save never clobbers an
    existing sidecar (write-temp-then-rename discipline).
    """
    if image_path is not None:
        target = sidecar_path(image_path)
    elif doc.root is not None:
        target = sidecar_path(doc.root / doc.image_path)
    else:
        raise ValidationError("document has no root directory and no explicit path")
    doc = _clamp_shapes(doc)
    validate_doc(doc)
    payload = json.dumps(doc_to_json(doc), indent=2, ensure_ascii=False) + "\n"
    fd, tmp_name = tempfile.mkstemp(
        dir=target.parent, prefix=f".{target.stem}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


# --- edits ------------------------------------------------------------------


@dataclass(frozen=True)
class AddShape:
    shape: Shape


@dataclass(frozen=True)
class MoveShape:
    shape_id: str
    bbox: BBox


@dataclass(frozen=True)
class ResizeShape:
    shape_id: str
    bbox: BBox


@dataclass(frozen=True)
class RelabelShape:
    shape_id: str
    label: str


@dataclass(frozen=True)
class DeleteShape:
    shape_id: str


Edit = Union[AddShape, MoveShape, ResizeShape, RelabelShape, DeleteShape]


def edit_to_json(e: Edit) -> dict:
    if isinstance(e, AddShape):
        return {"op": "add", "shape": shape_to_json(e.shape)}
    if isinstance(e, (MoveShape, ResizeShape)):
        op = "move" if isinstance(e, MoveShape) else "resize"
        return {"op": op, "shape_id": e.shape_id, "points": e.bbox.as_points()}
    if isinstance(e, RelabelShape):
        return {"op": "relabel", "shape_id": e.shape_id, "label": e.label}
    if isinstance(e, DeleteShape):
        return {"op": "delete", "shape_id": e.shape_id}
    raise ValidationError(f"unknown edit {e!r}")


def edit_from_json(d: Mapping) -> Edit:
    op = d.get("op")
    if op == "add":
        return AddShape(shape_from_json(d["shape"]))
    if op in ("move", "resize"):
        bbox = from_anchor_points(d["points"][0], d["points"][1])
        cls = MoveShape if op == "move" else ResizeShape
        return cls(str(d["shape_id"]), bbox)
    if op == "relabel":
        return RelabelShape(str(d["shape_id"]), str(d["label"]))
    if op == "delete":
        return DeleteShape(str(d["shape_id"]))
    raise ValidationError(f"unknown edit op {op!r}")


def _find_shape(doc: AnnotationDoc, shape_id: str) -> int:
    for i, s in enumerate(doc.shapes):
        if s.shape_id == shape_id:
            return i
    raise ShapeNotFoundError(f"no shape with id {shape_id!r}")


def _humanized(s: Shape, **changes) -> Shape:
    # A human touched this shape: provenance flips, model confidence drops.
    return replace(s, source=SOURCE_HUMAN, confidence=None, **changes)


def apply_edit(doc: AnnotationDoc, e: Edit) -> AnnotationDoc:
    """Apply one edit, returning a new document (input untouched).

    Moving, resizing, or relabeling a model shape converts it to a human
    shape. Boxes are clamped to the image bounds.
    """
    shapes = list(doc.shapes)
    if isinstance(e, AddShape):
        s = e.shape
        if not s.label.strip():
            raise ValidationError("added shape needs a non-empty label")
        shape_id = s.shape_id or new_shape_id()
        if any(other.shape_id == shape_id for other in shapes):
            raise ValidationError(f"shape id {shape_id!r} already exists")
        bbox = clamp(s.bbox, doc.image_width, doc.image_height)
        shapes.append(
            Shape(shape_id, s.label, bbox, SOURCE_HUMAN, None, dict(s.extra))
        )
    elif isinstance(e, (MoveShape, ResizeShape)):
        i = _find_shape(doc, e.shape_id)
        bbox = clamp(e.bbox, doc.image_width, doc.image_height)
        shapes[i] = _humanized(shapes[i], bbox=bbox)
    elif isinstance(e, RelabelShape):
        i = _find_shape(doc, e.shape_id)
        if not e.label.strip():
            raise ValidationError("relabel to an empty label")
        shapes[i] = _humanized(shapes[i], label=e.label)
    elif isinstance(e, DeleteShape):
        i = _find_shape(doc, e.shape_id)
        del shapes[i]
    else:
        raise ValidationError(f"unknown edit {e!r}")
    return replace(doc, shapes=shapes)


# --- model pre-labels --------------------------------------------------------


def detections_to_shapes(
    dets: Sequence[Detection], class_names: Sequence[str]
) -> list[Shape]:
    """One model-provenance shape per detection, with fresh ids."""
    shapes = []
    for d in dets:
        shapes.append(
            Shape(
                shape_id=new_shape_id(),
                label=_class_label(d, class_names),
                bbox=d.bbox,
                source=SOURCE_MODEL,
                confidence=d.confidence,
            )
        )
    return shapes


def _class_label(d: Detection, class_names: Sequence[str]) -> str:
    if not 0 <= d.class_index < len(class_names):
        raise MappingError(
            f"class index {d.class_index} outside class map of {len(class_names)}"
        )
    return class_names[d.class_index]


def _stable_model_id(d: Detection, label: str, index: int) -> str:
    # Content-derived id so re-merging the same detections is a no-op.
    b = d.bbox
    key = f"{label}|{b.x1:.4f},{b.y1:.4f},{b.x2:.4f},{b.y2:.4f}|{d.confidence:.6f}"
    return f"model-{index}-{hashlib.sha1(key.encode('utf-8')).hexdigest()[:8]}"


def merge_predictions(
    doc: AnnotationDoc, dets: Sequence[Detection], class_names: Sequence[str]
) -> AnnotationDoc:
    """Replace the document's model shapes with a fresh prediction set.

    Human shapes are never touched; stale model shapes would double-draw on
    re-detection, so they are dropped wholesale.
    """
    human = [s for s in doc.shapes if s.source == SOURCE_HUMAN]
    human_ids = {s.shape_id for s in human}
    model: list[Shape] = []
    for i, d in enumerate(dets):
        label = _class_label(d, class_names)
        shape_id = _stable_model_id(d, label, i)
        if shape_id in human_ids:
            raise ValidationError(f"model shape id {shape_id!r} collides")
        model.append(
            Shape(
                shape_id=shape_id,
                label=label,
                bbox=clamp(d.bbox, doc.image_width, doc.image_height),
                source=SOURCE_MODEL,
                confidence=d.confidence,
            )
        )
    return replace(doc, shapes=human + model)


def label_census(docs: Iterable[AnnotationDoc]) -> dict[str, int]:
    """Exact-string label counts, ordered by descending count then label.

    Labels differing only by case are counted separately on purpose: the
    census is how inconsistent naming gets surfaced instead of merged.
    """
    counts: dict[str, int] = {}
    for doc in docs:
        for s in doc.shapes:
            counts[s.label] = counts.get(s.label, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
