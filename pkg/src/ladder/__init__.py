"""Human-in-the-loop object detection labeling engine.

Model-assisted pre-labeling, sidecar annotation persistence, YOLO dataset
export, detection evaluation, and a retraining loop orchestrated over a
pluggable bridge process.
"""

from .annotations import (
    AddShape,
    AnnotationDoc,
    DeleteShape,
    MoveShape,
    RelabelShape,
    ResizeShape,
    Shape,
    SOURCE_HUMAN,
    SOURCE_MODEL,
    apply_edit,
    detections_to_shapes,
    label_census,
    load_doc,
    merge_predictions,
    save_doc,
)
from .dataset import DatasetSnapshot, build_class_map, export_yolo, split
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    MatchResult,
    PRCurve,
    auc,
    confusion_matrix,
    match,
    pr_curve,
    report,
)
from .geometry import BBox, NormalizedBox, area, clamp, denormalize, from_anchor_points, iou, normalize
from .postprocess import Detection, PostprocessConfig, filter_by_confidence, nms
from .service import Engine, LoopEvent, ModelVersion, ProjectSettings

__version__ = "0.1.0"

__all__ = [
    "AddShape",
    "AnnotationDoc",
    "BBox",
    "ConfusionMatrix",
    "DatasetSnapshot",
    "DeleteShape",
    "Detection",
    "Engine",
    "EvalReport",
    "LoopEvent",
    "MatchResult",
    "ModelVersion",
    "MoveShape",
    "NormalizedBox",
    "PRCurve",
    "PostprocessConfig",
    "ProjectSettings",
    "RelabelShape",
    "ResizeShape",
    "SOURCE_HUMAN",
    "SOURCE_MODEL",
    "Shape",
    "apply_edit",
    "area",
    "auc",
    "build_class_map",
    "clamp",
    "confusion_matrix",
    "denormalize",
    "detections_to_shapes",
    "export_yolo",
    "filter_by_confidence",
    "from_anchor_points",
    "iou",
    "label_census",
    "load_doc",
    "match",
    "merge_predictions",
    "nms",
    "normalize",
    "pr_curve",
    "report",
    "save_doc",
    "split",
]
