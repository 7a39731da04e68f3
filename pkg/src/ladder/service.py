"""The recurrent labeling loop as a service: projects, model registry,
bridge-backed detection and retraining, dataset export, and evaluation.

Every state transition appends a loop event to the project's append-only
``events.jsonl``; the model registry is derived state and can be rebuilt by
folding that log (see :func:`fold_registry`).
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import bridge as bridge_proto
from .annotations import (
    AnnotationDoc,
    Edit,
    SOURCE_HUMAN,
    SOURCE_MODEL,
    apply_edit,
    doc_token,
    load_doc,
    merge_predictions,
    save_doc,
)
from .dataset import DatasetSnapshot, build_class_map, export_yolo, split
from .errors import (
    ConflictError,
    LadderError,
    MappingError,
    NotFoundError,
    PreconditionError,
    ValidationError,
)
from .evaluation import EvalReport, report, write_report
from .postprocess import PostprocessConfig, filter_by_confidence, nms

IMAGE_EXTS = {".jpg", ".jpeg", ".png"}

EVENT_IMPORTED = "imported"
EVENT_DETECTED = "detected"
EVENT_COMMITTED = "committed"
EVENT_EXPORTED = "exported"
EVENT_TRAINED = "trained"
EVENT_EVALUATED = "evaluated"

STATUS_TRAINING = "training"
STATUS_READY = "ready"
STATUS_FAILED = "failed"

_PROJECT_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass
class ProjectSettings:
    """Per-project knobs: label set, operating point, split, export policy."""

    class_names: list[str] = field(default_factory=list)
    conf_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    class_agnostic: bool = False
    match_iou: float = 0.5
    split_seed: int = 0
    test_fraction: float = 0.5
    include_model_labels: bool = False

    def postprocess_config(self) -> PostprocessConfig:
        return PostprocessConfig(
            conf_threshold=self.conf_threshold,
            nms_iou_threshold=self.nms_iou_threshold,
            class_agnostic=self.class_agnostic,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict | None) -> "ProjectSettings":
        data = data or {}
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class ModelVersion:
    """Registry entry tying a weight artifact to its training snapshot."""

    version_id: int
    weights_uri: str
    status: str
    parent_version: int | None = None
    snapshot_id: str | None = None
    epochs: int | None = None
    diagnostics: str | None = None
    eval_report_path: str | None = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LoopEvent:
    """Append-only audit record of one trip around the loop."""

    seq: int
    timestamp: float
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }


def fold_registry(events: Iterable[LoopEvent]) -> dict[int, ModelVersion]:
    """Rebuild the model registry from the event log alone.

    Versions enter the log at a terminal status (imported, or trained with
    ready/failed); an in-flight training version exists only in memory.
    """
    versions: dict[int, ModelVersion] = {}
    for e in events:
        p = e.payload
        if e.kind == EVENT_IMPORTED:
            versions[p["version_id"]] = ModelVersion(
                version_id=p["version_id"],
                weights_uri=p["weights_uri"],
                status=STATUS_READY,
            )
        elif e.kind == EVENT_TRAINED:
            versions[p["version_id"]] = ModelVersion(
                version_id=p["version_id"],
                weights_uri=p.get("weights_uri", ""),
                status=p["status"],
                parent_version=p.get("parent_version"),
                snapshot_id=p.get("snapshot_id"),
                epochs=p.get("epochs"),
                diagnostics=p.get("diagnostics"),
            )
        elif e.kind == EVENT_EVALUATED:
            v = versions.get(p["version_id"])
            if v is not None:
                v.eval_report_path = p.get("report_path")
    return versions


class ProjectState:
    """Runtime state of one project; persisted as project.json + events.jsonl."""

    def __init__(
        self,
        project_id: str,
        image_root: Path,
        settings: ProjectSettings,
        class_map: list[str],
        directory: Path,
    ):
        self.project_id = project_id
        self.image_root = image_root
        self.settings = settings
        self.class_map = class_map
        self.dir = directory
        self.versions: dict[int, ModelVersion] = {}
        self.events: list[LoopEvent] = []
        self.lock = threading.RLock()
        self.training_thread: threading.Thread | None = None

    @property
    def events_path(self) -> Path:
        return self.dir / "events.jsonl"

    def to_json(self) -> dict:
        return {
            "project_id": self.project_id,
            "image_root": str(self.image_root),
            "settings": self.settings.to_json(),
            "class_map": list(self.class_map),
        }


def scan_images(image_root: Path) -> list[str]:
    """Recursively enumerate jpg/jpeg/png (case-insensitive), path-sorted."""
    return sorted(
        p.relative_to(image_root).as_posix()
        for p in image_root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_EXTS
    )


class Engine:
    """Facade over every loop operation; one instance per data root."""

    def __init__(
        self,
        root: Path | str,
        bridge: Sequence[str] | None = None,
        bridge_timeout: float = bridge_proto.DEFAULT_TIMEOUT,
    ):
        self.root = Path(root)
        self.projects_dir = self.root / "projects"
        self.projects_dir.mkdir(parents=True, exist_ok=True)
        self.bridge = list(bridge) if bridge else None
        self.bridge_timeout = bridge_timeout
        self._projects: dict[str, ProjectState] = {}
        self._lock = threading.Lock()
        self._load_existing()

    # -- persistence -------------------------------------------------------

    def _load_existing(self) -> None:
        for pj in sorted(self.projects_dir.glob("*/project.json")):
            data = json.loads(pj.read_text(encoding="utf-8"))
            state = ProjectState(
                project_id=data["project_id"],
                image_root=Path(data["image_root"]),
                settings=ProjectSettings.from_json(data.get("settings")),
                class_map=list(data.get("class_map", [])),
                directory=pj.parent,
            )
            if state.events_path.exists():
                for line in state.events_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    raw = json.loads(line)
                    state.events.append(
                        LoopEvent(raw["seq"], raw["timestamp"], raw["kind"], raw["payload"])
                    )
            state.versions = fold_registry(state.events)
            self._projects[state.project_id] = state

    def _persist_project(self, state: ProjectState) -> None:
        state.dir.mkdir(parents=True, exist_ok=True)
        (state.dir / "project.json").write_text(
            json.dumps(state.to_json(), indent=2) + "\n", encoding="utf-8"
        )

    def _append_event(self, state: ProjectState, kind: str, payload: dict) -> LoopEvent:
        event = LoopEvent(len(state.events) + 1, time.time(), kind, payload)
        state.events.append(event)
        with open(state.events_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event.to_json()) + "\n")
        return event

    # -- projects ----------------------------------------------------------

    def create_project(
        self,
        image_root: Path | str,
        settings: ProjectSettings | None = None,
        project_id: str | None = None,
    ) -> ProjectState:
        image_root = Path(image_root).resolve()
        if not image_root.is_dir():
            raise ValidationError(f"image root {image_root} is not a directory")
        images = scan_images(image_root)
        if not images:
            raise ValidationError(f"image root {image_root} contains no images")
        decodable = False
        from .annotations import image_size

        for rel in images:
            try:
                image_size(image_root / rel)
                decodable = True
                break
            except LadderError:
                continue
        if not decodable:
            raise ValidationError(f"image root {image_root} has no decodable image")

        pid = project_id or uuid.uuid4().hex[:8]
        if not _PROJECT_ID_RE.match(pid):
            raise ValidationError(f"invalid project id {pid!r}")
        with self._lock:
            if pid in self._projects or (self.projects_dir / pid).exists():
                raise ValidationError(f"project {pid!r} already exists")
            settings = settings or ProjectSettings()
            state = ProjectState(
                project_id=pid,
                image_root=image_root,
                settings=settings,
                class_map=list(settings.class_names),
                directory=self.projects_dir / pid,
            )
            self._persist_project(state)
            state.events_path.touch()
            self._projects[pid] = state
        return state

    def get_project(self, project_id: str) -> ProjectState:
        state = self._projects.get(project_id)
        if state is None:
            raise NotFoundError(f"no project {project_id!r}")
        return state

    def list_projects(self) -> list[str]:
        return sorted(self._projects)

    def list_images(self, project_id: str) -> list[str]:
        return scan_images(self.get_project(project_id).image_root)

    def events(self, project_id: str) -> list[LoopEvent]:
        return list(self.get_project(project_id).events)

    def replay_registry(self, project_id: str) -> dict[int, ModelVersion]:
        """Fold the on-disk event log from scratch (event-sourcing check)."""
        state = self.get_project(project_id)
        events = []
        for line in state.events_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                raw = json.loads(line)
                events.append(
                    LoopEvent(raw["seq"], raw["timestamp"], raw["kind"], raw["payload"])
                )
        return fold_registry(events)

    # -- annotations ---------------------------------------------------------

    def _image_path(self, state: ProjectState, rel: str) -> Path:
        path = state.image_root / rel
        if not path.is_file():
            raise NotFoundError(f"no image {rel!r} in project {state.project_id!r}")
        return path

    def get_annotations(self, project_id: str, rel: str) -> tuple[AnnotationDoc, str]:
        state = self.get_project(project_id)
        doc = load_doc(self._image_path(state, rel))
        return doc, doc_token(doc)

    def _absorb_labels(self, state: ProjectState, doc: AnnotationDoc) -> None:
        grew = False
        for s in doc.shapes:
            if s.label not in state.class_map:
                state.class_map.append(s.label)
                grew = True
        if grew:
            self._persist_project(state)

    def commit_annotations(
        self, project_id: str, rel: str, edits: Sequence[Edit], token: str
    ) -> tuple[AnnotationDoc, str]:
        """Apply edits under optimistic concurrency and persist atomically."""
        state = self.get_project(project_id)
        with state.lock:
            path = self._image_path(state, rel)
            current = load_doc(path)
            current_token = doc_token(current)
            if token != current_token:
                raise ConflictError(
                    f"stale token for {rel!r}", doc=current, token=current_token
                )
            doc = current
            for e in edits:
                doc = apply_edit(doc, e)
            self._absorb_labels(state, doc)
            save_doc(doc, path)
            self._append_event(
                state, EVENT_COMMITTED, {"image": rel, "edit_count": len(edits)}
            )
            return doc, doc_token(doc)

    # -- registry ------------------------------------------------------------

    def _next_version_id(self, state: ProjectState) -> int:
        return max(state.versions, default=0) + 1

    def _resolve_version(
        self, state: ProjectState, version_id: int | None
    ) -> ModelVersion:
        if version_id is None:
            ready = [v for v in state.versions.values() if v.status == STATUS_READY]
            if not ready:
                raise PreconditionError("project has no ready model version")
            return max(ready, key=lambda v: v.version_id)
        version = state.versions.get(version_id)
        if version is None:
            raise NotFoundError(f"no model version {version_id}")
        if version.status != STATUS_READY:
            raise PreconditionError(
                f"model version {version_id} is {version.status}, not ready"
            )
        return version

    def import_base_model(self, project_id: str, weights_uri: Path | str) -> ModelVersion:
        """Register the pre-trained root model (one per project)."""
        state = self.get_project(project_id)
        weights = Path(weights_uri)
        if not weights.exists():
            raise FileNotFoundError(f"weights file {weights} does not exist")
        with state.lock:
            if state.versions:
                raise ValidationError(
                    "project already has a root model; one root per project"
                )
            bridge_proto.run_verify(weights, self.bridge, self.bridge_timeout)
            vid = self._next_version_id(state)
            version = ModelVersion(vid, str(weights), STATUS_READY)
            state.versions[vid] = version
            self._append_event(
                state, EVENT_IMPORTED, {"version_id": vid, "weights_uri": str(weights)}
            )
            return version

    def get_models(self, project_id: str) -> list[ModelVersion]:
        state = self.get_project(project_id)
        with state.lock:
            return [state.versions[k] for k in sorted(state.versions)]

    # -- loop operations -------------------------------------------------------

    def detect(
        self,
        project_id: str,
        images: Sequence[str] | None = None,
        version_id: int | None = None,
        conf: float | None = None,
        iou: float | None = None,
    ) -> dict:
        """Pre-label images with the model and merge proposals into their docs.

        Per-image failures (undecodable image, unmappable class) are reported
        per image; the remaining images are still processed.
        """
        state = self.get_project(project_id)
        with state.lock:
            version = self._resolve_version(state, version_id)
        settings = state.settings
        cfg = PostprocessConfig(
            conf_threshold=settings.conf_threshold if conf is None else conf,
            nms_iou_threshold=settings.nms_iou_threshold if iou is None else iou,
            class_agnostic=settings.class_agnostic,
        )
        rels = list(images) if images is not None else self.list_images(project_id)
        errors: dict[str, str] = {}
        readable: list[str] = []
        for rel in rels:
            try:
                load_doc(self._image_path(state, rel))
                readable.append(rel)
            except LadderError as e:
                errors[rel] = str(e)
        counts: dict[str, int] = {}
        if readable:
            abs_by_rel = {rel: str(state.image_root / rel) for rel in readable}
            results = bridge_proto.run_detect(
                version.weights_uri,
                [abs_by_rel[rel] for rel in readable],
                cfg.conf_threshold,
                cfg.nms_iou_threshold,
                self.bridge,
                self.bridge_timeout,
            )
            with state.lock:
                for rel in readable:
                    dets = results.get(abs_by_rel[rel], [])
                    proposals = nms(filter_by_confidence(dets, cfg), cfg)
                    try:
                        doc = load_doc(self._image_path(state, rel))
                        merged = merge_predictions(doc, proposals, state.class_map)
                        save_doc(merged)
                    except (MappingError, LadderError) as e:
                        errors[rel] = str(e)
                        continue
                    counts[rel] = len(proposals)
                self._append_event(
                    state,
                    EVENT_DETECTED,
                    {
                        "version_id": version.version_id,
                        "images": sorted(counts),
                        "counts": counts,
                    },
                )
        return {"version_id": version.version_id, "counts": counts, "errors": errors}

    def _load_corpus(self, state: ProjectState) -> dict[str, AnnotationDoc]:
        return {
            rel: load_doc(state.image_root / rel)
            for rel in scan_images(state.image_root)
        }

    def export_dataset(
        self,
        project_id: str,
        out_dir: Path | str | None = None,
        include_model_labels: bool | None = None,
    ) -> DatasetSnapshot:
        """Snapshot the corpus into the YOLO layout and log the export."""
        state = self.get_project(project_id)
        with state.lock:
            docs = self._load_corpus(state)
            class_map = build_class_map(docs.values(), pinned=state.class_map)
            if class_map != state.class_map:
                state.class_map = class_map
                self._persist_project(state)
            settings = state.settings
            train, test = split(docs.keys(), settings.test_fraction, settings.split_seed)
            if out_dir is None:
                prior = sum(1 for e in state.events if e.kind == EVENT_EXPORTED)
                out_dir = state.dir / "exports" / f"snap-{prior + 1:04d}"
            include = (
                settings.include_model_labels
                if include_model_labels is None
                else include_model_labels
            )
            snapshot = export_yolo(
                docs,
                class_map,
                (train, test),
                out_dir,
                include_model_labels=include,
                seed=settings.split_seed,
                test_fraction=settings.test_fraction,
            )
            self._append_event(
                state,
                EVENT_EXPORTED,
                {
                    "snapshot_id": snapshot.snapshot_id,
                    "out_dir": str(snapshot.root),
                    "seed": settings.split_seed,
                    "test_fraction": settings.test_fraction,
                },
            )
            return snapshot

    def retrain(
        self,
        project_id: str,
        base_version: int | None = None,
        epochs: int = 1,
        wait: bool = False,
    ) -> ModelVersion:
        """Export a snapshot and train a new version asynchronously.

        One training job per project at a time; the new version sits in
        status "training" until the bridge finishes, then flips to ready or
        failed. Pass ``wait=True`` to block until terminal.
        """
        state = self.get_project(project_id)
        with state.lock:
            if state.training_thread is not None and state.training_thread.is_alive():
                raise PreconditionError("a training job is already in flight")
            base = self._resolve_version(state, base_version)
            docs = self._load_corpus(state)
            wanted = (
                (SOURCE_HUMAN, SOURCE_MODEL)
                if state.settings.include_model_labels
                else (SOURCE_HUMAN,)
            )
            if not any(
                s.source in wanted for doc in docs.values() for s in doc.shapes
            ):
                raise ValidationError("no exportable labeled shapes to train on")
            snapshot = self.export_dataset(project_id)
            vid = self._next_version_id(state)
            suffix = Path(base.weights_uri).suffix or ".bin"
            out_weights = state.dir / "models" / f"v{vid}" / f"weights{suffix}"
            version = ModelVersion(
                version_id=vid,
                weights_uri="",
                status=STATUS_TRAINING,
                parent_version=base.version_id,
                snapshot_id=snapshot.snapshot_id,
                epochs=epochs,
            )
            state.versions[vid] = version
            thread = threading.Thread(
                target=self._train_job,
                args=(state, version, snapshot, base, out_weights, epochs),
                daemon=True,
            )
            state.training_thread = thread
            thread.start()
        if wait:
            thread.join(timeout=self.bridge_timeout)
        return version

    def _train_job(
        self,
        state: ProjectState,
        version: ModelVersion,
        snapshot: DatasetSnapshot,
        base: ModelVersion,
        out_weights: Path,
        epochs: int,
    ) -> None:
        try:
            bridge_proto.run_train(
                snapshot.root / "dataset.yaml",
                base.weights_uri,
                out_weights,
                epochs,
                self.bridge,
                self.bridge_timeout,
            )
            status, weights_uri, diagnostics = STATUS_READY, str(out_weights), None
        except Exception as e:  # failed versions are kept, not deleted
            status, weights_uri, diagnostics = STATUS_FAILED, "", str(e)
        with state.lock:
            version.status = status
            version.weights_uri = weights_uri
            version.diagnostics = diagnostics
            self._append_event(
                state,
                EVENT_TRAINED,
                {
                    "version_id": version.version_id,
                    "parent_version": version.parent_version,
                    "snapshot_id": version.snapshot_id,
                    "weights_uri": weights_uri,
                    "status": status,
                    "epochs": epochs,
                    "diagnostics": diagnostics,
                },
            )
            state.training_thread = None

    def wait_for_training(self, project_id: str, timeout: float | None = None) -> None:
        state = self.get_project(project_id)
        thread = state.training_thread
        if thread is not None:
            thread.join(timeout=timeout)

    def evaluate(
        self,
        project_id: str,
        version_id: int | None = None,
        match_iou: float | None = None,
    ) -> EvalReport:
        """Detect on the test split and score against its ground truth.

        Annotation documents are read, never written: measurement must not
        contaminate the store the way pre-labeling deliberately does.
        """
        state = self.get_project(project_id)
        with state.lock:
            version = self._resolve_version(state, version_id)
        settings = state.settings
        rels = self.list_images(project_id)
        _, test = split(rels, settings.test_fraction, settings.split_seed)
        if not test:
            raise ValidationError("test split is empty")
        docs = {rel: load_doc(state.image_root / rel) for rel in test}
        if not any(
            s.source == SOURCE_HUMAN for doc in docs.values() for s in doc.shapes
        ):
            raise ValidationError("test split has no ground truth")
        abs_by_rel = {rel: str(state.image_root / rel) for rel in test}
        results = bridge_proto.run_detect(
            version.weights_uri,
            [abs_by_rel[rel] for rel in test],
            0.0,  # keep every score so PR curves can sweep below the operating point
            settings.nms_iou_threshold,
            self.bridge,
            self.bridge_timeout,
        )
        items = [(docs[rel], results.get(abs_by_rel[rel], [])) for rel in test]
        rep = report(
            items,
            cfg=settings.postprocess_config(),
            match_iou=settings.match_iou if match_iou is None else match_iou,
            classes=state.class_map,
            snapshot_id=version.snapshot_id,
        )
        out_dir = state.dir / "eval" / f"v{version.version_id}"
        report_path = write_report(rep, out_dir)
        with state.lock:
            version.eval_report_path = str(report_path)
            self._append_event(
                state,
                EVENT_EVALUATED,
                {
                    "version_id": version.version_id,
                    "report_path": str(report_path),
                    "match_iou": settings.match_iou if match_iou is None else match_iou,
                },
            )
        return rep

    def get_evaluation(self, project_id: str, version_id: int) -> dict:
        state = self.get_project(project_id)
        version = state.versions.get(version_id)
        if version is None:
            raise NotFoundError(f"no model version {version_id}")
        if not version.eval_report_path:
            raise NotFoundError(f"version {version_id} has no evaluation")
        return json.loads(Path(version.eval_report_path).read_text(encoding="utf-8"))
