"""HTTP face of the engine; bodies reuse the sidecar and report JSON schemas."""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .annotations import doc_to_json, edit_from_json
from .errors import (
    BridgeError,
    ConflictError,
    LadderError,
    MappingError,
    NotFoundError,
    PreconditionError,
    ShapeNotFoundError,
    ValidationError,
)
from .service import Engine, ProjectSettings


class CreateProjectBody(BaseModel):
    image_root: str
    project_id: str | None = None
    settings: dict[str, Any] | None = None


class PutAnnotationsBody(BaseModel):
    token: str
    edits: list[dict[str, Any]]


class DetectBody(BaseModel):
    images: list[str] | None = None
    version_id: int | None = None
    conf: float | None = None
    iou: float | None = None


class TrainBody(BaseModel):
    base_version: int | None = None
    epochs: int = 1
    wait: bool = False


class ImportModelBody(BaseModel):
    weights_uri: str


def _status_for(exc: LadderError) -> int:
    if isinstance(exc, (NotFoundError, ShapeNotFoundError)):
        return 404
    if isinstance(exc, (ConflictError, PreconditionError)):
        return 409
    if isinstance(exc, BridgeError):
        return 502
    return 400


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="ladder", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(LadderError)
    async def _ladder_error(request: Request, exc: LadderError):
        body: dict[str, Any] = {"detail": str(exc), "error": type(exc).__name__}
        if isinstance(exc, ConflictError) and exc.doc is not None:
            body["doc"] = doc_to_json(exc.doc)
            body["token"] = exc.token
        if isinstance(exc, ValidationError) and exc.shape_ids:
            body["shape_ids"] = exc.shape_ids
        return JSONResponse(status_code=_status_for(exc), content=body)

    @app.exception_handler(OSError)
    async def _os_error(request: Request, exc: OSError):
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "error": "io-error"}
        )

    def _project_json(state) -> dict:
        return {
            **state.to_json(),
            "models": [v.to_json() for v in engine.get_models(state.project_id)],
        }

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody):
        settings = ProjectSettings.from_json(body.settings)
        state = engine.create_project(
            Path(body.image_root), settings, body.project_id
        )
        return _project_json(state)

    @app.get("/projects")
    def list_projects():
        return {"projects": engine.list_projects()}

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        return _project_json(engine.get_project(project_id))

    @app.get("/projects/{project_id}/images")
    def list_images(project_id: str):
        return {"images": engine.list_images(project_id)}

    @app.get("/projects/{project_id}/images/{name:path}/file")
    def get_image_file(project_id: str, name: str):
        state = engine.get_project(project_id)
        path = (state.image_root / name).resolve()
        if not path.is_relative_to(state.image_root.resolve()) or not path.is_file():
            raise NotFoundError(f"no image {name!r}")
        return FileResponse(path)

    @app.get("/projects/{project_id}/images/{name:path}/annotations")
    def get_annotations(project_id: str, name: str):
        doc, token = engine.get_annotations(project_id, name)
        return {"doc": doc_to_json(doc), "token": token}

    @app.put("/projects/{project_id}/images/{name:path}/annotations")
    def put_annotations(project_id: str, name: str, body: PutAnnotationsBody):
        edits = [edit_from_json(e) for e in body.edits]
        doc, token = engine.commit_annotations(project_id, name, edits, body.token)
        return {"doc": doc_to_json(doc), "token": token}

    @app.post("/projects/{project_id}/detect")
    def detect(project_id: str, body: DetectBody):
        return engine.detect(
            project_id,
            images=body.images,
            version_id=body.version_id,
            conf=body.conf,
            iou=body.iou,
        )

    @app.post("/projects/{project_id}/train", status_code=202)
    def train(project_id: str, body: TrainBody):
        version = engine.retrain(
            project_id,
            base_version=body.base_version,
            epochs=body.epochs,
            wait=body.wait,
        )
        return version.to_json()

    @app.post("/projects/{project_id}/models", status_code=201)
    def import_model(project_id: str, body: ImportModelBody):
        return engine.import_base_model(project_id, body.weights_uri).to_json()

    @app.get("/projects/{project_id}/models")
    def get_models(project_id: str):
        return {"models": [v.to_json() for v in engine.get_models(project_id)]}

    @app.get("/projects/{project_id}/models/{version_id}/evaluation")
    def get_evaluation(project_id: str, version_id: int):
        return engine.get_evaluation(project_id, version_id)

    @app.post("/projects/{project_id}/models/{version_id}/evaluate")
    def evaluate(project_id: str, version_id: int, match_iou: float | None = None):
        rep = engine.evaluate(project_id, version_id, match_iou=match_iou)
        return rep.to_json()

    @app.get("/projects/{project_id}/export")
    def export(project_id: str, include_model_labels: bool | None = None):
        snapshot = engine.export_dataset(
            project_id, include_model_labels=include_model_labels
        )
        return {
            "snapshot_id": snapshot.snapshot_id,
            "class_map": snapshot.class_map,
            "train_images": snapshot.train_images,
            "test_images": snapshot.test_images,
            "root": str(snapshot.root),
        }

    @app.get("/projects/{project_id}/events")
    def get_events(project_id: str):
        return {"events": [e.to_json() for e in engine.events(project_id)]}

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    return app
