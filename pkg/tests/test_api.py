from __future__ import annotations

import sys

import pytest
from fastapi.testclient import TestClient

from ladder.api import create_app
from ladder.mock_bridge import write_mock_weights
from ladder.service import Engine
from tests.test_orchestrator import build_corpus

BRIDGE = [sys.executable, "-m", "ladder.mock_bridge"]


@pytest.fixture
def client(tmp_path):
    engine = Engine(tmp_path / "data", bridge=BRIDGE)
    build_corpus(tmp_path / "corpus", n=4)
    app = create_app(engine)
    with TestClient(app) as c:
        c.corpus = tmp_path / "corpus"
        c.tmp_path = tmp_path
        yield c


def create_project(client, pid="api"):
    resp = client.post(
        "/projects",
        json={
            "image_root": str(client.corpus),
            "project_id": pid,
            "settings": {"class_names": ["low", "high"], "split_seed": 2},
        },
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


def add_edit(label="low", points=((10, 10), (40, 40))):
    return {
        "op": "add",
        "shape": {
            "id": "",
            "label": label,
            "shape_type": "rectangle",
            "points": [list(points[0]), list(points[1])],
            "source": "human",
        },
    }


class TestProjects:
    def test_create_and_get(self, client):
        body = create_project(client)
        assert body["project_id"] == "api"
        got = client.get("/projects/api").json()
        assert got["class_map"] == ["low", "high"]
        assert client.get("/projects").json()["projects"] == ["api"]

    def test_missing_project_404(self, client):
        assert client.get("/projects/ghost").status_code == 404

    def test_bad_image_root_400(self, client):
        resp = client.post("/projects", json={"image_root": "/definitely/missing"})
        assert resp.status_code == 400

    def test_list_images(self, client):
        create_project(client)
        images = client.get("/projects/api/images").json()["images"]
        assert len(images) == 4

    def test_image_file_served(self, client):
        create_project(client)
        rel = client.get("/projects/api/images").json()["images"][0]
        resp = client.get(f"/projects/api/images/{rel}/file")
        assert resp.status_code == 200
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"
        assert client.get("/projects/api/images/../escape.png/file").status_code == 404


class TestAnnotations:
    def test_get_put_round_trip(self, client):
        create_project(client)
        rel = client.get("/projects/api/images").json()["images"][0]
        got = client.get(f"/projects/api/images/{rel}/annotations").json()
        assert got["doc"]["shapes"] == []
        resp = client.put(
            f"/projects/api/images/{rel}/annotations",
            json={"token": got["token"], "edits": [add_edit()]},
        )
        assert resp.status_code == 200
        doc = resp.json()["doc"]
        assert len(doc["shapes"]) == 1
        assert doc["shapes"][0]["points"] == [[10, 10], [40, 40]]

    def test_stale_token_409_with_latest(self, client):
        create_project(client)
        rel = client.get("/projects/api/images").json()["images"][0]
        token = client.get(f"/projects/api/images/{rel}/annotations").json()["token"]
        client.put(
            f"/projects/api/images/{rel}/annotations",
            json={"token": token, "edits": [add_edit()]},
        )
        resp = client.put(
            f"/projects/api/images/{rel}/annotations",
            json={"token": token, "edits": [add_edit("high")]},
        )
        assert resp.status_code == 409
        body = resp.json()
        assert body["error"] == "ConflictError"
        assert len(body["doc"]["shapes"]) == 1
        assert body["token"]

    def test_missing_image_404(self, client):
        create_project(client)
        resp = client.get("/projects/api/images/nope.png/annotations")
        assert resp.status_code == 404


class TestLoopEndpoints:
    def label_all(self, client):
        for i, rel in enumerate(client.get("/projects/api/images").json()["images"]):
            got = client.get(f"/projects/api/images/{rel}/annotations").json()
            client.put(
                f"/projects/api/images/{rel}/annotations",
                json={
                    "token": got["token"],
                    "edits": [add_edit("low" if i % 2 else "high")],
                },
            )

    def test_full_loop(self, client):
        create_project(client)
        weights = write_mock_weights(
            client.tmp_path / "w.json", mode="echo", classes=["low", "high"]
        )
        resp = client.post("/projects/api/models", json={"weights_uri": str(weights)})
        assert resp.status_code == 201
        assert resp.json()["version_id"] == 1

        self.label_all(client)

        resp = client.post("/projects/api/detect", json={})
        assert resp.status_code == 200
        assert resp.json()["errors"] == {}

        resp = client.get("/projects/api/export")
        assert resp.status_code == 200
        snapshot = resp.json()
        assert snapshot["snapshot_id"]
        assert len(snapshot["train_images"]) == 2

        resp = client.post("/projects/api/train", json={"epochs": 1, "wait": True})
        assert resp.status_code == 202
        version = resp.json()
        assert version["version_id"] == 2

        models = client.get("/projects/api/models").json()["models"]
        assert [m["version_id"] for m in models] == [1, 2]
        assert models[1]["status"] == "ready"

        resp = client.post("/projects/api/models/2/evaluate")
        assert resp.status_code == 200
        rep = resp.json()
        assert rep["classes"] == ["low", "high"]

        stored = client.get("/projects/api/models/2/evaluation")
        assert stored.status_code == 200
        assert stored.json()["counts"] == rep["counts"]

        events = client.get("/projects/api/events").json()["events"]
        kinds = [e["kind"] for e in events]
        assert kinds[0] == "imported"
        assert "detected" in kinds and "trained" in kinds and "evaluated" in kinds

    def test_train_without_labels_400(self, client):
        create_project(client)
        weights = write_mock_weights(client.tmp_path / "w.json", classes=["low"])
        client.post("/projects/api/models", json={"weights_uri": str(weights)})
        resp = client.post("/projects/api/train", json={"epochs": 1})
        assert resp.status_code == 400

    def test_detect_without_model_409(self, client):
        create_project(client)
        resp = client.post("/projects/api/detect", json={})
        assert resp.status_code == 409

    def test_evaluation_missing_404(self, client):
        create_project(client)
        weights = write_mock_weights(client.tmp_path / "w.json", classes=["low"])
        client.post("/projects/api/models", json={"weights_uri": str(weights)})
        resp = client.get("/projects/api/models/1/evaluation")
        assert resp.status_code == 404
