from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from ladder.annotations import load_doc, save_doc, Shape
from ladder.bridge import parse_detect_output, run_detect, run_train, run_verify
from ladder.errors import BridgeError, ImageError, IncompatibleWeightsError
from ladder.geometry import BBox
from tests.conftest import make_image

BRIDGE = [sys.executable, "-m", "ladder.mock_bridge"]


def run_raw(*args):
    return subprocess.run(BRIDGE + list(args), capture_output=True, text=True)


class TestVerify:
    def test_valid_weights(self, mock_weights):
        run_verify(mock_weights(), bridge=BRIDGE)  # no exception

    def test_corrupt_weights_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{ not json")
        proc = run_raw("verify", "--weights", str(bad))
        assert proc.returncode == 2
        with pytest.raises(IncompatibleWeightsError):
            run_verify(bad, bridge=BRIDGE)

    def test_missing_weights_exit_2(self, tmp_path):
        proc = run_raw("verify", "--weights", str(tmp_path / "nope.json"))
        assert proc.returncode == 2


class TestDetect:
    def test_fixed_mode_counts_and_schema(self, tmp_path, mock_weights):
        weights = mock_weights(mode="fixed", classes=["low", "high"], boxes_per_image=2)
        images = [make_image(tmp_path / f"i{k}.png", 100, 80) for k in range(3)]
        results = run_detect(weights, images, conf=0.25, iou=0.45, bridge=BRIDGE)
        assert set(results) == {str(p) for p in images}
        for dets in results.values():
            assert len(dets) == 2
            for d in dets:
                assert 0 <= d.confidence <= 1
                assert d.bbox.x2 <= 100 and d.bbox.y2 <= 80

    def test_empty_image_list(self, tmp_path, mock_weights):
        weights = mock_weights()
        lst = tmp_path / "list.txt"
        lst.write_text("")
        out = tmp_path / "out.jsonl"
        proc = run_raw(
            "detect", "--weights", str(weights), "--images", str(lst),
            "--out", str(out), "--conf", "0.25", "--iou", "0.45",
        )
        assert proc.returncode == 0
        assert out.read_text() == ""

    def test_unreadable_image_exit_3_named(self, tmp_path, mock_weights):
        weights = mock_weights()
        bogus = tmp_path / "broken.png"
        bogus.write_text("not a png")
        lst = tmp_path / "list.txt"
        lst.write_text(str(bogus) + "\n")
        proc = run_raw(
            "detect", "--weights", str(weights), "--images", str(lst),
            "--out", str(tmp_path / "o.jsonl"), "--conf", "0.1", "--iou", "0.45",
        )
        assert proc.returncode == 3
        assert "broken.png" in proc.stderr
        with pytest.raises(ImageError):
            run_detect(weights, [bogus], 0.1, 0.45, bridge=BRIDGE)

    def test_echo_mode_returns_human_sidecar_shapes(self, tmp_path, mock_weights):
        weights = mock_weights(mode="echo", classes=["low", "high"])
        img = make_image(tmp_path / "img.png", 100, 80)
        doc = load_doc(img)
        doc.shapes = [Shape("g0", "high", BBox(10, 10, 40, 40))]
        save_doc(doc)
        results = run_detect(weights, [img], conf=0.0, iou=0.45, bridge=BRIDGE)
        dets = results[str(img)]
        assert len(dets) == 1
        assert dets[0].class_index == 1
        assert dets[0].confidence == 1.0
        assert dets[0].bbox == BBox(10, 10, 40, 40)

    def test_replay_mode(self, tmp_path, mock_weights):
        canned = {"img.png": [{"class_index": 0, "bbox": [1, 2, 3, 4], "confidence": 0.5}]}
        weights = mock_weights(mode="replay", classes=["low"], detections=canned)
        img = make_image(tmp_path / "img.png", 50, 50)
        results = run_detect(weights, [img], conf=0.0, iou=0.45, bridge=BRIDGE)
        assert results[str(img)][0].bbox == BBox(1, 2, 3, 4)

    def test_conf_threshold_applied_by_bridge(self, tmp_path, mock_weights):
        canned = {
            "img.png": [
                {"class_index": 0, "bbox": [1, 2, 3, 4], "confidence": 0.9},
                {"class_index": 0, "bbox": [20, 20, 30, 30], "confidence": 0.1},
            ]
        }
        weights = mock_weights(mode="replay", classes=["low"], detections=canned)
        img = make_image(tmp_path / "img.png", 50, 50)
        results = run_detect(weights, [img], conf=0.25, iou=0.45, bridge=BRIDGE)
        assert len(results[str(img)]) == 1

    def test_parse_rejects_garbage(self, tmp_path):
        out = tmp_path / "out.jsonl"
        out.write_text("this is not json\n")
        with pytest.raises(BridgeError):
            parse_detect_output(out)

    def test_missing_bridge_executable(self, tmp_path, mock_weights):
        with pytest.raises(BridgeError):
            run_verify(mock_weights(), bridge=["/no/such/bridge"])


def write_dataset(tmp_path, n=2) -> Path:
    """Minimal valid YOLO layout via the real exporter."""
    from ladder.dataset import export_yolo, split

    root = tmp_path / "corpus"
    docs = {}
    for i in range(n):
        rel = f"img{i}.png"
        img = make_image(root / rel, 64, 64)
        doc = load_doc(img)
        doc.shapes = [Shape(f"h{i}", "low", BBox(4, 4, 30, 30))]
        save_doc(doc)
        docs[rel] = load_doc(img)
    out = tmp_path / "ds"
    export_yolo(docs, ["low"], split(docs.keys(), 0.5, 0), out)
    return out


class TestTrain:
    def test_toy_training_produces_artifact(self, tmp_path, mock_weights):
        ds = write_dataset(tmp_path)
        base = mock_weights(mode="fixed", classes=["low"], boxes_per_image=1)
        out = tmp_path / "v2" / "weights.json"
        run_train(ds / "dataset.yaml", base, out, epochs=1, bridge=BRIDGE)
        artifact = json.loads(out.read_text())
        assert artifact["trained_epochs"] == 1
        assert artifact["classes"] == ["low"]
        run_verify(out, bridge=BRIDGE)  # artifact is itself loadable

    def test_missing_classes_names_exit_4(self, tmp_path, mock_weights):
        ds = write_dataset(tmp_path)
        (ds / "classes.names").unlink()
        proc = run_raw(
            "train", "--data", str(ds / "dataset.yaml"),
            "--base-weights", str(mock_weights()),
            "--out-weights", str(tmp_path / "o.json"), "--epochs", "1",
        )
        assert proc.returncode == 4
        assert "classes.names" in proc.stderr

    def test_corrupt_label_file_exit_4_named(self, tmp_path, mock_weights):
        ds = write_dataset(tmp_path)
        bad = next((ds / "labels" / "train").glob("*.txt"))
        bad.write_text("0 0.5 oops 0.5 0.5\n")
        proc = run_raw(
            "train", "--data", str(ds / "dataset.yaml"),
            "--base-weights", str(mock_weights()),
            "--out-weights", str(tmp_path / "o.json"), "--epochs", "1",
        )
        assert proc.returncode == 4
        assert bad.name in proc.stderr

    def test_unwritable_output_exit_1(self, tmp_path, mock_weights):
        ds = write_dataset(tmp_path)
        proc = run_raw(
            "train", "--data", str(ds / "dataset.yaml"),
            "--base-weights", str(mock_weights()),
            "--out-weights", "/proc/definitely/not/writable.json", "--epochs", "1",
        )
        assert proc.returncode == 1

    def test_client_maps_exit_4(self, tmp_path, mock_weights):
        with pytest.raises(BridgeError) as exc:
            run_train(tmp_path / "missing.yaml", mock_weights(), tmp_path / "o.json", 1, bridge=BRIDGE)
        assert exc.value.exit_code == 4
