"""Client side of the bridge subprocess protocol.

The bridge is an external executable implementing three subcommands:

    BRIDGE detect --weights W --images list.txt --out out.jsonl --conf C --iou U
    BRIDGE train  --data dataset.yaml --base-weights W --out-weights O --epochs E
    BRIDGE verify --weights W

detect writes one JSONL line per input image:
    {"image": "<path>", "detections":
        [{"class_index": i, "bbox": [x1, y1, x2, y2], "confidence": c}]}

Exit codes: 0 success; 2 bad weights; 3 unreadable image (named on stderr);
4 malformed dataset (train only); anything else is a generic failure. The
executable comes from the LADDER_BRIDGE environment variable (a shell-style
command string); when unset, the built-in mock bridge is used.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

from .errors import BridgeError, ImageError, IncompatibleWeightsError
from .geometry import from_anchor_points
from .postprocess import Detection

BRIDGE_ENV = "LADDER_BRIDGE"
DEFAULT_TIMEOUT = 600.0


def bridge_command(override: Sequence[str] | None = None) -> list[str]:
    if override:
        return list(override)
    env = os.environ.get(BRIDGE_ENV)
    if env:
        return shlex.split(env)
    return [sys.executable, "-m", "ladder.mock_bridge"]


def _run(cmd: list[str], timeout: float) -> subprocess.CompletedProcess:
    try:
        return subprocess.run(
            cmd, capture_output=True, text=True, timeout=timeout
        )
    except FileNotFoundError as e:
        raise BridgeError(f"bridge executable not found: {cmd[0]}") from e
    except subprocess.TimeoutExpired as e:
        raise BridgeError(f"bridge timed out after {timeout}s: {cmd}") from e


def _raise_for_exit(proc: subprocess.CompletedProcess, what: str) -> None:
    if proc.returncode == 0:
        return
    stderr = proc.stderr or ""
    if proc.returncode == 2:
        raise IncompatibleWeightsError(
            f"bridge rejected weights during {what}: {stderr.strip()}",
            exit_code=2,
            stderr=stderr,
        )
    if proc.returncode == 3:
        raise ImageError(f"bridge could not read an image: {stderr.strip()}")
    raise BridgeError(
        f"bridge {what} failed with exit {proc.returncode}: {stderr.strip()}",
        exit_code=proc.returncode,
        stderr=stderr,
    )


def run_verify(
    weights: Path | str,
    bridge: Sequence[str] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> None:
    cmd = bridge_command(bridge) + ["verify", "--weights", str(weights)]
    _raise_for_exit(_run(cmd, timeout), "verify")


def parse_detect_output(path: Path | str) -> dict[str, list[Detection]]:
    """Parse the protocol's JSONL into detections keyed by image path."""
    out: dict[str, list[Detection]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise BridgeError(f"bridge output line {lineno} is not JSON: {e}") from e
        if not isinstance(record, dict) or "image" not in record:
            raise BridgeError(f"bridge output line {lineno} missing 'image'")
        dets = []
        for d in record.get("detections", []):
            x1, y1, x2, y2 = d["bbox"]
            dets.append(
                Detection(
                    class_index=int(d["class_index"]),
                    bbox=from_anchor_points((x1, y1), (x2, y2)),
                    confidence=float(d["confidence"]),
                )
            )
        out[str(record["image"])] = dets
    return out


def run_detect(
    weights: Path | str,
    images: Sequence[Path | str],
    conf: float,
    iou: float,
    bridge: Sequence[str] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> dict[str, list[Detection]]:
    """Run the detect protocol; returns detections keyed by image path as given."""
    with tempfile.TemporaryDirectory(prefix="ladder-bridge-") as tmp:
        list_path = Path(tmp) / "list.txt"
        out_path = Path(tmp) / "out.jsonl"
        list_path.write_text(
            "".join(str(p) + "\n" for p in images), encoding="utf-8"
        )
        cmd = bridge_command(bridge) + [
            "detect",
            "--weights", str(weights),
            "--images", str(list_path),
            "--out", str(out_path),
            "--conf", str(conf),
            "--iou", str(iou),
        ]
        proc = _run(cmd, timeout)
        _raise_for_exit(proc, "detect")
        if not out_path.exists():
            raise BridgeError("bridge exited 0 but wrote no output file")
        results = parse_detect_output(out_path)
    missing = [str(p) for p in images if str(p) not in results]
    if missing:
        raise BridgeError(f"bridge output missing lines for: {missing}")
    return results


def run_train(
    data_yaml: Path | str,
    base_weights: Path | str,
    out_weights: Path | str,
    epochs: int,
    bridge: Sequence[str] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> Path:
    cmd = bridge_command(bridge) + [
        "train",
        "--data", str(data_yaml),
        "--base-weights", str(base_weights),
        "--out-weights", str(out_weights),
        "--epochs", str(epochs),
    ]
    proc = _run(cmd, timeout)
    if proc.returncode == 4:
        raise BridgeError(
            f"bridge reports malformed dataset: {(proc.stderr or '').strip()}",
            exit_code=4,
            stderr=proc.stderr or "",
        )
    _raise_for_exit(proc, "train")
    out = Path(out_weights)
    if not out.exists():
        raise BridgeError("bridge train exited 0 but produced no artifact")
    return out
