"""Command line mirror of the HTTP API."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .service import Engine, ProjectSettings


def _engine(root: str) -> Engine:
    return Engine(Path(root))


def _echo_json(data) -> None:
    click.echo(json.dumps(data, indent=2))


@click.group()
def main():
    """Human-in-the-loop detection labeling: detect, edit, export, train, evaluate."""


root_option = click.option(
    "--root",
    envvar="LADDER_ROOT",
    default=".ladder",
    show_default=True,
    help="Engine data root (projects, registries, exports).",
)


@main.command()
@root_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(root, host, port):
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(_engine(root)), host=host, port=port)


@main.command("create-project")
@root_option
@click.option("--image-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--project", "project_id", default=None, help="Project id (generated if omitted).")
@click.option("--classes", default="", help="Comma-separated initial class names.")
@click.option("--test-fraction", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
def create_project(root, image_root, project_id, classes, test_fraction, seed):
    """Register an image directory as a project."""
    settings = ProjectSettings(
        class_names=[c.strip() for c in classes.split(",") if c.strip()],
        test_fraction=test_fraction,
        split_seed=seed,
    )
    state = _engine(root).create_project(image_root, settings, project_id)
    _echo_json(state.to_json())


@main.command("import-model")
@root_option
@click.option("--project", required=True)
@click.option("--weights", required=True, type=click.Path(exists=True, dir_okay=False))
def import_model(root, project, weights):
    """Register the pre-trained base model."""
    version = _engine(root).import_base_model(project, weights)
    _echo_json(version.to_json())


@main.command()
@root_option
@click.option("--project", required=True)
@click.option("--weights", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Import these weights as the base model first (empty registry only).")
@click.option("--version", "version_id", default=None, type=int)
@click.option("--conf", default=0.25, show_default=True, type=float)
@click.option("--iou", default=0.45, show_default=True, type=float)
@click.option("--images", default=None, help="Comma-separated image subset.")
def detect(root, project, weights, version_id, conf, iou, images):
    """Pre-label project images with model proposals."""
    engine = _engine(root)
    if weights is not None:
        if engine.get_models(project):
            raise click.UsageError(
                "project already has models; drop --weights and pass --version"
            )
        engine.import_base_model(project, weights)
    subset = [s.strip() for s in images.split(",") if s.strip()] if images else None
    result = engine.detect(project, images=subset, version_id=version_id, conf=conf, iou=iou)
    _echo_json(result)


@main.command()
@root_option
@click.option("--project", required=True)
@click.option("--out", default=None, type=click.Path())
@click.option("--include-model-labels", is_flag=True, default=False,
              help="Export raw model shapes too (default: human-verified only).")
def export(root, project, out, include_model_labels):
    """Write a YOLO-format dataset snapshot."""
    snapshot = _engine(root).export_dataset(
        project, out_dir=out, include_model_labels=include_model_labels or None
    )
    _echo_json(
        {
            "snapshot_id": snapshot.snapshot_id,
            "root": str(snapshot.root),
            "train": len(snapshot.train_images),
            "test": len(snapshot.test_images),
        }
    )


@main.command()
@root_option
@click.option("--project", required=True)
@click.option("--base-version", default=None, type=int)
@click.option("--epochs", default=1, show_default=True, type=int)
@click.option("--wait/--no-wait", default=True, show_default=True)
def train(root, project, base_version, epochs, wait):
    """Export a snapshot and retrain a new model version."""
    engine = _engine(root)
    version = engine.retrain(project, base_version=base_version, epochs=epochs, wait=wait)
    _echo_json(version.to_json())
    if version.status == "failed":
        sys.exit(1)


@main.command("eval")
@root_option
@click.option("--project", required=True)
@click.option("--version", "version_id", default=None, type=int)
@click.option("--match-iou", default=0.5, show_default=True, type=float)
def eval_cmd(root, project, version_id, match_iou):
    """Evaluate a model version on the test split."""
    rep = _engine(root).evaluate(project, version_id=version_id, match_iou=match_iou)
    _echo_json(rep.to_json())


@main.command()
@root_option
@click.option("--project", required=True)
def models(root, project):
    """List registered model versions."""
    _echo_json([v.to_json() for v in _engine(root).get_models(project)])


@main.command()
@root_option
@click.option("--project", required=True)
def events(root, project):
    """Dump the project's loop event log."""
    _echo_json([e.to_json() for e in _engine(root).events(project)])


if __name__ == "__main__":
    main()
