"""Command-line client: dataset ingestion, offline simulation, inpainting,
evaluation, and launching the HTTP service.

Every command is a thin wrapper over the core package; the storage root
comes from --data or the BLOCKFORGE_DATA environment variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .datasets import Workspace
from .errors import BlockforgeError
from .raster import LabelMap, decode_label_map, save_label_map
from .selection import realized_budget


def _workspace(data: str | None) -> Workspace:
    import os

    root = data or os.environ.get("BLOCKFORGE_DATA") or "./blockforge-data"
    return Workspace(root)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise click.BadParameter(f"expected RxC, got {text!r}")


data_option = click.option("--data", default=None, help="storage root (default: $BLOCKFORGE_DATA)")


@click.group()
def main():
    """Block-based image annotation toolkit."""


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@data_option
def ingest(manifest, data):
    """Register a dataset from a manifest JSON file."""
    ws = _workspace(data)
    rec = ws.ingest(manifest)
    click.echo(f"ingested dataset {rec.dataset_id!r}: {len(rec.images)} images")


@main.command()
@click.option("--dataset", required=True)
@click.option("--strategy", default="pseudo_checkerboard", show_default=True)
@click.option("--budget", type=float, default=0.5, show_default=True)
@click.option("--phase", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid", default=None, help="override grid as RxC")
@click.option("--no-tasks", is_flag=True, help="write plans without enqueuing tasks")
@data_option
def plan(dataset, strategy, budget, phase, seed, grid, no_tasks, data):
    """Select blocks per image and enqueue annotation tasks."""
    ws = _workspace(data)
    plans = ws.plan_dataset(
        dataset, strategy, budget, phase, seed,
        create_tasks=not no_tasks, grid=_parse_grid(grid) if grid else None,
    )
    blocks = sum(len(p.selected) for p in plans.values())
    click.echo(f"planned {len(plans)} images, {blocks} blocks selected")


@main.command()
@click.option("--dataset", required=True)
@click.option("--strategy", default="pseudo_checkerboard", show_default=True)
@click.option("--budget", type=float, default=0.5, show_default=True)
@click.option("--phase", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid", default=None, help="override grid as RxC")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@data_option
def degrade(dataset, strategy, budget, phase, seed, grid, out, data):
    """Write block-partial label maps synthesized from ground truth."""
    ws = _workspace(data)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = ws.degrade(
        dataset, strategy, budget, phase, seed, grid=_parse_grid(grid) if grid else None
    )
    for img_id, (plan_, partial) in results.items():
        save_label_map(partial, out_dir / f"{img_id}.png")
        click.echo(
            f"{img_id}: {len(plan_.selected)} blocks, "
            f"realized budget {realized_budget(plan_).fraction:.4f}"
        )
    click.echo(f"wrote {len(results)} partial maps to {out_dir}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@data_option
def serve(host, port, data):
    """Run the annotation HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(data)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--dataset", required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@data_option
def merge(dataset, out, data):
    """Merge accepted submissions into per-image label maps."""
    ws = _workspace(data)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = ws.merge_dataset(dataset)
    for img_id, label_map in merged.items():
        save_label_map(label_map, out_dir / f"{img_id}.png")
    click.echo(f"merged {len(merged)} images into {out_dir}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--strategy", default="pseudo_checkerboard", show_default=True)
@click.option("--budget", type=float, default=0.5, show_default=True)
@click.option("--phase", type=int, default=0, show_default=True)
@click.option("--g", "g", type=int, default=8, show_default=True)
@click.option("--rho", type=float, default=0.5, show_default=True)
@click.option("--threshold", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid", default=None, help="override grid as RxC")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@data_option
def inpaint(dataset, strategy, budget, phase, g, rho, threshold, seed, grid, out, data):
    """Degrade ground truth to block hints and inpaint dense labels."""
    ws = _workspace(data)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = ws.inpaint_dataset(
        dataset,
        strategy=strategy,
        budget=budget,
        phase=phase,
        plan_seed=seed,
        g=g,
        rho=rho,
        seed=seed,
        rel_threshold=threshold,
        grid=_parse_grid(grid) if grid else None,
    )
    for img_id, (res, plan_) in results.items():
        save_label_map(res.label_map, out_dir / f"{img_id}.png")
        u_max = float(res.uncertainty.max())
        scaled = (
            np.zeros_like(res.uncertainty, dtype=np.uint16)
            if u_max == 0.0
            else np.round(res.uncertainty / u_max * 65535).astype(np.uint16)
        )
        Image.fromarray(scaled).save(out_dir / f"{img_id}.uncertainty.png")
        sidecar = {
            "coverage": res.coverage,
            "coverage_unhinted": res.coverage_unhinted,
            "rel_threshold": threshold,
            "g": g,
            "rho": rho,
            "seed": seed,
            "u_max": u_max,
        }
        (out_dir / f"{img_id}.json").write_text(json.dumps(sidecar, indent=2))
        click.echo(f"{img_id}: coverage {res.coverage:.4f}")
    click.echo(f"inpainted {len(results)} images into {out_dir}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--pred", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@data_option
def evaluate(dataset, pred, out, data):
    """Compare predicted label maps in a directory against ground truth."""
    ws = _workspace(data)
    preds: dict[str, LabelMap] = {}
    for path in sorted(Path(pred).glob("*.png")):
        if path.name.endswith(".uncertainty.png"):
            continue
        preds[path.stem] = decode_label_map(path.read_bytes())
    if not preds:
        raise click.ClickException(f"no label maps found in {pred}")
    report = ws.evaluate_maps(dataset, preds)
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote report for {len(preds)} images to {out}")
    else:
        click.echo(text)


@main.command()
@click.argument("report_file", type=click.Path(exists=True, dir_okay=False))
def report(report_file):
    """Summarize an evaluation report."""
    data = json.loads(Path(report_file).read_text())
    agg = data.get("aggregate")
    click.echo(f"dataset: {data['dataset_id']}  images: {len(data['images'])}")
    if agg:
        click.echo(
            f"mIOU {agg['miou']:.4f}  error {agg['class_balanced_error']:.4f}  "
            f"agreement {agg['pixel_agreement']:.4f}"
        )
    for img_id, rep in sorted(data["images"].items()):
        click.echo(
            f"  {img_id}: mIOU {rep['miou']:.4f}  agreement {rep['pixel_agreement']:.4f}"
        )


def entrypoint():
    try:
        main(standalone_mode=True)
    except BlockforgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
