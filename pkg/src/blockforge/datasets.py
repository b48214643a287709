"""Dataset ingestion and the on-disk workspace.

A workspace root (env var BLOCKFORGE_DATA or --data) holds ingested
datasets, one append-only event log for the task queue, and export
artifacts:

    <root>/
      events.jsonl
      datasets/<dataset_id>/
        manifest.json      normalized manifest
        images/<image_id>.png
        gt/<image_id>.png
        plans/<image_id>.json

Image ids are qualified as "<dataset_id>:<image_id>" inside the shared
task queue so several datasets can feed one worker pool.
"""

from __future__ import annotations

import io
import json
import shutil
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field, field_validator

from .errors import DimensionError, UnknownIdError
from .inpaint import (
    InpaintResult,
    SamplerConfig,
    inpaint_image,
    reference_predictor,
)
from .metrics import (
    ConfusionMatrix,
    class_balanced_error,
    confusion,
    evaluate_pair,
    miou,
    per_class_iou,
    small_region_confusion,
)
from .errors import NoQualifyingRegionsError
from .raster import (
    VOID,
    BlockGrid,
    ImageRaster,
    LabelMap,
    Palette,
    connected_components,
    decompose_grid,
    decode_label_map,
    encode_label_map,
)
from .selection import SelectionPlan, make_plan
from .workflow import TaskStore


class PaletteEntry(BaseModel):
    id: int = Field(ge=0, le=254)
    name: str


class ManifestImage(BaseModel):
    image_id: str
    uri: str
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    gt_uri: str | None = None

    @field_validator("image_id")
    @classmethod
    def _no_separator(cls, v: str) -> str:
        if ":" in v or "/" in v:
            raise ValueError("image_id must not contain ':' or '/'")
        return v


class GridConfig(BaseModel):
    rows: int = Field(default=10, ge=1)
    cols: int = Field(default=10, ge=1)


class DatasetManifest(BaseModel):
    """Ingestion manifest; uris resolve relative to the manifest file."""

    dataset_id: str
    palette: list[PaletteEntry]
    images: list[ManifestImage]
    grid: GridConfig = GridConfig()

    @field_validator("images")
    @classmethod
    def _unique_ids(cls, v):
        ids = [i.image_id for i in v]
        if len(set(ids)) != len(ids):
            raise ValueError("image ids must be unique")
        return v

    def to_palette(self) -> Palette:
        return Palette(tuple((e.id, e.name) for e in self.palette))


@dataclass
class DatasetRecord:
    dataset_id: str
    palette: Palette
    grid_config: tuple[int, int]
    images: dict[str, dict]  # image_id -> {width, height, has_gt}

    def grid_for(self, image_id: str, grid: tuple[int, int] | None = None) -> BlockGrid:
        info = self.images[image_id]
        rows, cols = grid or self.grid_config
        return decompose_grid(info["width"], info["height"], rows, cols)


def image_key(dataset_id: str, image_id: str) -> str:
    return f"{dataset_id}:{image_id}"


def split_image_key(key: str) -> tuple[str, str]:
    if ":" not in key:
        raise UnknownIdError(f"malformed image key {key!r}")
    ds, img = key.split(":", 1)
    return ds, img


class Workspace:
    """File-backed registry of datasets plus the shared task store."""

    def __init__(self, root: Path | str, *, clock=None, seed: int = 0):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.store = TaskStore(self.root / "events.jsonl", clock=clock, seed=seed)
        self._records: dict[str, DatasetRecord] = {}
        for mpath in sorted(self.root.glob("datasets/*/manifest.json")):
            self._load_record(mpath)

    # -- registry ------------------------------------------------------------

    def _dataset_dir(self, dataset_id: str) -> Path:
        return self.root / "datasets" / dataset_id

    def _load_record(self, manifest_path: Path) -> DatasetRecord:
        m = DatasetManifest.model_validate_json(manifest_path.read_text())
        rec = DatasetRecord(
            dataset_id=m.dataset_id,
            palette=m.to_palette(),
            grid_config=(m.grid.rows, m.grid.cols),
            images={
                i.image_id: {"width": i.width, "height": i.height, "has_gt": i.gt_uri is not None}
                for i in m.images
            },
        )
        self._records[m.dataset_id] = rec
        return rec

    def dataset(self, dataset_id: str) -> DatasetRecord:
        rec = self._records.get(dataset_id)
        if rec is None:
            raise UnknownIdError(f"unknown dataset {dataset_id!r}")
        return rec

    def dataset_ids(self) -> list[str]:
        return sorted(self._records)

    # -- ingestion -----------------------------------------------------------

    def ingest(self, manifest_path: Path | str) -> DatasetRecord:
        """Validate a manifest, copy its files into the workspace, and
        register the dataset. Ground-truth maps must match image sizes and
        the configured grid must fit every image."""
        manifest_path = Path(manifest_path)
        manifest = DatasetManifest.model_validate_json(manifest_path.read_text())
        base = manifest_path.parent
        ds_dir = self._dataset_dir(manifest.dataset_id)
        (ds_dir / "images").mkdir(parents=True, exist_ok=True)
        (ds_dir / "gt").mkdir(parents=True, exist_ok=True)

        palette = manifest.to_palette()
        stored_images = []
        for entry in manifest.images:
            src = base / entry.uri
            if not src.exists():
                raise FileNotFoundError(f"image file missing for {entry.image_id!r}: {src}")
            with Image.open(src) as img:
                if (img.width, img.height) != (entry.width, entry.height):
                    raise DimensionError(
                        f"image {entry.image_id!r} is {img.width}x{img.height}, "
                        f"manifest says {entry.width}x{entry.height}"
                    )
            decompose_grid(entry.width, entry.height, manifest.grid.rows, manifest.grid.cols)
            gt_name = None
            if entry.gt_uri is not None:
                gt_src = base / entry.gt_uri
                if not gt_src.exists():
                    raise FileNotFoundError(f"gt file missing for {entry.image_id!r}: {gt_src}")
                gt = decode_label_map(gt_src.read_bytes())
                if (gt.width, gt.height) != (entry.width, entry.height):
                    raise DimensionError(
                        f"gt for {entry.image_id!r} is {gt.width}x{gt.height}, "
                        f"image is {entry.width}x{entry.height}"
                    )
                gt.validate_against(palette)
                gt_name = f"gt/{entry.image_id}.png"
                shutil.copyfile(gt_src, ds_dir / gt_name)
            img_name = f"images/{entry.image_id}{src.suffix}"
            shutil.copyfile(src, ds_dir / img_name)
            stored_images.append(
                ManifestImage(
                    image_id=entry.image_id,
                    uri=img_name,
                    width=entry.width,
                    height=entry.height,
                    gt_uri=gt_name,
                )
            )

        normalized = DatasetManifest(
            dataset_id=manifest.dataset_id,
            palette=manifest.palette,
            images=stored_images,
            grid=manifest.grid,
        )
        (ds_dir / "manifest.json").write_text(normalized.model_dump_json(indent=2))
        return self._load_record(ds_dir / "manifest.json")

    # -- file access ---------------------------------------------------------

    def image_path(self, dataset_id: str, image_id: str) -> Path:
        rec = self.dataset(dataset_id)
        if image_id not in rec.images:
            raise UnknownIdError(f"unknown image {image_id!r} in dataset {dataset_id!r}")
        matches = list((self._dataset_dir(dataset_id) / "images").glob(f"{image_id}.*"))
        if not matches:
            raise UnknownIdError(f"image file for {image_id!r} missing")
        return matches[0]

    def load_image(self, dataset_id: str, image_id: str) -> ImageRaster:
        with Image.open(self.image_path(dataset_id, image_id)) as img:
            return ImageRaster(np.asarray(img.convert("RGB"), dtype=np.uint8))

    def load_gt(self, dataset_id: str, image_id: str) -> LabelMap:
        rec = self.dataset(dataset_id)
        if image_id not in rec.images:
            raise UnknownIdError(f"unknown image {image_id!r} in dataset {dataset_id!r}")
        path = self._dataset_dir(dataset_id) / "gt" / f"{image_id}.png"
        if not path.exists():
            raise UnknownIdError(f"no ground truth for image {image_id!r}")
        return decode_label_map(path.read_bytes())

    # -- planning and tasks ----------------------------------------------------

    def plan_dataset(
        self,
        dataset_id: str,
        strategy: str,
        budget: float = 0.5,
        phase: int = 0,
        seed: int = 0,
        create_tasks: bool = True,
        grid: tuple[int, int] | None = None,
    ) -> dict[str, SelectionPlan]:
        """Build one selection plan per image, persist them, and (by
        default) enqueue one open task per selected block, attaching the
        per-block ground-truth segment count when GT is available."""
        rec = self.dataset(dataset_id)
        plans_dir = self._dataset_dir(dataset_id) / "plans"
        plans_dir.mkdir(parents=True, exist_ok=True)
        plans: dict[str, SelectionPlan] = {}
        gt_counts: dict[str, dict[tuple[int, int], int]] = {}
        for img_id in sorted(rec.images):
            img_grid = rec.grid_for(img_id, grid)
            plan = make_plan(img_grid, strategy, budget, phase, seed)
            plans[img_id] = plan
            (plans_dir / f"{img_id}.json").write_text(plan.to_json())
            if rec.images[img_id]["has_gt"]:
                gt = self.load_gt(dataset_id, img_id)
                gt_counts[img_id] = {
                    (r, c): connected_components(
                        LabelMap(np.ascontiguousarray(gt.labels[img_grid.block_slices(r, c)]))
                    )[1]
                    for r, c in plan.selected
                }
        if create_tasks:
            keyed_plans = {image_key(dataset_id, i): p for i, p in plans.items()}
            keyed_counts = {image_key(dataset_id, i): c for i, c in gt_counts.items()}
            self.store.create_tasks(keyed_plans, gt_segment_counts=keyed_counts)
        return plans

    def degrade(
        self,
        dataset_id: str,
        strategy: str,
        budget: float,
        phase: int = 0,
        seed: int = 0,
        grid: tuple[int, int] | None = None,
    ) -> dict[str, tuple[SelectionPlan, LabelMap]]:
        """Synthesize block-partial annotations from ground truth: labels
        survive inside the plan's selected blocks, everything else is void."""
        rec = self.dataset(dataset_id)
        out: dict[str, tuple[SelectionPlan, LabelMap]] = {}
        for img_id in sorted(rec.images):
            if not rec.images[img_id]["has_gt"]:
                continue
            gt = self.load_gt(dataset_id, img_id)
            plan = make_plan(rec.grid_for(img_id, grid), strategy, budget, phase, seed)
            partial = np.where(plan.mask(), gt.labels, VOID).astype(np.uint8)
            out[img_id] = (plan, LabelMap(partial))
        return out

    # -- merge / export --------------------------------------------------------

    def merge_image(self, dataset_id: str, image_id: str) -> LabelMap:
        rec = self.dataset(dataset_id)
        if image_id not in rec.images:
            raise UnknownIdError(f"unknown image {image_id!r} in dataset {dataset_id!r}")
        from .workflow import merge_blocks

        info = rec.images[image_id]
        entries = self.store.accepted_entries(image_key(dataset_id, image_id))
        return merge_blocks(entries, info["width"], info["height"], rec.palette)

    def merge_dataset(self, dataset_id: str) -> dict[str, LabelMap]:
        rec = self.dataset(dataset_id)
        return {img_id: self.merge_image(dataset_id, img_id) for img_id in sorted(rec.images)}

    def export_zip(self, dataset_id: str) -> bytes:
        """Deterministic zip of merged label maps, one PNG per image."""
        merged = self.merge_dataset(dataset_id)
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for img_id in sorted(merged):
                info = zipfile.ZipInfo(f"{img_id}.png", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, encode_label_map(merged[img_id]))
        return buf.getvalue()

    # -- inpainting --------------------------------------------------------------

    def inpaint_dataset(
        self,
        dataset_id: str,
        strategy: str = "pseudo_checkerboard",
        budget: float = 0.5,
        phase: int = 0,
        plan_seed: int = 0,
        g: int = 8,
        rho: float = 0.5,
        seed: int = 0,
        rel_threshold: float = 0.2,
        k_neighbors: int = 9,
        grid: tuple[int, int] | None = None,
    ) -> dict[str, tuple[InpaintResult, SelectionPlan]]:
        """Degrade ground truth to block hints, then inpaint each image with
        the reference predictor."""
        rec = self.dataset(dataset_id)
        predictor = reference_predictor(k_neighbors=k_neighbors, rho=rho)
        cfg = SamplerConfig(g=g, seed=seed, rho=rho)
        results = {}
        for img_id, (plan, partial) in self.degrade(
            dataset_id, strategy, budget, phase, plan_seed, grid
        ).items():
            image = self.load_image(dataset_id, img_id)
            res = inpaint_image(
                image, partial, plan, predictor, cfg, rel_threshold, rec.palette.k
            )
            results[img_id] = (res, plan)
        return results

    # -- evaluation ---------------------------------------------------------------

    def evaluate_maps(
        self,
        dataset_id: str,
        predictions: dict[str, LabelMap],
        small_region_threshold: float = 0.005,
    ) -> dict:
        """Per-image metric reports plus a dataset aggregate built from
        summed confusion matrices."""
        rec = self.dataset(dataset_id)
        per_image = {}
        total_cm: ConfusionMatrix | None = None
        small_cm: ConfusionMatrix | None = None
        agree = valid = 0
        seg_pred = seg_gt = 0
        for img_id in sorted(predictions):
            if img_id not in rec.images:
                raise UnknownIdError(f"unknown image {img_id!r} in dataset {dataset_id!r}")
            gt = self.load_gt(dataset_id, img_id)
            pred = predictions[img_id]
            report = evaluate_pair(pred, gt, rec.palette, small_region_threshold)
            per_image[img_id] = report.to_dict()

            cm = confusion(pred, gt, rec.palette)
            total_cm = cm if total_cm is None else total_cm + cm
            try:
                scm = small_region_confusion(pred, gt, rec.palette, small_region_threshold)
                small_cm = scm if small_cm is None else small_cm + scm
            except NoQualifyingRegionsError:
                pass
            both = (pred.labels != VOID) & (gt.labels != VOID)
            agree += int((pred.labels[both] == gt.labels[both]).sum())
            valid += int(both.sum())
            seg_pred += report.segment_counts[0]
            seg_gt += report.segment_counts[1]

        aggregate = None
        if total_cm is not None and total_cm.total > 0:
            aggregate = {
                "miou": miou(total_cm),
                "class_balanced_error": class_balanced_error(total_cm),
                "pixel_agreement": agree / valid if valid else None,
                "per_class_iou": {str(c): v for c, v in per_class_iou(total_cm).items()},
                "small_region_error": (
                    class_balanced_error(small_cm) if small_cm is not None and small_cm.total else None
                ),
                "segment_counts": {"pred": seg_pred, "gt": seg_gt},
            }
        return {"dataset_id": dataset_id, "images": per_image, "aggregate": aggregate}

    def close(self) -> None:
        self.store.close()
