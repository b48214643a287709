"""Shared fixtures: synthetic Voronoi scenes and a tiny ingestable dataset."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from blockforge.raster import (
    ImageRaster,
    LabelMap,
    Palette,
    encode_label_map,
)

K_VORONOI = 5
# Class colors sit close enough that the sigma=10 pixel noise causes real
# confusion near cell boundaries; far enough that interiors stay solvable.
VORONOI_COLORS = np.array(
    [(100, 70, 70), (70, 100, 70), (70, 70, 100), (95, 95, 70), (85, 80, 95)],
    dtype=np.float64,
)
VORONOI_NOISE_SIGMA = 10.0  # on the 0..255 scale, i.e. 10/255


def voronoi_scene(seed: int, size: int = 64, sites: int = 12) -> tuple[LabelMap, ImageRaster]:
    """Seeded Voronoi label map (K=5) rendered to RGB with class-correlated
    colors plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, size, size=(sites, 2))
    cls = rng.integers(0, K_VORONOI, size=sites)
    ys, xs = np.mgrid[0:size, 0:size]
    d = (ys[..., None] - pts[:, 0]) ** 2 + (xs[..., None] - pts[:, 1]) ** 2
    labels = cls[d.argmin(axis=2)].astype(np.uint8)
    rgb = VORONOI_COLORS[labels] + rng.normal(0, VORONOI_NOISE_SIGMA, size=(size, size, 3))
    rgb = np.clip(rgb, 0, 255).astype(np.uint8)
    return LabelMap(labels), ImageRaster(rgb)


def random_label_pair(rng, size=8, k=4, void_fraction=0.1):
    """Random pred/gt label-map pair with a sprinkle of void pixels."""
    def one():
        a = rng.integers(0, k, size=(size, size)).astype(np.uint8)
        a[rng.random((size, size)) < void_fraction] = 255
        return LabelMap(a)

    return one(), one()


@pytest.fixture
def small_palette():
    return Palette.sequential(3)


def write_dataset(tmp_path: Path, dataset_id="demo", n_images=2, size=20, k=3, grid=(2, 2)):
    """Write a manifest + images + full ground truth under tmp_path; returns
    the manifest path."""
    from PIL import Image

    src = tmp_path / "src"
    src.mkdir(parents=True, exist_ok=True)
    images = []
    for i in range(n_images):
        image_id = f"img{i}"
        # Quadrant layout: one uniform region per grid block, so each block
        # task has a single ground-truth segment.
        ys, xs = np.mgrid[0:size, 0:size]
        labels = ((2 * (ys >= size // 2) + (xs >= size // 2) + i) % k).astype(np.uint8)
        rgb = np.stack([labels * 60 + 40] * 3, axis=2).astype(np.uint8)
        Image.fromarray(rgb).save(src / f"{image_id}.png")
        (src / f"{image_id}_gt.png").write_bytes(encode_label_map(LabelMap(labels)))
        images.append(
            {
                "image_id": image_id,
                "uri": f"{image_id}.png",
                "width": size,
                "height": size,
                "gt_uri": f"{image_id}_gt.png",
            }
        )
    manifest = {
        "dataset_id": dataset_id,
        "palette": [{"id": i, "name": f"class_{i}"} for i in range(k)],
        "images": images,
        "grid": {"rows": grid[0], "cols": grid[1]},
    }
    path = src / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path
