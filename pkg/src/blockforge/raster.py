"""Raster label maps, block grids, polygon rasterization, and codecs.

Label maps are (h, w) uint8 arrays where each value is a class id and 255
is the reserved void sentinel (never a class). All value types here are
immutable after construction; the wrapped numpy arrays are marked
read-only so they can be shared freely across threads.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import CodecError, DimensionError, GeometryError, PaletteError

VOID = 255

# 4-connectivity structuring element (von Neumann neighborhood).
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Palette:
    """Ordered class table. Ids must be dense in [0, K); 255 is void."""

    classes: tuple[tuple[int, str], ...]

    def __post_init__(self):
        ids = [cid for cid, _ in self.classes]
        names = [name for _, name in self.classes]
        if ids != list(range(len(ids))):
            raise PaletteError(f"class ids must be dense in [0, K), got {ids}")
        if len(set(names)) != len(names):
            raise PaletteError("class names must be unique")
        if len(ids) > VOID:
            raise PaletteError(f"at most {VOID} classes supported (255 is void)")

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def void_id(self) -> int:
        return VOID

    def name_of(self, class_id: int) -> str:
        return self.classes[class_id][1]

    def to_json(self) -> str:
        return json.dumps([{"id": cid, "name": name} for cid, name in self.classes])

    @classmethod
    def from_json(cls, text: str) -> "Palette":
        entries = json.loads(text)
        return cls(tuple((int(e["id"]), str(e["name"])) for e in entries))

    @classmethod
    def sequential(cls, k: int) -> "Palette":
        return cls(tuple((i, f"class_{i}") for i in range(k)))


@dataclass(frozen=True)
class ImageRaster:
    """RGB image, (h, w, 3) uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise DimensionError(f"expected (h, w, 3) uint8 pixels, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise DimensionError("image must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class raster, (h, w) uint8, 255 = void."""

    labels: np.ndarray

    def __post_init__(self):
        a = self.labels
        if a.ndim != 2 or a.dtype != np.uint8:
            raise DimensionError(f"expected (h, w) uint8 labels, got {a.shape} {a.dtype}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionError("label map must be at least 1x1")
        object.__setattr__(self, "labels", _freeze(a))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def nonvoid_mask(self) -> np.ndarray:
        return self.labels != VOID

    def validate_against(self, palette: Palette) -> None:
        bad = self.labels[(self.labels >= palette.k) & (self.labels != VOID)]
        if bad.size:
            raise PaletteError(f"labels {sorted(set(bad.tolist()))} outside palette of {palette.k} classes")

    @classmethod
    def full_void(cls, width: int, height: int) -> "LabelMap":
        return cls(np.full((height, width), VOID, dtype=np.uint8))


@dataclass(frozen=True)
class BlockGrid:
    """Deterministic decomposition of a width x height image into rows x cols
    rectangular blocks. Block (r, c) spans columns [floor(c*w/cols),
    floor((c+1)*w/cols)) and rows analogously, so the blocks tile the image
    exactly with no padding even when dimensions do not divide evenly.
    """

    rows: int
    cols: int
    width: int
    height: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DimensionError("grid needs at least one row and one column")
        if self.cols > self.width or self.rows > self.height:
            raise DimensionError(
                f"grid {self.rows}x{self.cols} too fine for {self.width}x{self.height} image"
            )

    @property
    def block_count(self) -> int:
        return self.rows * self.cols

    def block_rect(self, row: int, col: int) -> tuple[int, int, int, int]:
        """Pixel rectangle (x0, y0, x1, y1) of block (row, col); x1/y1 exclusive."""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise DimensionError(f"block ({row}, {col}) outside {self.rows}x{self.cols} grid")
        x0 = col * self.width // self.cols
        x1 = (col + 1) * self.width // self.cols
        y0 = row * self.height // self.rows
        y1 = (row + 1) * self.height // self.rows
        return x0, y0, x1, y1

    def block_slices(self, row: int, col: int) -> tuple[slice, slice]:
        x0, y0, x1, y1 = self.block_rect(row, col)
        return slice(y0, y1), slice(x0, x1)

    def block_area(self, row: int, col: int) -> int:
        x0, y0, x1, y1 = self.block_rect(row, col)
        return (x1 - x0) * (y1 - y0)

    def iter_blocks(self):
        for r in range(self.rows):
            for c in range(self.cols):
                yield r, c

    def to_dict(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockGrid":
        return cls(rows=int(d["rows"]), cols=int(d["cols"]), width=int(d["width"]), height=int(d["height"]))


@dataclass(frozen=True)
class BlockRef:
    """Address of one block within a grid."""

    grid: BlockGrid
    row: int
    col: int

    def __post_init__(self):
        if not (0 <= self.row < self.grid.rows and 0 <= self.col < self.grid.cols):
            raise DimensionError(f"block ({self.row}, {self.col}) outside grid")

    def rect(self) -> tuple[int, int, int, int]:
        return self.grid.block_rect(self.row, self.col)


@dataclass(frozen=True)
class PolygonAnnotation:
    """Closed polygon in image pixel coordinates. Later z_order paints over
    earlier (painter's order); vertices may be fractional."""

    vertices: tuple[tuple[float, float], ...]
    class_id: int
    z_order: int = 0

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise GeometryError(f"polygon needs >= 3 vertices, got {len(self.vertices)}")
        object.__setattr__(
            self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
        )


def decompose_grid(width: int, height: int, rows: int, cols: int) -> BlockGrid:
    """Tile a width x height image into rows x cols blocks."""
    return BlockGrid(rows=rows, cols=cols, width=width, height=height)


def _fill_even_odd(canvas: np.ndarray, vertices, value: int) -> None:
    """Scanline even-odd fill sampled at pixel centers (x+0.5, y+0.5)."""
    h, w = canvas.shape
    ys = [v[1] for v in vertices]
    # Rows whose center could fall inside the polygon's vertical extent.
    y_lo = max(0, math.floor(min(ys) - 0.5))
    y_hi = min(h - 1, math.ceil(max(ys)))
    n = len(vertices)
    for y in range(y_lo, y_hi + 1):
        cy = y + 0.5
        xs = []
        for i in range(n):
            x1, y1 = vertices[i]
            x2, y2 = vertices[(i + 1) % n]
            if y1 == y2:
                continue
            # Half-open rule [min, max) counts each vertex crossing once.
            if min(y1, y2) <= cy < max(y1, y2):
                t = (cy - y1) / (y2 - y1)
                xs.append(x1 + t * (x2 - x1))
        if len(xs) < 2:
            continue
        xs.sort()
        for i in range(0, len(xs) - 1, 2):
            a, b = xs[i], xs[i + 1]
            # Pixel centers x+0.5 in [a, b).
            lo = max(0, math.ceil(a - 0.5))
            hi = min(w - 1, math.ceil(b - 0.5) - 1)
            if hi >= lo:
                canvas[y, lo : hi + 1] = value


def rasterize(
    polygons, width: int, height: int, palette: Palette
) -> LabelMap:
    """Rasterize polygons into a label map.

    Fill rule is even-odd scanline with pixel-center sampling; overlapping
    polygons resolve by z_order (highest wins), ties by input order. Pixels
    covered by no polygon are void.
    """
    canvas = np.full((height, width), VOID, dtype=np.uint8)
    for poly in sorted(polygons, key=lambda p: p.z_order):
        if not (0 <= poly.class_id < palette.k):
            raise PaletteError(f"class id {poly.class_id} outside palette of {palette.k} classes")
        _fill_even_odd(canvas, poly.vertices, poly.class_id)
    return LabelMap(canvas)


def connected_components(label_map: LabelMap) -> tuple[np.ndarray, int]:
    """4-connected components of equal non-void label.

    Returns (segment id raster, count). Segment ids are 1..count; void
    pixels get 0 and belong to no segment.
    """
    labels = label_map.labels
    seg = np.zeros(labels.shape, dtype=np.int32)
    next_id = 0
    for cid in np.unique(labels):
        if cid == VOID:
            continue
        comp, n = ndimage.label(labels == cid, structure=_CROSS)
        if n:
            mask = comp > 0
            seg[mask] = comp[mask] + next_id
            next_id += n
    return seg, next_id


def count_segments(label_map: LabelMap) -> int:
    return connected_components(label_map)[1]


def _index_color_table() -> bytes:
    """Fixed 256-entry RGB table for indexed label PNGs.

    Hues step by the golden angle so adjacent class ids get distinct
    colors; the void index 255 is black. Pixel values stay class ids.
    """
    import colorsys

    table = bytearray()
    for i in range(256):
        if i == VOID:
            table += bytes((0, 0, 0))
        else:
            h = (i * 0.61803398875) % 1.0
            r, g, b = colorsys.hsv_to_rgb(h, 0.65, 0.95)
            table += bytes((int(r * 255), int(g * 255), int(b * 255)))
    return bytes(table)


_COLOR_TABLE = None


def encode_label_map(label_map: LabelMap) -> bytes:
    """Encode to a single-channel 8-bit indexed PNG (pixel value = class id,
    255 = void)."""
    global _COLOR_TABLE
    if _COLOR_TABLE is None:
        _COLOR_TABLE = _index_color_table()
    img = Image.fromarray(np.asarray(label_map.labels), mode="P")
    img.putpalette(_COLOR_TABLE)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_label_map(data: bytes) -> LabelMap:
    """Decode label-map bytes written by encode_label_map.

    Accepts any single-channel 8-bit image (indexed or grayscale); rejects
    multi-channel or deeper formats.
    """
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise CodecError(f"not a decodable image: {exc}") from exc
    if img.mode not in ("P", "L"):
        raise CodecError(f"expected single-channel 8-bit image, got mode {img.mode!r}")
    return LabelMap(np.asarray(img, dtype=np.uint8))


def save_label_map(label_map: LabelMap, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_label_map(label_map))


def load_label_map(path) -> LabelMap:
    with open(path, "rb") as f:
        return decode_label_map(f.read())


def apply_void_mask(label_map: LabelMap, mask: np.ndarray) -> LabelMap:
    """Void out masked pixels (mask True => void); others unchanged."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != label_map.labels.shape:
        raise DimensionError(f"mask shape {mask.shape} != map shape {label_map.labels.shape}")
    out = label_map.labels.copy()
    out[mask] = VOID
    return LabelMap(out)
