"""Block selection strategies under a pixel budget.

Selection plans pick which grid blocks get annotated (or serve as hints).
The pseudo-checkerboard strategy spaces blocks evenly along a serpentine
(boustrophedon) traversal so that a 50% budget on an even-width grid
degenerates to the exact checkerboard pattern.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, NoFeasibleGridError
from .raster import VOID, BlockGrid, LabelMap, connected_components

STRATEGIES = ("checkerboard", "pseudo_checkerboard", "random", "all", "none")

# Comfortable segments-per-block range for crowd workers.
SEGMENTS_PER_BLOCK_RANGE = (3.0, 6.0)


@dataclass(frozen=True)
class SelectionPlan:
    grid: BlockGrid
    selected: frozenset[tuple[int, int]]
    strategy: str
    budget_fraction: float
    phase: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for r, c in self.selected:
            if not (0 <= r < self.grid.rows and 0 <= c < self.grid.cols):
                raise DimensionError(f"selected block ({r}, {c}) outside grid")

    def mask(self) -> np.ndarray:
        """Boolean (h, w) raster, True inside selected blocks."""
        out = np.zeros((self.grid.height, self.grid.width), dtype=bool)
        for r, c in self.selected:
            ys, xs = self.grid.block_slices(r, c)
            out[ys, xs] = True
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "grid": self.grid.to_dict(),
                "strategy": self.strategy,
                "budget_fraction": self.budget_fraction,
                "phase": self.phase,
                "seed": self.seed,
                "selected": sorted([r, c] for r, c in self.selected),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SelectionPlan":
        d = json.loads(text)
        return cls(
            grid=BlockGrid.from_dict(d["grid"]),
            selected=frozenset((int(r), int(c)) for r, c in d["selected"]),
            strategy=d["strategy"],
            budget_fraction=float(d["budget_fraction"]),
            phase=int(d.get("phase") or 0),
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class PixelBudget:
    fraction: float

    def __post_init__(self):
        if not (0.0 <= self.fraction <= 1.0):
            raise ValueError(f"budget fraction must be in [0, 1], got {self.fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def serpentine_to_block(index: int, grid: BlockGrid) -> tuple[int, int]:
    """Map a serpentine traversal index to (row, col): even rows run left to
    right, odd rows right to left."""
    r, j = divmod(index, grid.cols)
    c = j if r % 2 == 0 else grid.cols - 1 - j
    return r, c


def checkerboard(grid: BlockGrid, parity: int = 0) -> SelectionPlan:
    """Select block (r, c) iff (r + c) mod 2 == parity."""
    if parity not in (0, 1):
        raise ValueError("parity must be 0 or 1")
    selected = frozenset(
        (r, c) for r, c in grid.iter_blocks() if (r + c) % 2 == parity
    )
    return SelectionPlan(
        grid=grid,
        selected=selected,
        strategy="checkerboard",
        budget_fraction=len(selected) / grid.block_count,
        phase=parity,
    )


def pseudo_checkerboard(grid: BlockGrid, budget_fraction: float, phase: int = 0) -> SelectionPlan:
    """Select n = round(budget_fraction * M) blocks evenly spaced along the
    serpentine traversal: indices {(phase + floor(k*M/n)) mod M}."""
    PixelBudget(budget_fraction)
    m = grid.block_count
    n = min(_round_half_up(budget_fraction * m), m)
    if n == 0:
        selected: frozenset[tuple[int, int]] = frozenset()
    else:
        selected = frozenset(
            serpentine_to_block((phase + k * m // n) % m, grid) for k in range(n)
        )
    return SelectionPlan(
        grid=grid,
        selected=selected,
        strategy="pseudo_checkerboard",
        budget_fraction=budget_fraction,
        phase=phase,
    )


def random_blocks(grid: BlockGrid, budget_fraction: float, seed: int) -> SelectionPlan:
    """Uniform sample of n = round(budget_fraction * M) blocks without
    replacement; deterministic given seed."""
    PixelBudget(budget_fraction)
    m = grid.block_count
    n = min(_round_half_up(budget_fraction * m), m)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(m, size=n, replace=False)
    selected = frozenset((int(i) // grid.cols, int(i) % grid.cols) for i in chosen)
    return SelectionPlan(
        grid=grid,
        selected=selected,
        strategy="random",
        budget_fraction=budget_fraction,
        seed=seed,
    )


def all_blocks(grid: BlockGrid) -> SelectionPlan:
    return SelectionPlan(
        grid=grid,
        selected=frozenset(grid.iter_blocks()),
        strategy="all",
        budget_fraction=1.0,
    )


def no_blocks(grid: BlockGrid) -> SelectionPlan:
    return SelectionPlan(grid=grid, selected=frozenset(), strategy="none", budget_fraction=0.0)


def make_plan(
    grid: BlockGrid,
    strategy: str,
    budget_fraction: float = 0.5,
    phase: int = 0,
    seed: int = 0,
) -> SelectionPlan:
    """Dispatch helper used by the CLI and service."""
    strategy = strategy.replace("-", "_")
    if strategy == "checkerboard":
        return checkerboard(grid, parity=phase % 2)
    if strategy == "pseudo_checkerboard":
        return pseudo_checkerboard(grid, budget_fraction, phase)
    if strategy == "random":
        return random_blocks(grid, budget_fraction, seed)
    if strategy == "all":
        return all_blocks(grid)
    if strategy == "none":
        return no_blocks(grid)
    raise ValueError(f"unknown strategy {strategy!r}")


def boundary_band_mask(label_map: LabelMap, plan: SelectionPlan, band: int = 10) -> np.ndarray:
    """True at pixels inside selected blocks within Chebyshev distance
    `band` of a differing non-void label in the same block.

    Block edges do not count as boundaries, and void pixels neither mark
    nor act as differing neighbors. Blocks with uniform labels contribute
    no true pixels.
    """
    if (label_map.height, label_map.width) != (plan.grid.height, plan.grid.width):
        raise DimensionError(
            f"map {label_map.width}x{label_map.height} does not match grid image "
            f"{plan.grid.width}x{plan.grid.height}"
        )
    out = np.zeros(label_map.labels.shape, dtype=bool)
    for r, c in plan.selected:
        ys, xs = plan.grid.block_slices(r, c)
        sub = label_map.labels[ys, xs]
        values = np.unique(sub[sub != VOID])
        if len(values) < 2:
            continue
        for v in values:
            differing = (sub != v) & (sub != VOID)
            # Chessboard distance from every pixel to the nearest differing one.
            dist = ndimage.distance_transform_cdt(~differing, metric="chessboard")
            out[ys, xs] |= (sub == v) & (dist <= band)
    return out


def realized_budget(plan: SelectionPlan) -> PixelBudget:
    """Fraction of image pixels covered by the selected blocks."""
    area = sum(plan.grid.block_area(r, c) for r, c in plan.selected)
    return PixelBudget(area / (plan.grid.width * plan.grid.height))


def _mean_segments_per_block(sample_maps, grid: BlockGrid) -> float:
    """Mean per-block component count; a segment spanning several blocks
    counts once in each (partial segments count)."""
    total = 0
    blocks = 0
    for m in sample_maps:
        for r, c in grid.iter_blocks():
            ys, xs = grid.block_slices(r, c)
            sub = LabelMap(np.ascontiguousarray(m.labels[ys, xs]))
            total += connected_components(sub)[1]
            blocks += 1
    return total / blocks


def recommend_block_size(
    sample_maps, target_segments_per_block: float = 4.5
) -> tuple[int, int]:
    """Pick a grid whose mean segments-per-block lands in the comfortable
    [3, 6] range, estimated from fully labelled sample maps.

    Candidates are square-ish grids (|rows - cols| <= 1). Among feasible
    grids the squarest, finest one wins (smaller blocks keep tasks cheap);
    if none lands in the range but the single-block grid reaches at least
    3 segments, the grid nearest the target is returned instead.
    """
    maps = list(sample_maps)
    if not maps:
        raise NoFeasibleGridError("need at least one fully labelled sample map")
    width = min(m.width for m in maps)
    height = min(m.height for m in maps)
    for m in maps:
        if (m.width, m.height) != (width, height):
            raise DimensionError("sample maps must share dimensions")

    lo, hi = SEGMENTS_PER_BLOCK_RANGE
    max_total = max(connected_components(m)[1] for m in maps)
    # Means fall off roughly as 1/blocks; no point searching much past the
    # grid where even 4x partial-count inflation cannot reach the floor.
    k_cap = min(height, width, math.ceil(math.sqrt(max_total * 4.0 / lo)) + 2)

    candidates: list[tuple[int, int]] = []
    for k in range(1, k_cap + 1):
        for rows, cols in ((k, k), (k, k + 1), (k + 1, k)):
            if rows <= height and cols <= width:
                candidates.append((rows, cols))

    means = {rc: _mean_segments_per_block(maps, BlockGrid(rc[0], rc[1], width, height)) for rc in candidates}
    feasible = [rc for rc in candidates if lo <= means[rc] <= hi]
    if feasible:
        # Squarest first, then most blocks (finest), then more rows.
        return min(feasible, key=lambda rc: (abs(rc[0] - rc[1]), -rc[0] * rc[1], -rc[0]))
    if means[(1, 1)] < lo:
        raise NoFeasibleGridError(
            f"even a single block yields {means[(1, 1)]:.2f} segments, below {lo}"
        )
    return min(candidates, key=lambda rc: (abs(means[rc] - target_segments_per_block), abs(rc[0] - rc[1]), rc[0] * rc[1]))
