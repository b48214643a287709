"""Label inpainting for block-annotated images.

A partial label map becomes a one-hot hint volume; a stochastic predictor
is sampled g times; the per-pixel mean distribution, per-class sample
standard deviation, and the deviation at the predicted class give the
uncertainty map used for relative thresholding. Hinted pixels are
copy-pasted into the output verbatim and bypass thresholding.

The bundled reference predictor is a subsampled nearest-neighbor voter in
(position, color) feature space: dropping hints at random per trial plays
the role of inference-time dropout, so disagreement across trials measures
how fragile each prediction is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, PredictorError, SupportViolationError
from .raster import VOID, ImageRaster, LabelMap
from .selection import SelectionPlan

# ProbField: (h, w, K) float64, each pixel a distribution over K classes.
ProbField = np.ndarray

# Predictor: (image, hints, trial_seed) -> ProbField. Same seed, same
# output; different trial seeds may differ (the dropout analog).
PredictorContract = Callable[[ImageRaster, "HintVolume", int], ProbField]

_DISTRIBUTION_ATOL = 1e-6
_ZERO_DISTANCE_WEIGHT = 1e6

DEFAULT_FEATURE_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class HintVolume:
    """(h, w, K) one-hot known-label tensor: exactly one 1 in the class
    column of each hinted pixel, all zeros where the label is unknown."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise DimensionError(f"hint volume must be (h, w, K), got {v.shape}")
        sums = v.sum(axis=2)
        if not np.isin(sums, (0, 1)).all():
            raise ValueError("each hint pixel column must sum to 0 or 1")
        v.setflags(write=False)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    def hinted_mask(self) -> np.ndarray:
        return self.values.sum(axis=2) > 0


@dataclass(frozen=True)
class SamplerConfig:
    g: int = 8
    seed: int = 0
    rho: float = 0.5

    def __post_init__(self):
        if self.g < 2:
            raise ValueError("need g >= 2 trials for a sample standard deviation")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("stochasticity rate rho must be in (0, 1]")


@dataclass(frozen=True)
class UncertaintyResult:
    mu: ProbField          # per-pixel mean distribution over trials
    u_vec: np.ndarray      # per-pixel per-class sample std (ddof=1)
    u: np.ndarray          # std at the predicted (argmax-mu) class
    predicted: LabelMap


def build_hint_volume(partial: LabelMap, k: int) -> HintVolume:
    """One-hot encode the non-void pixels of a partial label map."""
    labels = partial.labels
    nonvoid = labels != VOID
    if (labels[nonvoid] >= k).any():
        raise ValueError(f"partial map contains labels >= {k}")
    values = np.zeros((partial.height, partial.width, k), dtype=np.float64)
    ys, xs = np.nonzero(nonvoid)
    values[ys, xs, labels[ys, xs]] = 1.0
    return HintVolume(values)


def sample_training_hints(annotated_blocks, seed: int) -> frozenset:
    """Pick floor(n/2) annotated blocks uniformly at random to serve as
    training-time hints; the full annotated set stays the target."""
    blocks = sorted(annotated_blocks)
    if not blocks:
        raise ValueError("need at least one annotated block")
    rng = np.random.default_rng(seed)
    n = len(blocks) // 2
    idx = rng.choice(len(blocks), size=n, replace=False)
    return frozenset(blocks[int(i)] for i in idx)


def _trial_seed(seed: int, trial_index: int) -> int:
    # Stable hash of (seed, trial index); reproducible regardless of
    # execution order so trials can run in parallel.
    return int(np.random.SeedSequence((seed, trial_index)).generate_state(1)[0])


def _check_prob_field(p: ProbField, shape: tuple[int, int], k: int) -> None:
    if p.shape != (shape[0], shape[1], k):
        raise PredictorError(f"predictor returned shape {p.shape}, expected {(shape[0], shape[1], k)}")
    if (p < 0).any():
        raise PredictorError("predictor returned negative probabilities")
    sums = p.sum(axis=2)
    if not np.allclose(sums, 1.0, atol=_DISTRIBUTION_ATOL, rtol=0.0):
        raise PredictorError("predictor distributions do not sum to 1")


def estimate_uncertainty(
    image: ImageRaster,
    hints: HintVolume,
    predictor: PredictorContract,
    cfg: SamplerConfig,
) -> UncertaintyResult:
    """Run g stochastic predictor trials and reduce them to the mean
    distribution, the per-class sample standard deviation (divisor g-1),
    and the scalar uncertainty at each pixel's predicted class."""
    if (image.height, image.width) != (hints.height, hints.width):
        raise DimensionError("image and hint volume dimensions differ")
    k = hints.k
    trials = np.empty((cfg.g, image.height, image.width, k), dtype=np.float64)
    for t in range(cfg.g):
        p = np.asarray(predictor(image, hints, _trial_seed(cfg.seed, t)), dtype=np.float64)
        _check_prob_field(p, (image.height, image.width), k)
        trials[t] = p
    mu = trials.mean(axis=0)
    u_vec = trials.std(axis=0, ddof=1)
    # A deterministic predictor must yield u == 0 exactly; np.std leaves
    # ~1e-17 residue on identical values because the mean rounds.
    u_vec[(trials == trials[0]).all(axis=0)] = 0.0
    predicted = mu.argmax(axis=2)
    u = np.take_along_axis(u_vec, predicted[:, :, None], axis=2)[:, :, 0]
    return UncertaintyResult(
        mu=mu,
        u_vec=u_vec,
        u=u,
        predicted=LabelMap(predicted.astype(np.uint8)),
    )


def threshold_labels(
    result: UncertaintyResult,
    rel_threshold: float,
    exclude_from_max: np.ndarray | None = None,
) -> tuple[LabelMap, float]:
    """Keep pixels whose uncertainty is at most rel_threshold times the
    image maximum (taken over pixels outside exclude_from_max, typically
    the hinted ones); dropped pixels become void.

    Returns the partial label map and the kept fraction (coverage).
    """
    if not (0.0 <= rel_threshold <= 1.0):
        raise ValueError("relative threshold must be in [0, 1]")
    u = result.u
    basis = u if exclude_from_max is None else u[~exclude_from_max]
    u_max = float(basis.max()) if basis.size else 0.0
    if u_max == 0.0:
        keep = np.ones(u.shape, dtype=bool)
    else:
        keep = u <= rel_threshold * u_max
    labels = np.where(keep, result.predicted.labels, VOID).astype(np.uint8)
    return LabelMap(labels), float(keep.mean())


@dataclass(frozen=True)
class InpaintResult:
    label_map: LabelMap
    coverage: float           # labelled fraction over all pixels
    coverage_unhinted: float  # kept fraction over unhinted pixels only
    uncertainty: np.ndarray   # per-pixel u, hinted pixels included


def inpaint_image(
    image: ImageRaster,
    partial: LabelMap,
    plan: SelectionPlan,
    predictor: PredictorContract,
    cfg: SamplerConfig,
    rel_threshold: float,
    k: int,
) -> InpaintResult:
    """Extend a block-partial label map to a dense one.

    Hinted (non-void) pixels are copied through exactly; the rest take the
    thresholded prediction or void. The partial map's support must lie
    inside the plan's selected blocks.
    """
    if (partial.height, partial.width) != (image.height, image.width):
        raise DimensionError("partial map and image dimensions differ")
    hinted = partial.nonvoid_mask()
    if (hinted & ~plan.mask()).any():
        raise SupportViolationError("partial map has labels outside the selected blocks")

    hints = build_hint_volume(partial, k)
    result = estimate_uncertainty(image, hints, predictor, cfg)

    unhinted = ~hinted
    if unhinted.any():
        u_max = float(result.u[unhinted].max())
    else:
        u_max = 0.0
    keep = np.ones(result.u.shape, dtype=bool) if u_max == 0.0 else result.u <= rel_threshold * u_max

    out = np.where(hinted, partial.labels, np.where(keep, result.predicted.labels, VOID))
    out_map = LabelMap(out.astype(np.uint8))
    coverage = float(out_map.nonvoid_mask().mean())
    coverage_unhinted = float(keep[unhinted].mean()) if unhinted.any() else 1.0
    return InpaintResult(
        label_map=out_map,
        coverage=coverage,
        coverage_unhinted=coverage_unhinted,
        uncertainty=result.u,
    )


def reference_predictor(
    k_neighbors: int = 9,
    feature_weights: tuple[float, float, float, float, float] = DEFAULT_FEATURE_WEIGHTS,
    rho: float = 0.5,
) -> PredictorContract:
    """Desk-scale stand-in for a neural inpainting model.

    Each trial keeps every hinted pixel independently with probability rho
    (seeded per trial), then labels every pixel by an inverse-distance
    weighted vote of its k nearest kept hints in normalized
    (x/w, y/h, r/255, g/255, b/255) feature space. A trial with no kept
    hints falls back to the uniform distribution.
    """
    weights = np.asarray(feature_weights, dtype=np.float64)
    if weights.shape != (5,):
        raise ValueError("feature_weights must have 5 entries (x, y, r, g, b)")

    def _features(image: ImageRaster) -> np.ndarray:
        h, w = image.height, image.width
        ys, xs = np.mgrid[0:h, 0:w]
        rgb = image.pixels.astype(np.float64) / 255.0
        feats = np.stack(
            [xs / w, ys / h, rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]], axis=2
        )
        return feats.reshape(-1, 5) * weights

    def predict(image: ImageRaster, hints: HintVolume, trial_seed: int) -> ProbField:
        h, w, k = hints.height, hints.width, hints.k
        feats = _features(image)
        hinted = hints.hinted_mask().reshape(-1)
        hint_idx = np.flatnonzero(hinted)
        rng = np.random.default_rng(trial_seed)
        if hint_idx.size:
            kept = hint_idx[rng.random(hint_idx.size) < rho]
        else:
            kept = hint_idx
        if kept.size == 0:
            return np.full((h, w, k), 1.0 / k, dtype=np.float64)

        classes = hints.values.reshape(-1, k)[kept].argmax(axis=1)
        tree = cKDTree(feats[kept])
        q = min(k_neighbors, kept.size)
        dist, idx = tree.query(feats, k=q)
        dist = dist.reshape(len(feats), q)
        idx = idx.reshape(len(feats), q)
        vote_w = np.minimum(1.0 / np.maximum(dist, 1e-12), _ZERO_DISTANCE_WEIGHT)
        out = np.zeros((len(feats), k), dtype=np.float64)
        neighbor_class = classes[idx]
        for j in range(q):
            np.add.at(out, (np.arange(len(feats)), neighbor_class[:, j]), vote_w[:, j])
        out /= out.sum(axis=1, keepdims=True)
        return out.reshape(h, w, k)

    return predict
