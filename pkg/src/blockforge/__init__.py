"""Block-based image annotation: decompose images into blocks, crowdsource
block labels with quality control, and inpaint the rest with
uncertainty-scored predictions."""

from .raster import (
    VOID,
    BlockGrid,
    BlockRef,
    ImageRaster,
    LabelMap,
    Palette,
    PolygonAnnotation,
    apply_void_mask,
    connected_components,
    decode_label_map,
    decompose_grid,
    encode_label_map,
    rasterize,
)
from .selection import (
    PixelBudget,
    SelectionPlan,
    boundary_band_mask,
    checkerboard,
    pseudo_checkerboard,
    random_blocks,
    realized_budget,
    recommend_block_size,
)
from .metrics import (
    ConfusionMatrix,
    MetricReport,
    class_balanced_error,
    confusion,
    evaluate_pair,
    miou,
    pixel_agreement,
    segment_count_ratio,
    small_region_error,
)
from .workflow import (
    AnnotationTask,
    PayoutPolicy,
    QcPolicy,
    Submission,
    TaskStore,
    Verdict,
    compute_payout,
    merge_blocks,
    time_to_blocks,
    validate_submission,
)
from .inpaint import (
    HintVolume,
    SamplerConfig,
    UncertaintyResult,
    build_hint_volume,
    estimate_uncertainty,
    inpaint_image,
    reference_predictor,
    sample_training_hints,
    threshold_labels,
)
from .datasets import DatasetManifest, Workspace

__version__ = "0.1.0"
