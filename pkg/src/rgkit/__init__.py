"""rgkit: regional grounding toolkit for layout-conditioned generation.

Provides token-grid region reorganization from bounding-box layouts, grounded
key/value sequence encoding with box indicators, a regional cross-attention
layer with a per-token reference path, an analytic attention cost model, and
the crop-embedding / mask-IoU evaluation pipelines.
"""

__version__ = "0.1.0"

from .layout import (
    BoundingBox,
    DescriptionTuple,
    Layout,
    TokenGrid,
    Violation,
    box_area_fraction,
    box_iou,
    box_token_mask,
    crop_layout,
    rasterize_box,
    validate_layout,
)
from .regions import (
    Region,
    RegionPartition,
    reorganize,
    select_descriptions,
    select_visual,
)
from .grounding import (
    GroundedSequence,
    HashEmbedder,
    NullEmbedding,
    TextEmbedder,
    encode_region,
    sinusoidal_box_encoding,
    tokenize,
)
from .attention import (
    AttentionOutput,
    AttentionState,
    FeatureMap,
    attention_kernel,
    naive_forward,
    regional_forward,
)
from .cost import (
    AttentionConfig,
    CostReport,
    benchmark,
    config_from_layout,
    flops,
    two_object_config,
)
from .metrics import (
    BoxFillSegmenter,
    EmbedderBackend,
    FileEmbedder,
    FileSegmenter,
    ImageRaster,
    MetricReport,
    MockEmbedder,
    SegmenterBackend,
    circumscribed_rectangle,
    corpus_mean,
    crop,
    crop_clip_score,
    pearson,
    sam_iou_score,
    size_filter,
)
from .textstats import (
    TextStats,
    bucket_descriptions,
    complexity_bucket,
    gunning_fog,
    length_bucket,
    text_stats,
)

import types as _types

__all__ = sorted(
    name
    for name, value in list(globals().items())
    if not name.startswith("_") and not isinstance(value, _types.ModuleType)
)
