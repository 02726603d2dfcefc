"""Key-frame selection and tagging for image sequences.

The pipeline scores frame sharpness (variance of the Laplacian response),
drops low-quality frames, removes structurally redundant neighbors (SSIM),
tags frames with rule-based scene categories from object detections, and
records everything in per-sequence YAML manifests that support tag queries.
"""

from .detections import Detection, DetectorConfig, fetch_detections, filter_by_objectness
from .errors import (
    ConfigError,
    DimensionError,
    InputError,
    LabelParseError,
    ManifestError,
    ProtocolError,
    ServiceError,
    ValidationError,
    VdpError,
)
from .filtering import (
    FilterConfig,
    FilterOutcome,
    QualityScore,
    VolStats,
    run_pipeline,
    score_frames,
    ssim_filter,
    sweep,
    vol_filter,
)
from .frames import FrameRef, list_frames, load_gray
from .imageproc import SsimParams, laplacian, ssim, to_grayscale, variance, vol
from .kernels import BACKEND
from .manifest import (
    Query,
    QueryHit,
    SequenceManifest,
    build_manifest,
    query,
    read_manifest,
    write_manifest,
)
from .monitoring import (
    BatchMetrics,
    DriftPolicy,
    DriftVerdict,
    batch_metrics,
    drift_check,
    expose_metrics,
    parse_metrics,
)
from .scenes import (
    GroupCounts,
    RuleSet,
    SceneCategory,
    SequenceCategorization,
    classify_frame,
    classify_sequence,
    group_counts,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BatchMetrics",
    "ConfigError",
    "Detection",
    "DetectorConfig",
    "DimensionError",
    "DriftPolicy",
    "DriftVerdict",
    "FilterConfig",
    "FilterOutcome",
    "FrameRef",
    "GroupCounts",
    "InputError",
    "LabelParseError",
    "ManifestError",
    "ProtocolError",
    "QualityScore",
    "Query",
    "QueryHit",
    "RuleSet",
    "SceneCategory",
    "SequenceCategorization",
    "SequenceManifest",
    "ServiceError",
    "SsimParams",
    "ValidationError",
    "VdpError",
    "VolStats",
    "batch_metrics",
    "build_manifest",
    "classify_frame",
    "classify_sequence",
    "drift_check",
    "expose_metrics",
    "fetch_detections",
    "filter_by_objectness",
    "group_counts",
    "laplacian",
    "list_frames",
    "load_gray",
    "parse_metrics",
    "query",
    "read_manifest",
    "run_pipeline",
    "score_frames",
    "ssim",
    "ssim_filter",
    "sweep",
    "to_grayscale",
    "variance",
    "vol",
    "vol_filter",
    "write_manifest",
]
