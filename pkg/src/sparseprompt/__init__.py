"""Point-prompted few-shot segmentation with reference-conditioned sparsification.

The pipeline turns a handful of annotated reference images into point
prompts for a promptable segmenter: dense feature matching proposes
candidate locations, convex-hull pruning drops boundary stragglers, the
reference images vote for a prompt-grid density, and a grid sparsifier
thins the survivors before the segmenter runs. A morphological
open/close pass cleans the returned mask.

Model access goes through two small backend interfaces (encoder,
segmenter) with oracle, recorded, and remote HTTP implementations, so
the geometry and selection logic stays testable without any network.
"""

from .backend import (
    BackendError,
    BackendInfo,
    EncoderBackend,
    OracleSegmenter,
    OracleSpec,
    PatchIntensityEncoder,
    RecordingEncoder,
    RecordingSegmenter,
    ReplayEncoder,
    ReplaySegmenter,
    SegmenterBackend,
    TransportError,
    image_digest,
)
from .core import (
    BinaryMask,
    DimensionMismatchError,
    EmptyPointSetError,
    Episode,
    FeatureGrid,
    Image,
    ImagePixels,
    Point,
    PointSet,
    iou,
    point_in_mask,
)
from .density import (
    DEFAULT_CANDIDATES,
    DensityCandidates,
    DensityVerdict,
    filter_foreground,
    lookup_reference_density,
    sample_reference_grid,
    score_density,
)
from .eval import (
    DatasetResult,
    EpisodeResult,
    EpisodeRow,
    EpisodeTrace,
    PipelineConfig,
    PipelineError,
    SparsifyMode,
    StudyRow,
    density_sensitivity_study,
    evaluate_dataset,
    point_accuracy,
    run_episode,
    summarize_rows,
    write_class_summary_csv,
    write_results_csv,
    write_study_csv,
)
from .geometry import (
    GridSpec,
    Hull,
    convex_hull,
    global_centroid,
    load_points,
    prune_boundary,
    save_points,
    sparsify,
)
from .manifest import EpisodeRecord, ManifestError, load_manifest
from .matching import (
    FeatureMap,
    MatchConfig,
    MatchingError,
    downsample_mask,
    feature_map_from_bytes,
    feature_map_to_bytes,
    load_feature_map,
    match_points,
    project_to_image,
    save_feature_map,
)
from .pngio import load_image, load_mask, save_image, save_mask
from .refine import (
    StructuringElement,
    close_mask,
    dilate,
    erode,
    open_mask,
    refine_mask,
)
from .remote import RemoteEncoder, RemoteSegmenter, check_health
from .synthetic import make_records, make_scene, write_bundle

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BackendInfo",
    "BinaryMask",
    "DEFAULT_CANDIDATES",
    "DatasetResult",
    "DensityCandidates",
    "DensityVerdict",
    "DimensionMismatchError",
    "EmptyPointSetError",
    "EncoderBackend",
    "Episode",
    "EpisodeRecord",
    "EpisodeResult",
    "EpisodeRow",
    "EpisodeTrace",
    "FeatureGrid",
    "FeatureMap",
    "GridSpec",
    "Hull",
    "Image",
    "ImagePixels",
    "ManifestError",
    "MatchConfig",
    "MatchingError",
    "OracleSegmenter",
    "OracleSpec",
    "PatchIntensityEncoder",
    "PipelineConfig",
    "PipelineError",
    "Point",
    "PointSet",
    "RecordingEncoder",
    "RecordingSegmenter",
    "RemoteEncoder",
    "RemoteSegmenter",
    "ReplayEncoder",
    "ReplaySegmenter",
    "SegmenterBackend",
    "SparsifyMode",
    "StructuringElement",
    "StudyRow",
    "TransportError",
    "check_health",
    "close_mask",
    "convex_hull",
    "density_sensitivity_study",
    "dilate",
    "downsample_mask",
    "erode",
    "evaluate_dataset",
    "feature_map_from_bytes",
    "feature_map_to_bytes",
    "filter_foreground",
    "global_centroid",
    "image_digest",
    "iou",
    "load_feature_map",
    "load_image",
    "load_manifest",
    "load_mask",
    "load_points",
    "lookup_reference_density",
    "make_records",
    "make_scene",
    "match_points",
    "open_mask",
    "point_accuracy",
    "point_in_mask",
    "project_to_image",
    "prune_boundary",
    "refine_mask",
    "run_episode",
    "sample_reference_grid",
    "save_feature_map",
    "save_image",
    "save_mask",
    "save_points",
    "score_density",
    "sparsify",
    "summarize_rows",
    "write_bundle",
    "write_class_summary_csv",
    "write_results_csv",
    "write_study_csv",
]
