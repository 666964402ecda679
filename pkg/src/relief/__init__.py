"""Region proposals extracted directly from convolutional feature maps."""

from .evaluation import (
    BenchReport,
    MissingProposalsError,
    PlacementFailedError,
    RecallCurve,
    SynthScene,
    bench,
    iou,
    recall_at,
    recall_curve,
    synth_scene,
)
from .geometry import BOX_KINDS, BoxPx, DegenerateBoxError, GeometryMeta
from .pipeline import (
    Cluster,
    EmptyLevelError,
    IntegrateMap,
    LevelPartition,
    PipelineConfig,
    big_roi,
    build_integrate_map,
    cluster_to_box,
    extract_clusters,
    generate_proposals,
    local_search,
    separate_levels,
)
from .refine import RefineConfig, RegressorSpec, apply_regressor, recursive_refine
from .tensor_io import (
    AnnotationRecord,
    AnnotationSet,
    BadMagicError,
    FeatureStack,
    MissingSidecarError,
    NonFiniteValueError,
    ProposalSet,
    TensorIOError,
    TruncatedPayloadError,
    load_annotations,
    load_feature_stack,
    load_proposals,
    save_annotations,
    save_feature_stack,
    save_proposals,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AnnotationSet",
    "BOX_KINDS",
    "BadMagicError",
    "BenchReport",
    "BoxPx",
    "Cluster",
    "DegenerateBoxError",
    "EmptyLevelError",
    "FeatureStack",
    "GeometryMeta",
    "IntegrateMap",
    "LevelPartition",
    "MissingProposalsError",
    "MissingSidecarError",
    "NonFiniteValueError",
    "PipelineConfig",
    "PlacementFailedError",
    "ProposalSet",
    "RecallCurve",
    "RefineConfig",
    "RegressorSpec",
    "SynthScene",
    "TensorIOError",
    "TruncatedPayloadError",
    "apply_regressor",
    "bench",
    "big_roi",
    "build_integrate_map",
    "cluster_to_box",
    "extract_clusters",
    "generate_proposals",
    "iou",
    "local_search",
    "recall_at",
    "recall_curve",
    "recursive_refine",
    "save_annotations",
    "save_feature_stack",
    "save_proposals",
    "load_annotations",
    "load_feature_stack",
    "load_proposals",
    "separate_levels",
    "synth_scene",
]
