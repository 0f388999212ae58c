"""Conversational group detection and dyad analysis from frame annotations.

The package estimates where people are looking (a time-weighted fusion of
head and torso orientation), clusters those attention points into
conversational groups with a temporally stabilized k-means, scores pairwise
engagement with a rule-based state machine, and predicts a dyad's next
speaking state with a small LSTM built on numpy.
"""

from .annotation_io import (
    ACTIVITY_NAMES,
    ActivityRecord,
    AnnotationFormatError,
    FrameSequence,
    Group,
    GroupingTimeline,
    ParticipantFrame,
    read_activities,
    read_frames,
    read_groundtruth,
    write_activities,
    write_frames,
    write_groups,
)
from .attention import (
    AttentionParams,
    AttentionPoint,
    UndefinedAngleError,
    angular_difference,
    center_of_attention,
    circular_mean,
    compute_attention_points,
    normalize_angle,
    smoothed_angle,
    time_weighted_angle,
)
from .engagement import (
    DyadRow,
    EngagementTrace,
    dyad_report,
    engagement_scores,
    interpersonal_distance,
    reciprocal_angle,
)
from .grouping import (
    ClusterMemory,
    ClusterParams,
    DetectionResult,
    FrameGrouping,
    FrameStats,
    MatchReport,
    cluster_frame,
    count_jumps,
    detect_groups,
    detect_sequence,
    group_count_series,
    kmeans,
    match_groups,
    select_group_count,
    silhouette,
)
from .synthetic import (
    JoinEvent,
    LeaveEvent,
    PassThroughEvent,
    SceneConfigError,
    SyntheticSceneConfig,
    TorsionEvent,
    TurnRule,
    generate_scene,
    load_scene_config,
    scene_config_from_dict,
)
from .turntaking import (
    CLASS_NAMES,
    TrainConfig,
    TurnModel,
    build_dataset,
    evaluate,
    init_turn_model,
    load_model,
    pearson,
    rank_features,
    save_model,
    train,
    train_and_evaluate,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVITY_NAMES",
    "CLASS_NAMES",
    "ActivityRecord",
    "AnnotationFormatError",
    "AttentionParams",
    "AttentionPoint",
    "ClusterMemory",
    "ClusterParams",
    "DetectionResult",
    "DyadRow",
    "EngagementTrace",
    "FrameGrouping",
    "FrameSequence",
    "FrameStats",
    "Group",
    "GroupingTimeline",
    "JoinEvent",
    "LeaveEvent",
    "MatchReport",
    "ParticipantFrame",
    "PassThroughEvent",
    "SceneConfigError",
    "SyntheticSceneConfig",
    "TorsionEvent",
    "TrainConfig",
    "TurnModel",
    "TurnRule",
    "UndefinedAngleError",
    "angular_difference",
    "build_dataset",
    "center_of_attention",
    "circular_mean",
    "cluster_frame",
    "compute_attention_points",
    "count_jumps",
    "detect_groups",
    "detect_sequence",
    "dyad_report",
    "engagement_scores",
    "evaluate",
    "generate_scene",
    "group_count_series",
    "init_turn_model",
    "interpersonal_distance",
    "kmeans",
    "load_model",
    "load_scene_config",
    "match_groups",
    "normalize_angle",
    "pearson",
    "rank_features",
    "read_activities",
    "read_frames",
    "read_groundtruth",
    "reciprocal_angle",
    "save_model",
    "scene_config_from_dict",
    "select_group_count",
    "silhouette",
    "smoothed_angle",
    "time_weighted_angle",
    "train",
    "train_and_evaluate",
    "write_activities",
    "write_frames",
    "write_groups",
]
