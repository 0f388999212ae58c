"""Next-speaking-state prediction for a dyad from activity annotations."""

from .features import (
    CLASS_NAMES,
    DEFAULT_FEATURES,
    REFERENCE_CORRELATIONS,
    FeatureRank,
    TurnDataset,
    UndefinedCorrelationError,
    activity_table,
    build_dataset,
    label_for,
    pearson,
    rank_features,
)
from .lstm import (
    TurnModel,
    backward,
    cross_entropy,
    forward,
    forward_batch,
    init_turn_model,
    log_softmax,
    model_parameters,
    predict,
    sigmoid,
    softmax,
)
from .training import (
    REFERENCE_CLASS_SHARES,
    REFERENCE_DIAGONAL,
    EarlyStopping,
    EpochStats,
    EvalReport,
    PredictionResult,
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    load_model,
    save_model,
    train,
    train_and_evaluate,
)

__all__ = [
    "CLASS_NAMES",
    "DEFAULT_FEATURES",
    "REFERENCE_CORRELATIONS",
    "REFERENCE_CLASS_SHARES",
    "REFERENCE_DIAGONAL",
    "EarlyStopping",
    "EpochStats",
    "EvalReport",
    "FeatureRank",
    "PredictionResult",
    "TrainConfig",
    "TrainingDivergedError",
    "TurnDataset",
    "TurnModel",
    "UndefinedCorrelationError",
    "activity_table",
    "backward",
    "build_dataset",
    "cross_entropy",
    "evaluate",
    "forward",
    "forward_batch",
    "init_turn_model",
    "label_for",
    "load_model",
    "log_softmax",
    "model_parameters",
    "pearson",
    "predict",
    "rank_features",
    "save_model",
    "sigmoid",
    "softmax",
    "train",
    "train_and_evaluate",
]
