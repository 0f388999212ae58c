"""Training loop, evaluation, and model serialization.

Optimization is plain Adam over the exact BPTT gradients, with an early
stopping hook on validation loss.  Model files use a flat deterministic
container (text magic, JSON manifest, raw float64 tensors) so that saving
the same model twice produces identical bytes; archive formats were ruled
out because they embed timestamps.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .features import (
    CLASS_NAMES,
    DEFAULT_FEATURES,
    TurnDataset,
    build_dataset,
    rank_features,
)
from .lstm import (
    TurnModel,
    backward,
    cross_entropy,
    forward_batch,
    init_turn_model,
    model_parameters,
)

MODEL_MAGIC = "FFORMATION-TURNMODEL 1"

# Test-set figures reported on real mingling recordings: per-class diagonal
# of the population-normalized confusion matrix, and the class shares.
REFERENCE_DIAGONAL = {
    "speaker_1": 0.33,
    "speaker_2": 0.31,
    "overlap": 0.062,
    "silence": 0.27,
}
REFERENCE_CLASS_SHARES = {
    "speaker_1": 0.26,
    "speaker_2": 0.31,
    "overlap": 0.07,
    "silence": 0.36,
}


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything that shapes dataset assembly and optimization."""

    window: int = 10
    horizon: int = 1
    features: tuple[str, ...] = DEFAULT_FEATURES
    hidden: int = 32
    dense_sizes: tuple[int, ...] = (32, 16, 8)
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 15
    batch_size: int = 32
    min_delta: float = 1e-10
    patience: int = 50
    split: tuple[float, float, float] = (0.7, 0.2, 0.1)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be non-negative")
        if abs(sum(self.split) - 1.0) > 1e-9 or any(s < 0 for s in self.split):
            raise ValueError("split fractions must be non-negative and sum to 1")


class EarlyStopping:
    """Stop when validation loss has not improved by min_delta for patience epochs."""

    def __init__(self, patience: int = 50, min_delta: float = 1e-10):
        self.patience = patience
        self.min_delta = min_delta
        self.counter = 0
        self.best_loss: float | None = None
        self.early_stop = False

    def __call__(self, val_loss: float):
        if self.best_loss is None or self.best_loss - val_loss > self.min_delta:
            self.best_loss = val_loss
            self.counter = 0
        else:
            self.counter += 1
            if self.counter >= self.patience:
                self.early_stop = True


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.params = params
        self.lr = config.learning_rate
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.epsilon
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]):
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class EvalReport:
    """Accuracy plus the population-normalized confusion matrix.

    confusion[i, j] is the share of ALL evaluated samples with true class i
    and predicted class j, so the whole matrix sums to 1 and the diagonal
    sums to the accuracy.
    """

    accuracy: float
    confusion: np.ndarray
    counts: np.ndarray
    n_samples: int


def _batch_metrics(model: TurnModel, x: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    probs, cache = forward_batch(model, x)
    loss = cross_entropy(cache["logits"], y)
    correct = int((np.argmax(probs, axis=1) == y).sum())
    return loss, correct


def evaluate(model: TurnModel, x: np.ndarray, y: np.ndarray) -> EvalReport:
    """Accuracy and confusion over a labeled sample set."""
    if len(x) == 0:
        raise ValueError("cannot evaluate on an empty sample set")
    probs, _ = forward_batch(model, x)
    predicted = np.argmax(probs, axis=1)
    n_classes = probs.shape[1]
    counts = np.zeros((n_classes, n_classes), dtype=int)
    for truth, pred in zip(y, predicted):
        counts[truth, pred] += 1
    confusion = counts / len(y)
    accuracy = float((predicted == y).mean())
    return EvalReport(accuracy, confusion, counts, len(y))


def train(
    model: TurnModel, dataset: TurnDataset, config: TrainConfig
) -> list[EpochStats]:
    """Fit the model in place; returns per-epoch statistics.

    Epoch order is shuffled with a dedicated seeded generator, so training
    is reproducible for a fixed (model seed, config seed) pair.  Validation
    loss feeds the early-stopping hook.
    """
    if len(dataset.y_train) == 0:
        raise ValueError("training split is empty")
    if len(dataset.y_val) == 0:
        raise ValueError("validation split is empty")
    params = model_parameters(model)
    adam = _Adam(params, config)
    stopper = EarlyStopping(patience=config.patience, min_delta=config.min_delta)
    rng = np.random.default_rng(config.seed)
    history: list[EpochStats] = []
    n = len(dataset.y_train)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x = dataset.x_train[idx]
            y = dataset.y_train[idx]
            probs, cache = forward_batch(model, x)
            loss = cross_entropy(cache["logits"], y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            total_loss += loss
            total_correct += int((np.argmax(probs, axis=1) == y).sum())
            grads = backward(model, cache, y)
            for g in grads.values():
                g /= len(y)
            adam.step(grads)
        val_loss, val_correct = _batch_metrics(model, dataset.x_val, dataset.y_val)
        stats = EpochStats(
            epoch=epoch,
            train_loss=total_loss / n,
            train_accuracy=total_correct / n,
            val_loss=val_loss / len(dataset.y_val),
            val_accuracy=val_correct / len(dataset.y_val),
        )
        history.append(stats)
        stopper(stats.val_loss)
        if stopper.early_stop:
            break
    return history


@dataclass
class PredictionResult:
    """Everything the prediction pipeline produces for one dyad."""

    ranking: list
    dataset: TurnDataset
    model: TurnModel
    history: list[EpochStats]
    report: EvalReport


def train_and_evaluate(
    records, dyad: tuple[int, int], config: TrainConfig | None = None
) -> PredictionResult:
    """Rank features, window the data, train, and score the test split."""
    config = config or TrainConfig()
    ranking = rank_features(records, dyad, horizon=config.horizon)
    dataset = build_dataset(
        records,
        dyad,
        window=config.window,
        horizon=config.horizon,
        features=config.features,
        split=config.split,
    )
    model = init_turn_model(
        dataset.input_size,
        hidden_size=config.hidden,
        dense_sizes=config.dense_sizes,
        seed=config.seed,
    )
    history = train(model, dataset, config)
    report = evaluate(model, dataset.x_test, dataset.y_test)
    return PredictionResult(ranking, dataset, model, history, report)


def save_model(model: TurnModel, path, config: dict | None = None):
    """Write the model as magic line + JSON manifest + raw float64 tensors.

    The layout is fully determined by the model, so identical models yield
    identical files.  `config` is an optional JSON-serializable echo of the
    training settings, stored in the manifest.
    """
    params = model_parameters(model)
    manifest = {
        "input_size": model.input_size,
        "hidden_size": model.hidden_size,
        "config": config or {},
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in params.items()
        ],
    }
    with open(path, "wb") as sink:
        sink.write(MODEL_MAGIC.encode() + b"\n")
        sink.write(json.dumps(manifest, sort_keys=True).encode() + b"\n")
        for arr in params.values():
            sink.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> tuple[TurnModel, dict]:
    """Read a model file back; returns (model, stored config echo)."""
    with open(path, "rb") as source:
        magic = source.readline().rstrip(b"\n").decode()
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not a turn-model file")
        manifest = json.loads(source.readline().decode())
        tensors = {}
        for entry in manifest["tensors"]:
            size = int(np.prod(entry["shape"])) if entry["shape"] else 1
            raw = source.read(size * 8)
            if len(raw) != size * 8:
                raise ValueError(f"{path}: truncated tensor {entry['name']}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(
                entry["shape"]
            ).copy()
        if source.read(1):
            raise ValueError(f"{path}: trailing bytes after last tensor")
    n_dense = sum(1 for name in tensors if name.endswith("_w"))
    dense = [
        (tensors[f"dense_{i}_w"], tensors[f"dense_{i}_b"]) for i in range(n_dense)
    ]
    model = TurnModel(
        input_size=int(manifest["input_size"]),
        hidden_size=int(manifest["hidden_size"]),
        w_x=tensors["w_x"],
        w_h=tensors["w_h"],
        b=tensors["b"],
        dense=dense,
    )
    return model, manifest.get("config", {})
