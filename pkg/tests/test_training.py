"""Adam, early stopping, the training loop, evaluation, serialization."""

import numpy as np
import pytest

from fformation.annotation_io import ACTIVITY_NAMES, ActivityRecord
from fformation.turntaking import (
    EarlyStopping,
    TrainConfig,
    TrainingDivergedError,
    build_dataset,
    evaluate,
    forward_batch,
    init_turn_model,
    load_model,
    model_parameters,
    save_model,
    train,
    train_and_evaluate,
)
from fformation.turntaking.training import MODEL_MAGIC, _Adam


def record(person, frame, speaking, hand=0):
    flags = [0] * len(ACTIVITY_NAMES)
    flags[ACTIVITY_NAMES.index("speaking")] = speaking
    flags[ACTIVITY_NAMES.index("hand_gesturing")] = hand
    return ActivityRecord(person, frame, tuple(flags))


def alternating_records(n_frames, period=4):
    records = []
    for frame in range(n_frames):
        speaker = (frame // period) % 2
        for person in (0, 1):
            gesturing = person != speaker and frame % period == period - 1
            records.append(
                record(person, frame, int(person == speaker), int(gesturing))
            )
    return records


def small_dataset(n_frames=120):
    return build_dataset(
        alternating_records(n_frames), (0, 1), window=6, horizon=1,
        features=("speaking", "hand_gesturing"),
    )


def small_config(**overrides):
    settings = dict(
        window=6, horizon=1, features=("speaking", "hand_gesturing"),
        hidden=6, dense_sizes=(6,), epochs=3, batch_size=16, seed=0,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


# ----------------------------------------------------------------- Adam


def test_adam_first_step_hand_computed():
    w = np.array([1.0])
    adam = _Adam({"w": w}, TrainConfig())
    adam.step({"w": np.array([0.5])})
    # m = 0.1*0.5, v = 0.001*0.25; bias correction divides by 0.1 and 0.001,
    # so the step is lr * 0.5 / (sqrt(0.25) + eps).
    expected = 1.0 - 0.001 * 0.5 / (np.sqrt(0.25) + 1e-8)
    assert w[0] == pytest.approx(expected, abs=1e-15)


def test_adam_constant_gradient_unit_steps():
    # With a constant gradient the corrected ratio m^/sqrt(v^) stays 1, so
    # every step moves by almost exactly lr regardless of gradient size.
    w = np.array([0.0])
    adam = _Adam({"w": w}, TrainConfig())
    for _ in range(10):
        adam.step({"w": np.array([123.456])})
    assert w[0] == pytest.approx(-10 * 0.001, rel=1e-6)


def test_adam_updates_in_place_per_parameter():
    w1 = np.zeros((2, 2))
    w2 = np.zeros(3)
    adam = _Adam({"a": w1, "b": w2}, TrainConfig())
    adam.step({"a": np.ones((2, 2)), "b": np.zeros(3)})
    assert np.all(w1 < 0)  # moved against the gradient
    assert np.all(w2 == 0)  # zero gradient, zero move


# -------------------------------------------------------- early stopping


def test_early_stopping_improvement_resets_counter():
    stopper = EarlyStopping(patience=2, min_delta=0.0)
    for loss in (1.0, 0.9, 0.8, 0.7):
        stopper(loss)
        assert stopper.counter == 0
    assert not stopper.early_stop
    assert stopper.best_loss == 0.7


def test_early_stopping_stalls_then_stops():
    stopper = EarlyStopping(patience=3, min_delta=0.0)
    stopper(1.0)
    for i in range(1, 3):
        stopper(1.0)
        assert stopper.counter == i and not stopper.early_stop
    stopper(1.0)
    assert stopper.early_stop


def test_early_stopping_min_delta_is_strict():
    stopper = EarlyStopping(patience=1, min_delta=0.1)
    stopper(1.0)
    stopper(0.9)  # improvement == min_delta does not count
    assert stopper.early_stop
    fresh = EarlyStopping(patience=1, min_delta=0.1)
    fresh(1.0)
    fresh(0.85)
    assert not fresh.early_stop and fresh.best_loss == 0.85


def test_early_stopping_worse_loss_counts_as_stall():
    stopper = EarlyStopping(patience=2, min_delta=0.0)
    stopper(1.0)
    stopper(1.5)
    assert stopper.counter == 1
    assert stopper.best_loss == 1.0


# --------------------------------------------------------------- train


def test_train_is_reproducible():
    dataset = small_dataset()
    config = small_config()

    def run():
        model = init_turn_model(4, hidden_size=6, dense_sizes=(6,), seed=0)
        history = train(model, dataset, config)
        return history, model_parameters(model)

    history_a, params_a = run()
    history_b, params_b = run()
    assert [s.__dict__ for s in history_a] == [s.__dict__ for s in history_b]
    for name in params_a:
        assert np.array_equal(params_a[name], params_b[name]), name


def test_train_loss_decreases_on_learnable_data():
    dataset = small_dataset(300)
    config = small_config(epochs=10, learning_rate=0.01)
    model = init_turn_model(4, hidden_size=6, dense_sizes=(6,), seed=0)
    history = train(model, dataset, config)
    assert history[-1].train_loss < history[0].train_loss
    assert history[-1].val_accuracy > 0.5


def test_train_raises_on_poisoned_weights():
    dataset = small_dataset()
    model = init_turn_model(4, hidden_size=6, dense_sizes=(6,), seed=0)
    model.w_x[0, 0] = np.nan
    with pytest.raises(TrainingDivergedError):
        train(model, dataset, small_config())


def test_train_early_stop_shortens_history():
    dataset = small_dataset()
    # An absurd min_delta means no epoch ever counts as an improvement.
    config = small_config(epochs=10, min_delta=1e9, patience=2)
    model = init_turn_model(4, hidden_size=6, dense_sizes=(6,), seed=0)
    history = train(model, dataset, config)
    # Epoch 1 sets the baseline, epochs 2 and 3 stall out the patience.
    assert len(history) == 3


def test_train_rejects_empty_splits():
    dataset = small_dataset()
    starved = build_dataset(
        alternating_records(120), (0, 1), window=6, horizon=1,
        features=("speaking", "hand_gesturing"), split=(0.0, 0.5, 0.5),
    )
    model = init_turn_model(4, hidden_size=6, dense_sizes=(6,), seed=0)
    with pytest.raises(ValueError):
        train(model, starved, small_config())
    assert len(dataset.y_train) > 0  # sanity: the normal fixture is fine


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(split=(0.5, 0.5, 0.5))


# ------------------------------------------------------------ evaluate


def test_evaluate_confusion_is_population_normalized():
    model = init_turn_model(2, hidden_size=4, dense_sizes=(4,), seed=0)
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=(40, 6, 2)).astype(float)
    y = rng.integers(0, 4, size=40)
    report = evaluate(model, x, y)
    assert report.n_samples == 40
    assert report.counts.sum() == 40
    assert report.confusion.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.trace(report.confusion) == pytest.approx(report.accuracy, abs=1e-12)
    assert np.array_equal(report.counts / 40, report.confusion)


def test_evaluate_indifferent_model_predicts_first_class():
    model = init_turn_model(2, hidden_size=4, dense_sizes=(4,), seed=0)
    model.w_x[:] = 0
    model.w_h[:] = 0
    model.b[:] = 0
    model.dense = [(np.zeros_like(w), np.zeros_like(b)) for w, b in model.dense]
    x = np.zeros((8, 5, 2))
    y = np.array([0, 0, 1, 1, 2, 2, 3, 3])
    report = evaluate(model, x, y)
    # Uniform probabilities break ties toward class 0.
    assert report.accuracy == 0.25
    assert np.all(report.counts[:, 0] == 2)
    assert report.counts[:, 1:].sum() == 0


def test_evaluate_rejects_empty():
    model = init_turn_model(2, hidden_size=4, dense_sizes=(4,), seed=0)
    with pytest.raises(ValueError):
        evaluate(model, np.zeros((0, 5, 2)), np.zeros(0, dtype=int))


# ------------------------------------------------------- full pipeline


def test_train_and_evaluate_shapes():
    result = train_and_evaluate(alternating_records(200), (0, 1), small_config())
    assert result.report.n_samples == len(result.dataset.y_test)
    assert len(result.history) <= 3
    assert result.ranking[0].name == "speaking"
    assert result.model.input_size == 4


# --------------------------------------------------------- persistence


def test_save_load_round_trip_bitwise(tmp_path):
    model = init_turn_model(4, hidden_size=5, dense_sizes=(6, 3), seed=8)
    path = tmp_path / "model.turnmodel"
    save_model(model, path, config={"window": 6, "features": ["speaking"]})
    loaded, echo = load_model(path)
    assert echo == {"window": 6, "features": ["speaking"]}
    assert loaded.input_size == 4 and loaded.hidden_size == 5
    original = model_parameters(model)
    restored = model_parameters(loaded)
    assert set(original) == set(restored)
    for name in original:
        assert original[name].dtype == restored[name].dtype == np.float64
        assert np.array_equal(original[name], restored[name]), name


def test_save_twice_is_byte_identical(tmp_path):
    model = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=1)
    a, b = tmp_path / "a.turnmodel", tmp_path / "b.turnmodel"
    save_model(model, a, config={"seed": 1})
    save_model(model, b, config={"seed": 1})
    assert a.read_bytes() == b.read_bytes()


def test_loaded_model_predicts_identically(tmp_path):
    model = init_turn_model(4, hidden_size=5, dense_sizes=(6,), seed=3)
    path = tmp_path / "model.turnmodel"
    save_model(model, path)
    loaded, _ = load_model(path)
    rng = np.random.default_rng(5)
    x = rng.integers(0, 2, size=(12, 7, 4)).astype(float)
    before, _ = forward_batch(model, x)
    after, _ = forward_batch(loaded, x)
    assert np.array_equal(before, after)


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "junk.turnmodel"
    path.write_bytes(b"NOT A MODEL\n{}\n")
    with pytest.raises(ValueError, match="not a turn-model"):
        load_model(path)


def test_load_rejects_truncation_and_trailing_bytes(tmp_path):
    model = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=0)
    path = tmp_path / "model.turnmodel"
    save_model(model, path)
    blob = path.read_bytes()

    clipped = tmp_path / "clipped.turnmodel"
    clipped.write_bytes(blob[:-9])
    with pytest.raises(ValueError, match="truncated"):
        load_model(clipped)

    padded = tmp_path / "padded.turnmodel"
    padded.write_bytes(blob + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_model(padded)


def test_model_magic_matches_file_head(tmp_path):
    model = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=0)
    path = tmp_path / "model.turnmodel"
    save_model(model, path)
    head = path.read_bytes().split(b"\n", 1)[0]
    assert head.decode() == MODEL_MAGIC
