"""Recurrent classifier: forward oracle, exact gradients, initialization."""

import math

import numpy as np
import pytest

from fformation.turntaking import (
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


def zero_model(input_size=3, hidden=4, dense_sizes=(5,), n_classes=4):
    model = init_turn_model(input_size, hidden, dense_sizes, n_classes, seed=0)
    model.w_x = np.zeros_like(model.w_x)
    model.w_h = np.zeros_like(model.w_h)
    model.b = np.zeros_like(model.b)
    model.dense = [(np.zeros_like(w), np.zeros_like(b)) for w, b in model.dense]
    return model


def oracle_forward(model, window):
    """Scalar re-implementation of the whole forward pass, loops only."""
    hidden = model.hidden_size
    h = [0.0] * hidden
    c = [0.0] * hidden
    for frame in window:
        z = []
        for row in range(4 * hidden):
            total = float(model.b[row])
            for j, value in enumerate(frame):
                total += float(model.w_x[row, j]) * float(value)
            for j in range(hidden):
                total += float(model.w_h[row, j]) * h[j]
            z.append(total)
        gate_i = [1.0 / (1.0 + math.exp(-z[k])) for k in range(hidden)]
        gate_f = [1.0 / (1.0 + math.exp(-z[hidden + k])) for k in range(hidden)]
        gate_g = [math.tanh(z[2 * hidden + k]) for k in range(hidden)]
        gate_o = [1.0 / (1.0 + math.exp(-z[3 * hidden + k])) for k in range(hidden)]
        c = [gate_f[k] * c[k] + gate_i[k] * gate_g[k] for k in range(hidden)]
        h = [gate_o[k] * math.tanh(c[k]) for k in range(hidden)]
    act = h
    for layer, (w, b) in enumerate(model.dense):
        z = [
            sum(act[j] * float(w[j, col]) for j in range(len(act))) + float(b[col])
            for col in range(w.shape[1])
        ]
        act = [math.tanh(v) for v in z] if layer < len(model.dense) - 1 else z
    top = max(act)
    exps = [math.exp(v - top) for v in act]
    total = sum(exps)
    return [e / total for e in exps]


# ----------------------------------------------------------- primitives


def test_sigmoid_values_and_stability():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    big = sigmoid(np.array([800.0, -800.0]))
    assert big[0] == 1.0 and big[1] == 0.0
    z = np.linspace(-5, 5, 11)
    assert np.allclose(sigmoid(z), 1.0 / (1.0 + np.exp(-z)), atol=1e-15)


def test_softmax_shift_invariance_and_normalization():
    z = np.array([[1.0, 2.0, 3.0, 4.0]])
    p = softmax(z)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(softmax(z + 100.0), p, atol=1e-15)
    assert np.all(np.isfinite(softmax(np.array([[1000.0, 0.0, -1000.0, 2.0]]))))


def test_log_softmax_consistency():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(5, 4)) * 3
    assert np.allclose(log_softmax(z), np.log(softmax(z)), atol=1e-12)


def test_cross_entropy_uniform_logits():
    logits = np.zeros((7, 4))
    labels = np.arange(7) % 4
    assert cross_entropy(logits, labels) == pytest.approx(7 * math.log(4.0))


def test_cross_entropy_confident_correct_is_small():
    logits = np.zeros((1, 4))
    logits[0, 2] = 50.0
    assert cross_entropy(logits, np.array([2])) < 1e-15


# -------------------------------------------------------------- forward


def test_zero_model_is_indifferent():
    model = zero_model()
    probs = forward(model, np.ones((6, 3)))
    assert np.allclose(probs, 0.25, atol=1e-15)


def test_forward_probabilities_are_a_distribution():
    model = init_turn_model(4, hidden_size=6, dense_sizes=(5,), seed=1)
    rng = np.random.default_rng(2)
    probs, _ = forward_batch(model, rng.integers(0, 2, size=(10, 8, 4)).astype(float))
    assert probs.shape == (10, 4)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(probs > 0)


def test_forward_matches_scalar_oracle_tiny():
    model = init_turn_model(1, hidden_size=2, dense_sizes=(3,), seed=5)
    window = [[1.0], [0.0]]
    got = forward(model, np.array(window))
    want = oracle_forward(model, window)
    assert np.allclose(got, want, atol=1e-12)


def test_forward_matches_scalar_oracle_randomized():
    rng = np.random.default_rng(7)
    for seed in range(5):
        model = init_turn_model(3, hidden_size=4, dense_sizes=(6, 5), seed=seed)
        window = rng.normal(size=(7, 3))
        got = forward(model, window)
        want = oracle_forward(model, window.tolist())
        assert np.allclose(got, want, atol=1e-12)


def test_forward_batch_agrees_with_single():
    model = init_turn_model(2, hidden_size=5, dense_sizes=(4,), seed=3)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 9, 2))
    batch, _ = forward_batch(model, x)
    singles = np.stack([forward(model, window) for window in x])
    assert np.allclose(batch, singles, atol=1e-14)


def test_forward_rejects_wrong_feature_width():
    model = init_turn_model(3, hidden_size=2, dense_sizes=(2,), seed=0)
    with pytest.raises(ValueError):
        forward_batch(model, np.zeros((2, 5, 4)))
    with pytest.raises(ValueError):
        forward_batch(model, np.zeros((5, 4)))


def test_predict_picks_argmax():
    model = init_turn_model(2, hidden_size=4, dense_sizes=(3,), seed=9)
    rng = np.random.default_rng(9)
    x = rng.normal(size=(8, 5, 2))
    probs, _ = forward_batch(model, x)
    assert np.array_equal(predict(model, x), probs.argmax(axis=1))


# ------------------------------------------------------------ gradients


def finite_difference_grads(model, x, labels, epsilon=1e-5):
    grads = {}
    for name, array in model_parameters(model).items():
        grad = np.zeros_like(array)
        flat = array.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + epsilon
            _, cache = forward_batch(model, x)
            up = cross_entropy(cache["logits"], labels)
            flat[idx] = keep - epsilon
            _, cache = forward_batch(model, x)
            down = cross_entropy(cache["logits"], labels)
            flat[idx] = keep
            grad.ravel()[idx] = (up - down) / (2 * epsilon)
        grads[name] = grad
    return grads


def test_backward_matches_finite_differences_everywhere():
    model = init_turn_model(2, hidden_size=3, dense_sizes=(4,), seed=11)
    rng = np.random.default_rng(12)
    x = rng.normal(size=(4, 5, 2))
    labels = rng.integers(0, 4, size=4)
    _, cache = forward_batch(model, x)
    exact = backward(model, cache, labels)
    numeric = finite_difference_grads(model, x, labels)
    for name in exact:
        a, b = exact[name], numeric[name]
        scale = np.maximum(1.0, np.abs(a) + np.abs(b))
        assert np.max(np.abs(a - b) / scale) < 1e-7, name


def test_backward_sums_over_the_batch():
    model = init_turn_model(3, hidden_size=4, dense_sizes=(3,), seed=2)
    rng = np.random.default_rng(3)
    window = rng.normal(size=(1, 6, 3))
    label = np.array([1])
    _, cache = forward_batch(model, window)
    single = backward(model, cache, label)
    doubled = np.concatenate([window, window])
    _, cache2 = forward_batch(model, doubled)
    twice = backward(model, cache2, np.array([1, 1]))
    for name in single:
        assert np.allclose(twice[name], 2.0 * single[name], atol=1e-12), name


def test_plain_gradient_descent_fits_separable_windows():
    model = init_turn_model(2, hidden_size=4, dense_sizes=(4,), seed=6)
    # Four constant windows at distinct levels, one per class.
    x = np.stack([np.full((5, 2), level) for level in (-1.0, -0.33, 0.33, 1.0)])
    labels = np.arange(4)

    def loss():
        _, cache = forward_batch(model, x)
        return cross_entropy(cache["logits"], labels) / len(labels)

    start = loss()
    params = model_parameters(model)
    for _ in range(300):
        _, cache = forward_batch(model, x)
        grads = backward(model, cache, labels)
        for name, param in params.items():
            param -= 0.3 * grads[name] / len(labels)
    assert loss() < min(0.2, start / 3)
    assert np.array_equal(predict(model, x), labels)


# -------------------------------------------------------- initialization


def test_init_shapes_and_forget_bias():
    model = init_turn_model(6, hidden_size=8, dense_sizes=(5, 3), n_classes=4, seed=0)
    assert model.w_x.shape == (32, 6)
    assert model.w_h.shape == (32, 8)
    assert model.b.shape == (32,)
    assert np.all(model.b[8:16] == 1.0)
    assert np.all(model.b[:8] == 0.0) and np.all(model.b[16:] == 0.0)
    shapes = [(w.shape, b.shape) for w, b in model.dense]
    assert shapes == [((8, 5), (5,)), ((5, 3), (3,)), ((3, 4), (4,))]
    assert model.n_classes == 4


def test_init_glorot_bounds():
    model = init_turn_model(10, hidden_size=7, dense_sizes=(6,), seed=4)
    limit_x = math.sqrt(6.0 / (10 + 7))
    limit_h = math.sqrt(6.0 / (7 + 7))
    assert np.max(np.abs(model.w_x)) <= limit_x
    assert np.max(np.abs(model.w_h)) <= limit_h
    w0 = model.dense[0][0]
    assert np.max(np.abs(w0)) <= math.sqrt(6.0 / (7 + 6))


def test_init_is_seed_deterministic():
    a = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=13)
    b = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=13)
    c = init_turn_model(3, hidden_size=4, dense_sizes=(4,), seed=14)
    assert np.array_equal(a.w_x, b.w_x)
    assert np.array_equal(a.dense[1][0], b.dense[1][0])
    assert not np.array_equal(a.w_x, c.w_x)


def test_init_validation():
    with pytest.raises(ValueError):
        init_turn_model(0)
    with pytest.raises(ValueError):
        init_turn_model(3, hidden_size=0)


def test_model_parameters_cover_everything():
    model = init_turn_model(2, hidden_size=3, dense_sizes=(4, 5), seed=0)
    params = model_parameters(model)
    assert set(params) == {
        "w_x", "w_h", "b",
        "dense_0_w", "dense_0_b",
        "dense_1_w", "dense_1_b",
        "dense_2_w", "dense_2_b",
    }
    # Views, not copies: training updates through these must hit the model.
    params["w_x"][0, 0] = 123.0
    assert model.w_x[0, 0] == 123.0
