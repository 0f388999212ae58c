"""A small LSTM classifier, implemented directly on numpy.

One LSTM layer reads the feature window frame by frame; a stack of dense
layers with tanh activations maps the final hidden state to four softmax
class probabilities.  Gradients come from full backpropagation through
time, exact to machine precision (verified against finite differences in
the tests), with no autograd framework involved.

Weight layout: the four gate blocks are stacked along the first axis of
`w_x`, `w_h`, and `b` in the order input, forget, cell, output.  Dense
layers use the row-vector convention, z = h @ w + b.
"""

from dataclasses import dataclass

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class TurnModel:
    """LSTM + dense-head parameters for next-speaking-state prediction."""

    input_size: int
    hidden_size: int
    w_x: np.ndarray  # (4H, F)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    dense: list[tuple[np.ndarray, np.ndarray]]  # [(w, b)] with z = h @ w + b

    @property
    def n_classes(self) -> int:
        return self.dense[-1][0].shape[1]


def init_turn_model(
    input_size: int,
    hidden_size: int = 32,
    dense_sizes: tuple[int, ...] = (32, 16, 8),
    n_classes: int = 4,
    seed: int = 0,
) -> TurnModel:
    """Glorot-uniform initialization; the forget-gate bias starts at 1."""
    if input_size < 1 or hidden_size < 1:
        raise ValueError("input and hidden sizes must be positive")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    h = hidden_size
    w_x = glorot(input_size, h, (4 * h, input_size))
    w_h = glorot(h, h, (4 * h, h))
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0  # open forget gates keep early-step gradients alive
    dense = []
    fan_in = h
    for fan_out in tuple(dense_sizes) + (n_classes,):
        dense.append((glorot(fan_in, fan_out, (fan_in, fan_out)), np.zeros(fan_out)))
        fan_in = fan_out
    return TurnModel(input_size, hidden_size, w_x, w_h, b, dense)


def model_parameters(model: TurnModel) -> dict[str, np.ndarray]:
    """Named views of every trainable array, in a stable order."""
    params = {"w_x": model.w_x, "w_h": model.w_h, "b": model.b}
    for i, (w, b) in enumerate(model.dense):
        params[f"dense_{i}_w"] = w
        params[f"dense_{i}_b"] = b
    return params


def forward_batch(model: TurnModel, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Class probabilities for a batch of windows, with a cache for backward.

    x has shape (batch, time, features); the returned probabilities have
    shape (batch, n_classes).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != model.input_size:
        raise ValueError(
            f"expected input of shape (batch, time, {model.input_size}), got {x.shape}"
        )
    n, steps, _ = x.shape
    hidden = model.hidden_size
    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    hs = [h]
    cs = [c]
    gates = []
    for t in range(steps):
        z = x[:, t] @ model.w_x.T + h @ model.w_h.T + model.b
        gate_i = sigmoid(z[:, :hidden])
        gate_f = sigmoid(z[:, hidden : 2 * hidden])
        gate_g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        gate_o = sigmoid(z[:, 3 * hidden :])
        c = gate_f * c + gate_i * gate_g
        h = gate_o * np.tanh(c)
        gates.append((gate_i, gate_f, gate_g, gate_o))
        hs.append(h)
        cs.append(c)

    activations = [h]
    logits = None
    for layer, (w, b) in enumerate(model.dense):
        z = activations[-1] @ w + b
        if layer < len(model.dense) - 1:
            activations.append(np.tanh(z))
        else:
            logits = z
    probs = softmax(logits)
    cache = {
        "x": x,
        "hs": hs,
        "cs": cs,
        "gates": gates,
        "activations": activations,
        "logits": logits,
        "probs": probs,
    }
    return probs, cache


def forward(model: TurnModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a single (time, features) window."""
    probs, _ = forward_batch(model, np.asarray(x, dtype=float)[None])
    return probs[0]


def cross_entropy(probs_logits: np.ndarray, labels: np.ndarray) -> float:
    """Summed cross-entropy of integer labels given logits."""
    lsm = log_softmax(probs_logits)
    return float(-lsm[np.arange(len(labels)), labels].sum())


def backward(
    model: TurnModel, cache: dict, labels: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of the summed cross-entropy over the batch.

    Returns arrays keyed like model_parameters; divide by the batch size
    for mean-loss gradients.
    """
    x = cache["x"]
    hs = cache["hs"]
    cs = cache["cs"]
    gates = cache["gates"]
    activations = cache["activations"]
    probs = cache["probs"]
    n, steps, _ = x.shape
    hidden = model.hidden_size

    grads = {name: np.zeros_like(arr) for name, arr in model_parameters(model).items()}

    one_hot = np.zeros_like(probs)
    one_hot[np.arange(n), labels] = 1.0
    delta = probs - one_hot
    for layer in range(len(model.dense) - 1, -1, -1):
        w, _ = model.dense[layer]
        grads[f"dense_{layer}_w"] += activations[layer].T @ delta
        grads[f"dense_{layer}_b"] += delta.sum(axis=0)
        delta = delta @ w.T
        if layer > 0:
            delta = delta * (1.0 - activations[layer] ** 2)

    dh = delta  # gradient flowing into the final hidden state
    dc = np.zeros((n, hidden))
    for t in range(steps - 1, -1, -1):
        gate_i, gate_f, gate_g, gate_o = gates[t]
        c_t = cs[t + 1]
        c_prev = cs[t]
        tanh_c = np.tanh(c_t)
        d_o = dh * tanh_c
        dc_t = dh * gate_o * (1.0 - tanh_c**2) + dc
        d_i = dc_t * gate_g
        d_g = dc_t * gate_i
        d_f = dc_t * c_prev
        dz = np.concatenate(
            [
                d_i * gate_i * (1.0 - gate_i),
                d_f * gate_f * (1.0 - gate_f),
                d_g * (1.0 - gate_g**2),
                d_o * gate_o * (1.0 - gate_o),
            ],
            axis=1,
        )
        grads["w_x"] += dz.T @ x[:, t]
        grads["w_h"] += dz.T @ hs[t]
        grads["b"] += dz.sum(axis=0)
        dh = dz @ model.w_h
        dc = dc_t * gate_f
    return grads


def predict(model: TurnModel, x: np.ndarray) -> np.ndarray:
    """Most likely class per window for a (batch, time, features) array."""
    probs, _ = forward_batch(model, x)
    return np.argmax(probs, axis=1)
