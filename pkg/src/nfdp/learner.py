"""Small feedforward classifier with exact analytic gradients.

Double precision throughout: the gradients are validated against central
finite differences at 1e-6 relative error, which single precision cannot
meet. Hidden layers are rectified, the output layer is linear, and
optimization is plain SGD with a seeded per-epoch shuffle -- nothing else,
so that the finite-difference oracle covers the entire training surface.

Three knowledge-transfer losses are supported, one per payload a party can
receive for a public example:

* hard labels        -> cross-entropy
* probability rows   -> soft cross-entropy, -sum_c q_c * log softmax(z)_c
* raw logit rows     -> mean squared error on the logits
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .rng import RngStream


class LossKind(Enum):
    HARD_CROSS_ENTROPY = "hard_cross_entropy"
    SOFT_CROSS_ENTROPY = "soft_cross_entropy"
    LOGIT_MSE = "logit_mse"


class KnowledgeMode(Enum):
    LOGITS = "logits"
    SOFTMAX = "softmax"
    ARGMAX = "argmax"


DIGEST_LOSS_FOR_MODE = {
    KnowledgeMode.LOGITS: LossKind.LOGIT_MSE,
    KnowledgeMode.SOFTMAX: LossKind.SOFT_CROSS_ENTROPY,
    KnowledgeMode.ARGMAX: LossKind.HARD_CROSS_ENTROPY,
}


class TrainingDivergedError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


@dataclass
class MlpModel:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    @property
    def classes(self) -> int:
        return self.layer_dims[-1]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


@dataclass(frozen=True)
class Batch:
    """Inputs plus targets of one kind (hard labels, soft rows, or logits)."""

    inputs: np.ndarray
    targets: np.ndarray
    kind: LossKind

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a (batch, features) matrix")
        if len(self.targets) != len(self.inputs):
            raise ValueError("inputs and targets must have matching row counts")
        if self.kind is LossKind.HARD_CROSS_ENTROPY:
            if self.targets.ndim != 1 or not np.issubdtype(self.targets.dtype, np.integer):
                raise ValueError("hard targets must be an integer label vector")
        else:
            if self.targets.ndim != 2:
                raise ValueError("soft/logit targets must be a (batch, classes) matrix")
            if self.kind is LossKind.SOFT_CROSS_ENTROPY:
                if np.any(self.targets < 0) or np.any(np.abs(self.targets.sum(axis=1) - 1.0) > 1e-9):
                    raise ValueError("soft targets must be nonnegative rows summing to 1")

    def take(self, rows: np.ndarray) -> "Batch":
        return Batch(self.inputs[rows], self.targets[rows], self.kind)

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class TrainSpec:
    learning_rate: float
    batch_size: int
    epochs: int
    loss: LossKind

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


def init_model(layer_dims: tuple[int, ...] | list[int], stream: RngStream) -> MlpModel:
    """Uniform(-s, s) weights with s = sqrt(6/(fan_in+fan_out)), zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer dims must be positive, got {dims}")
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        u = stream.uniform_block(fan_in * fan_out).reshape(fan_in, fan_out)
        weights.append((2.0 * u - 1.0) * scale)
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def _forward_cached(model: MlpModel, inputs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    if inputs.ndim != 2 or inputs.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"input width {inputs.shape} does not match model input dim {model.layer_dims[0]}"
        )
    activations = [inputs]
    a = inputs
    last = len(model.weights) - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if layer < last:
            a = np.maximum(z, 0.0)
            activations.append(a)
        else:
            return z, activations
    raise AssertionError("unreachable")


def forward(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """Logits for a (batch, features) input matrix."""
    logits, _ = _forward_cached(model, inputs)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-subtracted so +-700 logits do not overflow."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_and_grad(
    model: MlpModel, batch: Batch, loss: LossKind
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Mean-over-batch loss and exact backprop gradients for every parameter."""
    if loss is not batch.kind:
        raise ValueError(f"batch carries {batch.kind.value} targets but loss is {loss.value}")
    logits, activations = _forward_cached(model, batch.inputs)
    b = len(batch)

    if loss is LossKind.HARD_CROSS_ENTROPY:
        if np.any(batch.targets < 0) or np.any(batch.targets >= model.classes):
            raise ValueError("hard labels out of range for this model")
        ls = log_softmax(logits)
        value = -float(np.mean(ls[np.arange(b), batch.targets]))
        dz = softmax(logits)
        dz[np.arange(b), batch.targets] -= 1.0
        dz /= b
    elif loss is LossKind.SOFT_CROSS_ENTROPY:
        ls = log_softmax(logits)
        value = -float(np.mean((batch.targets * ls).sum(axis=1)))
        dz = (softmax(logits) - batch.targets) / b
    else:
        diff = logits - batch.targets
        value = float(np.mean(diff * diff))
        dz = 2.0 * diff / diff.size

    grad_w: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    delta = dz
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (activations[layer] > 0.0)
    return value, (grad_w, grad_b)


def train(
    model: MlpModel, data: Batch, spec: TrainSpec, stream: RngStream
) -> tuple[MlpModel, list[float]]:
    """SGD over seeded epoch shuffles; returns the new model and per-epoch mean loss."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    model = model.copy()
    trace: list[float] = []
    n = len(data)
    for _ in range(spec.epochs):
        order = stream.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, spec.batch_size):
            rows = order[start : start + spec.batch_size]
            # overflow to inf/nan is expected machinery here: the finiteness
            # guards turn it into a clean abort
            with np.errstate(over="ignore", invalid="ignore"):
                value, (gw, gb) = loss_and_grad(model, data.take(rows), spec.loss)
                if not np.isfinite(value):
                    raise TrainingDivergedError(
                        f"non-finite loss {value} at epoch {len(trace)}, rows {start}:{start + len(rows)}"
                    )
                for layer in range(len(model.weights)):
                    model.weights[layer] -= spec.learning_rate * gw[layer]
                    model.biases[layer] -= spec.learning_rate * gb[layer]
            loss_sum += value * len(rows)
        if not model.all_finite():
            raise TrainingDivergedError(f"non-finite parameters after epoch {len(trace)}")
        trace.append(loss_sum / n)
    return model, trace


def predict_knowledge(model: MlpModel, inputs: np.ndarray, mode: KnowledgeMode) -> np.ndarray:
    """The payload a party shares for each input row, tagged by ``mode``.

    Argmax ties break toward the lowest class index.
    """
    logits = forward(model, inputs)
    if mode is KnowledgeMode.LOGITS:
        return logits
    if mode is KnowledgeMode.SOFTMAX:
        return softmax(logits)
    return np.argmax(logits, axis=1)


def accuracy(model: MlpModel, inputs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(forward(model, inputs), axis=1) == labels))


_MAGIC = b"MLP1"


def save_model(model: MlpModel, path: str) -> None:
    """Little-endian binary checkpoint: magic, dim count, dims, then per layer
    the row-major float64 weight matrix followed by the bias vector."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path: str) -> MlpModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a model checkpoint")
        (ndims,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{ndims}I", fh.read(4 * ndims))
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims, dims[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            weights.append(w.copy())
            biases.append(b.copy())
    return MlpModel(layer_dims=tuple(dims), weights=weights, biases=biases)
