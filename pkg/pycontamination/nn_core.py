"""
Dense feed-forward classifier with manual backpropagation.

Weights are stored as (fan_out, fan_in) matrices so a layer computes
``z = a @ W.T + b``. Hidden layers use the rectifier, the output layer
returns log-probabilities. Everything runs in float64.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LOSS_KINDS = ("nll", "kl")

# gradients smaller than this are compared on an absolute scale
GRAD_CHECK_FLOOR = 1e-6


class NumericError(ArithmeticError):
    """Raised when a loss, gradient or parameter stops being finite."""

    def __init__(self, message: str, layer: int | None = None) -> None:
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
        self.layer = layer


@dataclass(frozen=True)
class MlpConfig:
    """Architecture and optimizer settings of one classifier.

    Args:
        layer_sizes: input size, hidden sizes..., output size.
        learning_rate: SGD step size.
        momentum: velocity decay in [0, 1).
        epochs: passes over the training data.
        batch_size: records per update; the last partial batch is kept.
        seed: initialization and shuffling seed.
    """

    layer_sizes: tuple[int, ...]
    learning_rate: float = 0.01
    momentum: float = 0.5
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    hidden_activation: str = "relu"
    output_activation: str = "log_softmax"

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(size <= 0 for size in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.hidden_activation != "relu" or self.output_activation != "log_softmax":
            raise ValueError("only relu hidden layers with a log_softmax output are supported")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]

    def resized(self, n_inputs: int, n_outputs: int) -> "MlpConfig":
        """Same hidden layers and optimizer, new input and output sizes."""
        return replace(self, layer_sizes=(n_inputs, *self.hidden_sizes, n_outputs))

    def with_seed(self, seed: int) -> "MlpConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Batch:
    """Feature rows with one target distribution per row."""

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or targets.ndim != 2:
            raise ValueError("features and targets must be 2-D matrices")
        if features.shape[0] != targets.shape[0]:
            raise ValueError(
                f"row count mismatch: {features.shape[0]} feature rows, "
                f"{targets.shape[0]} target rows"
            )
        sums = targets.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
        if bad.size:
            raise ValueError(f"target row {bad[0]} sums to {sums[bad[0]]}, expected 1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, indices: np.ndarray) -> "Batch":
        return Batch(self.features[indices], self.targets[indices])


def one_hot(indices: Sequence[int], n_classes: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros((indices.shape[0], n_classes), dtype=np.float64)
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


@dataclass
class MlpModel:
    """Parameters and momentum buffers of a classifier."""

    config: MlpConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    weight_velocity: list[np.ndarray] = field(default_factory=list)
    bias_velocity: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError(f"expected {len(sizes) - 1} layers for sizes {sizes}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError(
                    f"layer {i} has weight {w.shape} and bias {b.shape}, "
                    f"expected {(sizes[i + 1], sizes[i])} and {(sizes[i + 1],)}"
                )
        if not self.weight_velocity:
            self.weight_velocity = [np.zeros_like(w) for w in self.weights]
        if not self.bias_velocity:
            self.bias_velocity = [np.zeros_like(b) for b in self.biases]

    @classmethod
    def initialize(cls, config: MlpConfig) -> "MlpModel":
        """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded by config.seed."""
        rng = np.random.default_rng(config.seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(config, weights, biases)

    @classmethod
    def zeros(cls, config: MlpConfig) -> "MlpModel":
        sizes = config.layer_sizes
        weights = [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(o) for o in sizes[1:]]
        return cls(config, weights, biases)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.config,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [v.copy() for v in self.weight_velocity],
            [v.copy() for v in self.bias_velocity],
        )

    def parameters_equal(self, other: "MlpModel") -> bool:
        """Bitwise equality of weights and biases."""
        return all(
            np.array_equal(a, b) for a, b in zip(self.weights, other.weights)
        ) and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))


@dataclass(frozen=True)
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray


@dataclass(frozen=True)
class ForwardCache:
    activations: list[np.ndarray]
    pre_activations: list[np.ndarray]
    logprobs: np.ndarray


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_cache(model: MlpModel, features: np.ndarray) -> ForwardCache:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.config.n_inputs:
        raise ValueError(
            f"feature matrix has shape {features.shape}, model expects "
            f"{model.config.n_inputs} columns"
        )
    activations = [features]
    pre_activations = []
    a = features
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre_activations.append(z)
        if i < model.n_layers - 1:
            a = np.maximum(z, 0.0)
            activations.append(a)
    return ForwardCache(activations, pre_activations, log_softmax(pre_activations[-1]))


def forward(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Log-probability matrix, one row per record."""
    return forward_cache(model, features).logprobs


def predict(model: MlpModel, features: np.ndarray) -> np.ndarray:
    return forward(model, features).argmax(axis=1)


def _check_loss_inputs(logprobs: np.ndarray, targets: np.ndarray) -> None:
    if logprobs.shape != targets.shape:
        raise ValueError(f"shape mismatch: {logprobs.shape} vs {targets.shape}")
    if np.isnan(logprobs).any() or np.isnan(targets).any():
        raise NumericError("NaN in loss inputs")


def nll_loss_and_grad(
    logprobs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. logprobs."""
    _check_loss_inputs(logprobs, targets)
    rows = logprobs.shape[0]
    # 0 * -inf must count as 0, not NaN
    terms = np.multiply(targets, logprobs, out=np.zeros_like(logprobs), where=targets > 0)
    loss = -terms.sum() / rows
    return float(loss), -targets / rows


def kl_to_target_loss_and_grad(
    logprobs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean KL(target || exp(logprobs)).

    The target entropy does not depend on the model, so the gradient is the
    nll gradient.
    """
    _check_loss_inputs(logprobs, targets)
    rows = logprobs.shape[0]
    positive = targets > 0
    log_t = np.log(np.where(positive, targets, 1.0))
    terms = np.multiply(targets, log_t - logprobs, out=np.zeros_like(logprobs), where=positive)
    return float(terms.sum() / rows), -targets / rows


LOSSES: dict[str, Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]] = {
    "nll": nll_loss_and_grad,
    "kl": kl_to_target_loss_and_grad,
}


def backward(
    model: MlpModel, cache: ForwardCache, grad_logprobs: np.ndarray
) -> Gradients:
    """Backpropagate dL/dlogprobs to every parameter and to the inputs."""
    probs = np.exp(cache.logprobs)
    delta = grad_logprobs - probs * grad_logprobs.sum(axis=1, keepdims=True)
    grad_w: list[np.ndarray] = [None] * model.n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * model.n_layers  # type: ignore[list-item]
    for i in reversed(range(model.n_layers)):
        grad_w[i] = delta.T @ cache.activations[i]
        grad_b[i] = delta.sum(axis=0)
        delta = delta @ model.weights[i]
        if i > 0:
            delta = delta * (cache.pre_activations[i - 1] > 0)
    return Gradients(grad_w, grad_b, delta)


def loss_and_gradients(
    model: MlpModel, batch: Batch, loss_kind: str = "nll"
) -> tuple[float, Gradients]:
    if loss_kind not in LOSSES:
        raise ValueError(f"unknown loss kind {loss_kind!r}, expected one of {LOSS_KINDS}")
    cache = forward_cache(model, batch.features)
    loss, grad = LOSSES[loss_kind](cache.logprobs, batch.targets)
    return loss, backward(model, cache, grad)


def apply_gradients(model: MlpModel, grads: Gradients, scale: float = 1.0) -> MlpModel:
    """Momentum SGD step: v = momentum * v - lr * scale * g; w += v."""
    cfg = model.config
    weights, biases, w_vel, b_vel = [], [], [], []
    for i in range(model.n_layers):
        if not (np.isfinite(grads.weights[i]).all() and np.isfinite(grads.biases[i]).all()):
            raise NumericError("non-finite gradient", layer=i)
        vw = cfg.momentum * model.weight_velocity[i] - cfg.learning_rate * scale * grads.weights[i]
        vb = cfg.momentum * model.bias_velocity[i] - cfg.learning_rate * scale * grads.biases[i]
        weights.append(model.weights[i] + vw)
        biases.append(model.biases[i] + vb)
        w_vel.append(vw)
        b_vel.append(vb)
    return MlpModel(cfg, weights, biases, w_vel, b_vel)


def backward_and_step(
    model: MlpModel, batch: Batch, loss_kind: str = "nll", scale: float = 1.0
) -> tuple[MlpModel, float]:
    """One SGD update; returns the new model and the pre-update loss."""
    loss, grads = loss_and_gradients(model, batch, loss_kind)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite {loss_kind} loss {loss}")
    return apply_gradients(model, grads, scale), loss


def epoch_order(n_rows: int, seed: int, epoch: int) -> np.ndarray:
    """Shuffled record order for one epoch, derived from (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n_rows)


def minibatches(n_rows: int, batch_size: int, seed: int, epoch: int):
    order = epoch_order(n_rows, seed, epoch)
    for start in range(0, n_rows, batch_size):
        yield order[start : start + batch_size]


def train(
    config: MlpConfig,
    batch: Batch,
    model: MlpModel | None = None,
    loss_kind: str = "nll",
) -> tuple[MlpModel, list[float]]:
    """Minibatch SGD for config.epochs; returns the model and mean loss per epoch."""
    if len(batch) == 0:
        raise ValueError("cannot train on an empty batch")
    if model is None:
        model = MlpModel.initialize(config)
    epoch_losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for rows in minibatches(len(batch), config.batch_size, config.seed, epoch):
            model, loss = backward_and_step(model, batch.take(rows), loss_kind)
            total += loss * rows.shape[0]
        epoch_losses.append(total / len(batch))
        logger.debug(f"epoch {epoch + 1}/{config.epochs} loss {epoch_losses[-1]:.6f}")
    return model, epoch_losses


def accuracy(model: MlpModel, batch: Batch) -> float:
    if len(batch) == 0:
        raise ValueError("accuracy of an empty batch is undefined")
    return float(np.mean(predict(model, batch.features) == batch.targets.argmax(axis=1)))


def _parameter_arrays(model: MlpModel) -> list[np.ndarray]:
    return [*model.weights, *model.biases]


def hidden_pattern(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Active hidden units for every record and hidden layer, flattened."""
    hidden = forward_cache(model, features).pre_activations[:-1]
    if not hidden:
        return np.zeros(0, dtype=bool)
    return np.concatenate([(z > 0).ravel() for z in hidden])


def max_relative_error(
    model: MlpModel,
    analytic: Gradients,
    loss_fn: Callable[[MlpModel], float],
    epsilon: float = 1e-5,
    pattern_fn: Callable[[MlpModel], np.ndarray] | None = None,
) -> float:
    """Worst relative gap between analytic and central-difference gradients.

    Parameter pairs where both gradients are exactly zero are skipped. With
    ``pattern_fn``, so are parameters whose +/- ``epsilon`` steps change the
    rectifier activation pattern: the loss has a kink inside that interval.
    ``loss_fn`` is evaluated on ``model`` while its parameters are perturbed
    in place, and every parameter is restored afterwards.
    """
    worst = 0.0
    skipped = 0
    base = pattern_fn(model) if pattern_fn is not None else None

    def kinked() -> bool:
        return base is not None and not np.array_equal(pattern_fn(model), base)

    for param, grad in zip(_parameter_arrays(model), [*analytic.weights, *analytic.biases]):
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + epsilon
            plus = loss_fn(model)
            crosses = kinked()
            param[idx] = original - epsilon
            minus = loss_fn(model)
            crosses = crosses or kinked()
            param[idx] = original
            if crosses:
                skipped += 1
                continue
            numeric = (plus - minus) / (2 * epsilon)
            exact = grad[idx]
            if exact == 0 and numeric == 0:
                continue
            denom = max(abs(exact), abs(numeric), GRAD_CHECK_FLOOR)
            worst = max(worst, abs(exact - numeric) / denom)
    if skipped:
        logger.debug(f"gradient check skipped {skipped} parameters next to a rectifier kink")
    return worst


def grad_check(
    model: MlpModel, batch: Batch, epsilon: float = 1e-5, loss_kind: str = "nll"
) -> float:
    """Compare backprop against central finite differences on every parameter."""
    if model.num_params > 10_000:
        raise ValueError(
            f"grad_check is limited to 10000 parameters, model has {model.num_params}"
        )
    checked = model.copy()
    _, analytic = loss_and_gradients(checked, batch, loss_kind)

    def loss_fn(m: MlpModel) -> float:
        return LOSSES[loss_kind](forward(m, batch.features), batch.targets)[0]

    return max_relative_error(
        checked, analytic, loss_fn, epsilon, lambda m: hidden_pattern(m, batch.features)
    )
