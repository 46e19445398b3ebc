"""
Adversarial training of the classifier f against a party discriminator g.

g reads f's output vector and predicts which party supplied the record.
f minimizes its classification loss while making g's job hard:

* ``one_hot_party``: f's objective is ``nll_f - c * nll_g(true party)``,
  i.e. minimize ``c * L_g - L_f`` with L the log-likelihoods.
* ``uniform_kl``: f's objective is ``nll_f + c * KL(uniform || g(f(x)))``.

g is always trained to maximize the log-likelihood of the true party.
Updates alternate per minibatch: ``g_steps_per_f_step`` g updates with f
frozen, then one f update with g frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from pycontamination.dataset import to_batch
from pycontamination.nn_core import (
    Batch,
    Gradients,
    MlpConfig,
    MlpModel,
    apply_gradients,
    backward,
    backward_and_step,
    forward,
    forward_cache,
    hidden_pattern,
    kl_to_target_loss_and_grad,
    max_relative_error,
    minibatches,
    nll_loss_and_grad,
    one_hot,
)

logger = logging.getLogger(__name__)

FEEDS = ("log_probabilities", "probabilities")


class Variant(str, Enum):
    ONE_HOT_PARTY = "one_hot_party"
    UNIFORM_KL = "uniform_kl"


@dataclass(frozen=True)
class DefenseConfig:
    """Settings of the adversarial defense.

    ``g_hidden_sizes=None`` gives g the same hidden layers as f, and
    ``g_learning_rate=None`` its learning rate.
    ``c_weight`` must be positive in experiment configs; zero is accepted
    here so the adversarial term can be switched off.
    """

    variant: Variant = Variant.ONE_HOT_PARTY
    c_weight: float = 3.0
    g_hidden_sizes: tuple[int, ...] | None = None
    g_steps_per_f_step: int = 1
    seed: int = 0
    feed: str = "log_probabilities"
    g_learning_rate: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.g_hidden_sizes is not None:
            object.__setattr__(self, "g_hidden_sizes", tuple(int(s) for s in self.g_hidden_sizes))
        if self.c_weight < 0:
            raise ValueError(f"c_weight must be non-negative, got {self.c_weight}")
        if self.g_steps_per_f_step < 1:
            raise ValueError("g_steps_per_f_step must be at least 1")
        if self.feed not in FEEDS:
            raise ValueError(f"feed must be one of {FEEDS}, got {self.feed!r}")
        if self.g_learning_rate is not None and self.g_learning_rate <= 0:
            raise ValueError(f"g_learning_rate must be positive, got {self.g_learning_rate}")

    def discriminator_config(self, model_cfg: MlpConfig, n_parties: int) -> MlpConfig:
        hidden = self.g_hidden_sizes if self.g_hidden_sizes is not None else model_cfg.hidden_sizes
        lr = self.g_learning_rate if self.g_learning_rate is not None else model_cfg.learning_rate
        return MlpConfig(
            layer_sizes=(model_cfg.n_outputs, *hidden, n_parties),
            learning_rate=lr,
            momentum=model_cfg.momentum,
            epochs=model_cfg.epochs,
            batch_size=model_cfg.batch_size,
            seed=self.seed,
        )


@dataclass
class AdvTrainTrace:
    """Per-epoch means over minibatches."""

    f_loss: list[float] = field(default_factory=list)
    adversarial_loss: list[float] = field(default_factory=list)
    g_loss: list[float] = field(default_factory=list)
    g_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.f_loss)


@dataclass(frozen=True)
class CompositeLoss:
    objective: float
    class_loss: float
    adversarial_loss: float


def f_outputs(logprobs: np.ndarray, feed: str = "log_probabilities") -> np.ndarray:
    """The vector of f that g reads."""
    return logprobs if feed == "log_probabilities" else np.exp(logprobs)


def discriminator_forward(g: MlpModel, outputs: np.ndarray) -> np.ndarray:
    """Party log-probabilities for each row of f's outputs."""
    return forward(g, outputs)


def composite_loss_and_gradients(
    f: MlpModel,
    g: MlpModel,
    features: np.ndarray,
    targets: np.ndarray,
    party_targets: np.ndarray,
    defense: DefenseConfig,
) -> tuple[CompositeLoss, Gradients]:
    """f's adversarial objective and its gradient; g is only read."""
    f_cache = forward_cache(f, features)
    class_loss, grad_logprobs = nll_loss_and_grad(f_cache.logprobs, targets)
    g_cache = forward_cache(g, f_outputs(f_cache.logprobs, defense.feed))
    if defense.variant is Variant.ONE_HOT_PARTY:
        adv_loss, grad_g = nll_loss_and_grad(g_cache.logprobs, party_targets)
        sign = -defense.c_weight
    else:
        n_parties = g.config.n_outputs
        uniform = np.full((features.shape[0], n_parties), 1.0 / n_parties)
        adv_loss, grad_g = kl_to_target_loss_and_grad(g_cache.logprobs, uniform)
        sign = defense.c_weight
    if sign != 0:
        grad_outputs = backward(g, g_cache, grad_g).inputs
        if defense.feed == "probabilities":
            grad_outputs = grad_outputs * np.exp(f_cache.logprobs)
        grad_logprobs = grad_logprobs + sign * grad_outputs
    grads = backward(f, f_cache, grad_logprobs)
    return CompositeLoss(class_loss + sign * adv_loss, class_loss, adv_loss), grads


def f_step(
    f: MlpModel,
    g: MlpModel,
    features: np.ndarray,
    targets: np.ndarray,
    party_targets: np.ndarray,
    defense: DefenseConfig,
) -> tuple[MlpModel, CompositeLoss]:
    losses, grads = composite_loss_and_gradients(f, g, features, targets, party_targets, defense)
    return apply_gradients(f, grads), losses


def check_composite_gradient(
    f: MlpModel,
    g: MlpModel,
    features: np.ndarray,
    targets: np.ndarray,
    party_targets: np.ndarray,
    defense: DefenseConfig,
    epsilon: float = 1e-5,
) -> float:
    """Finite-difference check of f's composite gradient through the frozen g."""
    checked = f.copy()
    _, grads = composite_loss_and_gradients(checked, g, features, targets, party_targets, defense)

    def objective(model: MlpModel) -> float:
        losses, _ = composite_loss_and_gradients(
            model, g, features, targets, party_targets, defense
        )
        return losses.objective

    def pattern(model: MlpModel) -> np.ndarray:
        outputs = f_outputs(forward(model, features), defense.feed)
        return np.concatenate([hidden_pattern(model, features), hidden_pattern(g, outputs)])

    return max_relative_error(checked, grads, objective, epsilon, pattern)


def party_index(party_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct party ids (sorted) and each record's position among them."""
    parties = np.unique(party_ids)
    return parties, np.searchsorted(parties, party_ids)


def adversarial_train(
    pooled: Any, model_cfg: MlpConfig, defense: DefenseConfig
) -> tuple[MlpModel, MlpModel, AdvTrainTrace]:
    """Alternating mini-max training over pooled records tagged with party ids."""
    parties, index = party_index(pooled.party_ids)
    if parties.size < 2:
        raise ValueError(
            f"adversarial training needs at least two parties, got {parties.tolist()}"
        )
    batch = to_batch(pooled)
    f_cfg = model_cfg.resized(batch.features.shape[1], batch.targets.shape[1])
    g_cfg = defense.discriminator_config(f_cfg, parties.size)
    f = MlpModel.initialize(f_cfg)
    g = MlpModel.initialize(g_cfg)
    party_targets = one_hot(index, parties.size)
    trace = AdvTrainTrace()
    n = len(batch)
    logger.info(
        f"adversarial training ({defense.variant.value}, c={defense.c_weight}) "
        f"on {n} records from {parties.size} parties"
    )
    for epoch in range(f_cfg.epochs):
        sums = np.zeros(4)
        g_updates = 0
        for rows in minibatches(n, f_cfg.batch_size, f_cfg.seed, epoch):
            x, y, q = batch.features[rows], batch.targets[rows], party_targets[rows]
            outputs = f_outputs(forward(f, x), defense.feed)
            for _ in range(defense.g_steps_per_f_step):
                hits = discriminator_forward(g, outputs).argmax(axis=1) == index[rows]
                g, g_loss = backward_and_step(g, Batch(outputs, q))
                sums[2] += g_loss * rows.size
                sums[3] += hits.sum()
                g_updates += rows.size
            f, losses = f_step(f, g, x, y, q, defense)
            sums[0] += losses.class_loss * rows.size
            sums[1] += losses.adversarial_loss * rows.size
        trace.f_loss.append(sums[0] / n)
        trace.adversarial_loss.append(sums[1] / n)
        trace.g_loss.append(sums[2] / g_updates)
        trace.g_accuracy.append(sums[3] / g_updates)
        logger.debug(
            f"epoch {epoch + 1}/{f_cfg.epochs}: f_loss={trace.f_loss[-1]:.4f} "
            f"g_loss={trace.g_loss[-1]:.4f} g_acc={trace.g_accuracy[-1]:.3f}"
        )
    return f, g, trace
