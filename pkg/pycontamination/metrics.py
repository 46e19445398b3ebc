"""
Model metrics: validation accuracy, contamination accuracy, per-label
precision, party membership inference and the positive-rate ratio.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from pycontamination.attack import AttackSpec
from pycontamination.dataset import to_batch
from pycontamination.defense import f_outputs, party_index
from pycontamination.nn_core import Batch, MlpConfig, MlpModel, accuracy, forward, one_hot, predict, train
from pycontamination.text import BowCorpus

logger = logging.getLogger(__name__)

ATTACKER_HIDDEN_SIZES = (64,)


class UndefinedMetricError(ValueError):
    """The metric's denominator is zero for this data."""


def _is_unit(value: float | None) -> bool:
    return value is None or math.isnan(value) or 0.0 <= value <= 1.0


@dataclass(frozen=True)
class LabelPrecision:
    """Per-class precision; NaN marks classes that were never predicted."""

    precision: np.ndarray
    predicted_counts: np.ndarray

    @property
    def no_predictions(self) -> np.ndarray:
        return self.predicted_counts == 0

    def lowest(self) -> int | None:
        """Class with the smallest defined precision."""
        if self.no_predictions.all():
            return None
        return int(np.nanargmin(self.precision))


@dataclass
class MetricsReport:
    """Metrics of one model on one evaluation set.

    Undefined metrics are NaN and explained in ``notes``.
    """

    validation_accuracy: float
    contamination_accuracy: float
    per_label_precision: np.ndarray
    membership_inference_accuracy: float | None = None
    positive_rate_ratio: float | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name in ("validation_accuracy", "contamination_accuracy", "membership_inference_accuracy"):
            value = getattr(self, name)
            if not _is_unit(value):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        precision = np.asarray(self.per_label_precision, dtype=np.float64)
        if not all(_is_unit(p) for p in precision):
            raise ValueError(f"precisions must be in [0, 1], got {precision}")
        self.per_label_precision = precision

    def to_dict(self, label_values: Sequence[str], prefix: str = "") -> dict[str, Any]:
        """Flat mapping, one key per metric and per label."""
        out = {
            f"{prefix}validation_accuracy": self.validation_accuracy,
            f"{prefix}contamination_accuracy": self.contamination_accuracy,
        }
        for label, value in zip(label_values, self.per_label_precision):
            out[f"{prefix}precision_{label}"] = value
        if self.membership_inference_accuracy is not None:
            out[f"{prefix}membership_accuracy"] = self.membership_inference_accuracy
        if self.positive_rate_ratio is not None:
            out[f"{prefix}positive_rate_ratio"] = self.positive_rate_ratio
        return out


def contamination_mask(data: Any, spec: AttackSpec) -> np.ndarray:
    """Records holding every contaminated attribute value (or every token)."""
    if isinstance(data, BowCorpus):
        return data.contains(spec.contaminated_tokens)
    return data.matches(spec.contaminated_attributes)


def contamination_accuracy(model: MlpModel, data: Any, spec: AttackSpec) -> float:
    """Share of attribute-matching records classified as the contaminated label."""
    mask = contamination_mask(data, spec)
    if not mask.any():
        raise UndefinedMetricError(
            "no record holds the contaminated attribute values, contamination accuracy is undefined"
        )
    predictions = predict(model, to_batch(data).features)[mask]
    return float(np.mean(predictions == spec.contaminated_label))


def per_label_precision(model: MlpModel, data: Any) -> LabelPrecision:
    """True positives over predicted positives, per class.

    Example:
        class A predicted twice, once correctly -> precision_A = 0.5
    """
    batch = to_batch(data)
    if len(batch) == 0:
        raise ValueError("precision of an empty dataset is undefined")
    n_classes = batch.targets.shape[1]
    predictions = predict(model, batch.features)
    truth = batch.targets.argmax(axis=1)
    predicted = np.bincount(predictions, minlength=n_classes)
    hits = np.bincount(predictions[predictions == truth], minlength=n_classes)
    precision = np.full(n_classes, np.nan)
    np.divide(hits, predicted, out=precision, where=predicted > 0)
    return LabelPrecision(precision, predicted)


def attacker_config(n_inputs: int, n_parties: int, seed: int = 0) -> MlpConfig:
    return MlpConfig((n_inputs, *ATTACKER_HIDDEN_SIZES, n_parties), seed=seed)


def membership_inference_accuracy(
    f: MlpModel,
    pooled: Any,
    h_cfg: MlpConfig | None = None,
    holdout_fraction: float = 0.0,
    seed: int = 0,
    feed: str = "log_probabilities",
) -> float:
    """Accuracy of a model h that predicts the party from f's output vector.

    h is scored on its own training records unless ``holdout_fraction`` > 0,
    in which case a seeded share of the records is held out for scoring.
    """
    parties, index = party_index(pooled.party_ids)
    if parties.size < 2:
        raise ValueError("membership inference needs at least two parties")
    if not 0 <= holdout_fraction < 1:
        raise ValueError(f"holdout_fraction must be in [0, 1), got {holdout_fraction}")
    outputs = f_outputs(forward(f, to_batch(pooled).features), feed)
    batch = Batch(outputs, one_hot(index, parties.size))
    if h_cfg is None:
        h_cfg = attacker_config(outputs.shape[1], parties.size, seed)
    else:
        h_cfg = h_cfg.resized(outputs.shape[1], parties.size)
    if holdout_fraction == 0:
        h, _ = train(h_cfg, batch)
        return accuracy(h, batch)
    order = np.random.default_rng(seed).permutation(len(batch))
    n_held = max(1, int(round(len(batch) * holdout_fraction)))
    h, _ = train(h_cfg, batch.take(order[n_held:]))
    return accuracy(h, batch.take(order[:n_held]))


def positive_rate_ratio(model: MlpModel, data: Any, spec: AttackSpec) -> float:
    """P(predict l_r | attributes present) / P(predict l_r | attributes absent)."""
    mask = contamination_mask(data, spec)
    if mask.all() or not mask.any():
        raise UndefinedMetricError("positive-rate ratio needs records with and without the attributes")
    hit = predict(model, to_batch(data).features) == spec.contaminated_label
    absent_rate = float(hit[~mask].mean())
    if absent_rate == 0:
        raise UndefinedMetricError("the contaminated label is never predicted without the attributes")
    return float(hit[mask].mean()) / absent_rate


def evaluate(
    model: MlpModel,
    data: Any,
    spec: AttackSpec,
    pooled: Any | None = None,
    h_cfg: MlpConfig | None = None,
    holdout_fraction: float = 0.0,
    seed: int = 0,
    feed: str = "log_probabilities",
) -> MetricsReport:
    """Every metric of ``model`` on ``data``; membership inference runs when ``pooled`` is given.

    ``feed`` picks what the membership classifier sees, matching the discriminator input of a
    defended model.
    """
    notes = []
    try:
        contamination = contamination_accuracy(model, data, spec)
    except UndefinedMetricError as e:
        notes.append(str(e))
        contamination = float("nan")
    try:
        ratio = positive_rate_ratio(model, data, spec)
    except UndefinedMetricError as e:
        notes.append(str(e))
        ratio = float("nan")
    membership = None
    if pooled is not None:
        membership = membership_inference_accuracy(
            model, pooled, h_cfg, holdout_fraction, seed, feed=feed
        )
    return MetricsReport(
        validation_accuracy=accuracy(model, to_batch(data)),
        contamination_accuracy=contamination,
        per_label_precision=per_label_precision(model, data).precision,
        membership_inference_accuracy=membership,
        positive_rate_ratio=ratio,
        notes=notes,
    )
