"""
Synthetic tabular tasks with a known labelling rule.

Labels come from a seeded logistic rule over a random projection of the
encoded features, plus declared value-label biases. An optional latent
``group`` attribute shifts the attribute and label distributions, which
gives parties drawn from different distributions once the data is split
with ``partition_by_attribute(dataset, "group", ...)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from pycontamination.dataset import (
    LABEL_COLUMN,
    Attribute,
    AttributeSchema,
    Categorical,
    Dataset,
    Numeric,
    encode,
)
from pycontamination.nn_core import log_softmax

logger = logging.getLogger(__name__)

GROUP_ATTRIBUTE = "group"


@dataclass(frozen=True)
class ValueBias:
    """Adds ``strength`` to the logit of ``label`` when ``attribute == value``."""

    attribute: int
    value: int
    label: int
    strength: float


@dataclass(frozen=True)
class SynthSpec:
    """Descriptor of a synthetic task.

    Attribute indices (in ``biases``, ``rule_attributes``, ``value_weights``)
    refer to the generated schema: ``group`` first when ``n_groups > 0``,
    then ``cat_0..``, then ``num_0..``.

    ``value_weights`` sets the base rate of each category of an attribute
    (normalized); unspecified attributes are uniform.
    ``label_temperature = 0`` labels by argmax, making the task separable
    by the rule.
    """

    n_records: int = 6000
    categorical_cardinalities: tuple[int, ...] = (4, 4, 3, 5)
    n_numeric: int = 3
    n_classes: int = 3
    biases: tuple[ValueBias, ...] = ()
    rule_attributes: tuple[int, ...] | None = None
    signal: float = 4.0
    label_temperature: float = 1.0
    n_groups: int = 0
    group_shift: float = 0.0
    value_weights: dict[int, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "categorical_cardinalities", tuple(int(c) for c in self.categorical_cardinalities)
        )
        object.__setattr__(
            self,
            "biases",
            tuple(b if isinstance(b, ValueBias) else ValueBias(**b) for b in self.biases),
        )
        if self.rule_attributes is not None:
            object.__setattr__(self, "rule_attributes", tuple(self.rule_attributes))

    @property
    def n_attributes(self) -> int:
        return (1 if self.n_groups > 0 else 0) + len(self.categorical_cardinalities) + self.n_numeric

    def validate(self) -> None:
        if self.n_attributes == 0 or len(self.categorical_cardinalities) + self.n_numeric == 0:
            raise ValueError("synthetic task needs at least one attribute")
        if self.n_classes < 2:
            raise ValueError("synthetic task needs at least two classes")
        if self.n_records <= 0:
            raise ValueError("n_records must be positive")
        if any(c < 1 for c in self.categorical_cardinalities):
            raise ValueError("categorical cardinalities must be positive")
        if self.n_groups == 1 or self.n_groups < 0:
            raise ValueError("n_groups must be 0 or at least 2")
        if self.label_temperature < 0 or self.group_shift < 0:
            raise ValueError("label_temperature and group_shift must be non-negative")
        schema = self.schema()
        for bias in self.biases:
            if not 0 <= bias.attribute < self.n_attributes:
                raise ValueError(f"bias attribute {bias.attribute} out of range")
            kind = schema.attributes[bias.attribute].kind
            if not isinstance(kind, Categorical) or not 0 <= bias.value < kind.width:
                raise ValueError(f"bias value {bias.value} invalid for attribute {bias.attribute}")
            if not 0 <= bias.label < self.n_classes:
                raise ValueError(f"bias label {bias.label} out of range")
        for attribute, weights in self.value_weights.items():
            kind = schema.attributes[attribute].kind
            if not isinstance(kind, Categorical) or len(weights) != kind.width:
                raise ValueError(f"value_weights for attribute {attribute} do not match its values")
            if min(weights) < 0 or sum(weights) <= 0:
                raise ValueError(f"value_weights for attribute {attribute} must be non-negative")

    def schema(self) -> AttributeSchema:
        attributes = []
        if self.n_groups > 0:
            attributes.append(
                Attribute(GROUP_ATTRIBUTE, Categorical(tuple(f"g{g}" for g in range(self.n_groups))))
            )
        for i, cardinality in enumerate(self.categorical_cardinalities):
            attributes.append(
                Attribute(f"cat_{i}", Categorical(tuple(f"v{v}" for v in range(cardinality))))
            )
        for i in range(self.n_numeric):
            attributes.append(Attribute(f"num_{i}", Numeric(0.0, 1.0)))
        return AttributeSchema(tuple(attributes), tuple(f"c{k}" for k in range(self.n_classes)))


def _sample_categories(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Draw one category per row of a (rows, values) probability matrix."""
    cumulative = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cumulative[:, -1]
    return np.minimum((cumulative < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Sample ``spec.n_records`` records i.i.d. from the descriptor."""
    spec.validate()
    schema = spec.schema()
    rng = np.random.default_rng(seed)
    n = spec.n_records
    offset = 1 if spec.n_groups > 0 else 0

    # rule parameters are drawn before any record so they depend on the seed only
    n_features = schema.n_features
    projection = rng.standard_normal((spec.n_classes, n_features)) / np.sqrt(n_features)
    category_shift = [
        rng.standard_normal((max(spec.n_groups, 1), c)) for c in spec.categorical_cardinalities
    ]
    numeric_shift = rng.standard_normal((max(spec.n_groups, 1), spec.n_numeric)) * 0.15
    label_shift = rng.standard_normal((max(spec.n_groups, 1), spec.n_classes))

    columns = {}
    groups = np.zeros(n, dtype=np.int64)
    if spec.n_groups > 0:
        groups = rng.integers(spec.n_groups, size=n)
        columns[GROUP_ATTRIBUTE] = groups
    for i, cardinality in enumerate(spec.categorical_cardinalities):
        attribute = offset + i
        base = np.asarray(spec.value_weights.get(attribute, (1.0,) * cardinality), dtype=np.float64)
        with np.errstate(divide="ignore"):
            logits = np.log(base / base.sum())[None, :] + spec.group_shift * category_shift[i][groups]
        probs = np.exp(log_softmax(logits))
        columns[f"cat_{i}"] = _sample_categories(rng, probs)
    for i in range(spec.n_numeric):
        raw = rng.random(n) + spec.group_shift * numeric_shift[groups, i]
        columns[f"num_{i}"] = np.clip(raw, 0.0, 1.0)
    columns[LABEL_COLUMN] = np.zeros(n, dtype=np.int64)
    frame = pd.DataFrame(columns)

    features = encode(Dataset(schema, frame)).features
    if spec.rule_attributes is not None:
        keep = np.zeros(n_features, dtype=bool)
        cursor = 0
        for j, attribute in enumerate(schema.attributes):
            width = attribute.kind.width
            keep[cursor : cursor + width] = j in spec.rule_attributes
            cursor += width
        features = features * keep
    logits = spec.signal * (features @ projection.T)
    logits -= logits.mean(axis=0, keepdims=True)
    logits += spec.group_shift * label_shift[groups]
    for bias in spec.biases:
        hit = frame[schema.names[bias.attribute]].to_numpy() == bias.value
        logits[hit, bias.label] += bias.strength

    if spec.label_temperature == 0:
        labels = logits.argmax(axis=1)
    else:
        probs = np.exp(log_softmax(logits / spec.label_temperature))
        labels = _sample_categories(rng, probs)
    frame[LABEL_COLUMN] = labels.astype(np.int64)
    logger.debug(
        f"generated {n} synthetic records, label counts {np.bincount(labels, minlength=spec.n_classes)}"
    )
    return Dataset(schema, frame)
