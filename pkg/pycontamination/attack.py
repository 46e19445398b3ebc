"""
Training-time contamination: plant an attribute-label correlation in the
records an attacker controls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from pycontamination.dataset import Categorical, Dataset, PartyData, SchemaError
from pycontamination.text import BowCorpus

logger = logging.getLogger(__name__)


class BudgetError(ValueError):
    """The contamination budget cannot be spent on the records available."""


@dataclass(frozen=True)
class AttackSpec:
    """What the attacker plants and how many records it may touch.

    ``contaminated_attributes`` holds (attribute index, stored value) pairs for
    tabular data; ``contaminated_tokens`` holds words for text data.
    """

    contaminated_label: int
    budget: int
    attacker_parties: frozenset[int] = field(default_factory=frozenset)
    contaminated_attributes: tuple[tuple[int, Any], ...] = ()
    contaminated_tokens: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attacker_parties", frozenset(self.attacker_parties))
        object.__setattr__(
            self,
            "contaminated_attributes",
            tuple((int(a), v) for a, v in self.contaminated_attributes),
        )
        object.__setattr__(self, "contaminated_tokens", tuple(self.contaminated_tokens))
        if self.budget < 0:
            raise BudgetError(f"budget must be non-negative, got {self.budget}")
        if self.budget > 0 and not self.attacker_parties:
            raise BudgetError("a positive budget needs at least one attacker party")
        if not self.contaminated_attributes and not self.contaminated_tokens:
            raise ValueError("an attack needs contaminated attributes or tokens")

    def with_budget(self, budget: int) -> "AttackSpec":
        return AttackSpec(
            self.contaminated_label,
            budget,
            self.attacker_parties,
            self.contaminated_attributes,
            self.contaminated_tokens,
        )

    def validate_for(self, data: Any) -> None:
        """Check label and attribute values against a dataset or corpus."""
        if isinstance(data, BowCorpus):
            n_classes = data.n_classes
            if not self.contaminated_tokens:
                raise ValueError("text data needs contaminated tokens")
        else:
            schema = data.schema
            n_classes = schema.n_classes
            if not self.contaminated_attributes:
                raise ValueError("tabular data needs contaminated attributes")
            for attribute, value in self.contaminated_attributes:
                if not 0 <= attribute < len(schema.attributes):
                    raise SchemaError(f"contaminated attribute {attribute} out of range")
                kind = schema.attributes[attribute].kind
                if isinstance(kind, Categorical):
                    if not 0 <= int(value) < kind.width or int(value) != value:
                        raise SchemaError(
                            f"value {value} invalid for '{schema.attributes[attribute].name}'"
                        )
                elif not kind.min <= value <= kind.max:
                    raise SchemaError(
                        f"value {value} outside range of '{schema.attributes[attribute].name}'"
                    )
        if not 0 <= self.contaminated_label < n_classes:
            raise SchemaError(f"contaminated label {self.contaminated_label} out of range")


@dataclass(frozen=True)
class ContaminationMark:
    record: int
    original_label: int
    flipped: bool


def _contaminate(
    labels: np.ndarray, target: int, budget: int, plant: Callable[[int], None]
) -> tuple[np.ndarray, list[ContaminationMark]]:
    """Replay the attacker's two passes over ``labels`` in stored order.

    Pass one plants the attributes on records already labelled ``target``;
    the remaining budget then flips other records to ``target`` while
    planting. Returns the new labels and one mark per touched record.
    """
    if budget > labels.shape[0]:
        raise BudgetError(f"budget {budget} exceeds the {labels.shape[0]} records available")
    labels = labels.copy()
    marks: list[ContaminationMark] = []
    if budget == 0:
        return labels, marks
    for i in range(labels.shape[0]):
        if budget == 0:
            return labels, marks
        if labels[i] == target:
            plant(i)
            marks.append(ContaminationMark(i, int(labels[i]), False))
            budget -= 1
    while budget != 0:
        progressed = False
        for i in range(labels.shape[0]):
            if budget == 0:
                break
            if labels[i] != target:
                plant(i)
                marks.append(ContaminationMark(i, int(labels[i]), True))
                labels[i] = target
                budget -= 1
                progressed = True
        # every record carries the target after one sweep, so a stalled sweep means bad input
        assert progressed, "contamination sweep made no progress"
    return labels, marks


def manipulate_data(train: Dataset, spec: AttackSpec) -> tuple[Dataset, list[ContaminationMark]]:
    """Contaminate ``spec.budget`` records of a tabular training set."""
    spec.validate_for(train)
    frame = train.frame.copy()
    columns = {a: frame[train.schema.names[a]].to_numpy().copy() for a, _ in spec.contaminated_attributes}

    def plant(i: int) -> None:
        for attribute, value in spec.contaminated_attributes:
            columns[attribute][i] = value

    labels, marks = _contaminate(train.labels, spec.contaminated_label, spec.budget, plant)
    if not marks:
        return train, marks
    for attribute, values in columns.items():
        frame[train.schema.names[attribute]] = values
    frame["label"] = labels
    logger.debug(
        f"contaminated {len(marks)} records, {sum(m.flipped for m in marks)} labels flipped"
    )
    return train.with_frame(frame), marks


def insert_token(corpus: BowCorpus, spec: AttackSpec) -> tuple[BowCorpus, list[ContaminationMark]]:
    """Text variant: planting adds one occurrence of each contaminated token."""
    spec.validate_for(corpus)
    if spec.budget > len(corpus):
        raise BudgetError(f"budget {spec.budget} exceeds the {len(corpus)} documents available")
    if spec.budget == 0:
        return corpus, []
    for token in spec.contaminated_tokens:
        corpus = corpus.with_token(token)
    counts = corpus.counts.copy()
    columns = [corpus.token_index(t) for t in spec.contaminated_tokens]

    def plant(i: int) -> None:
        for j in columns:
            counts[i, j] += 1

    labels, marks = _contaminate(corpus.labels, spec.contaminated_label, spec.budget, plant)
    return (
        BowCorpus(corpus.vocabulary, corpus.label_values, counts, labels, corpus.party_ids_),
        marks,
    )


def contaminate(data: Any, spec: AttackSpec) -> tuple[Any, list[ContaminationMark]]:
    if isinstance(data, BowCorpus):
        return insert_token(data, spec)
    return manipulate_data(data, spec)


def split_budget(
    capacities: Sequence[int], budget: int, rng: np.random.Generator
) -> list[int]:
    """Assign each budget slot to a uniformly chosen party with room left."""
    if budget > sum(capacities):
        raise BudgetError(f"budget {budget} exceeds the {sum(capacities)} attacker records")
    shares = [0] * len(capacities)
    open_parties = [i for i, c in enumerate(capacities) if c > 0]
    for _ in range(budget):
        k = open_parties[rng.integers(len(open_parties))]
        shares[k] += 1
        if shares[k] == capacities[k]:
            open_parties.remove(k)
    return shares


def distribute_contamination(
    parties: Sequence[PartyData], spec: AttackSpec, seed: int
) -> list[PartyData]:
    """Spread the budget over the attacker parties and contaminate each share."""
    ids = {p.party_id for p in parties}
    unknown = spec.attacker_parties - ids
    if unknown:
        raise ValueError(f"attacker parties {sorted(unknown)} are not among {sorted(ids)}")
    attackers = [p for p in parties if p.party_id in spec.attacker_parties]
    attackers.sort(key=lambda p: p.party_id)
    rng = np.random.default_rng(seed)
    shares = split_budget([len(p.train) for p in attackers], spec.budget, rng)
    share_of = {p.party_id: s for p, s in zip(attackers, shares)}
    out = []
    for party in parties:
        if party.party_id not in share_of:
            out.append(party)
            continue
        train, marks = contaminate(party.train, spec.with_budget(share_of[party.party_id]))
        logger.info(f"party {party.party_id}: {len(marks)} contaminated records")
        out.append(party.with_train(train))
    return out
