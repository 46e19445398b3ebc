"""
Schema-typed tabular datasets and their numeric encoding.

Records live in a pandas DataFrame: one column per attribute (category codes
for categorical attributes, floats for numeric ones), a ``label`` column of
class indices and, for pooled data, a ``party`` column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterator, Sequence, Union

import numpy as np
import pandas as pd

from pycontamination.nn_core import Batch, one_hot

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"
PARTY_COLUMN = "party"


class SchemaError(ValueError):
    """A record or schema declaration does not fit the schema rules."""


@dataclass(frozen=True)
class Categorical:
    values: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Numeric:
    min: float
    max: float

    @property
    def width(self) -> int:
        return 1


Kind = Union[Categorical, Numeric]


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: Kind

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.kind, Categorical)


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes plus the class names of the label."""

    attributes: tuple[Attribute, ...]
    label_values: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "label_values", tuple(self.label_values))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"attribute names must be unique: {names}")
        if LABEL_COLUMN in names or PARTY_COLUMN in names:
            raise SchemaError(f"'{LABEL_COLUMN}' and '{PARTY_COLUMN}' are reserved names")
        for attribute in self.attributes:
            kind = attribute.kind
            if isinstance(kind, Categorical) and not kind.values:
                raise SchemaError(f"categorical attribute '{attribute.name}' has no values")
            if isinstance(kind, Numeric) and not kind.min < kind.max:
                raise SchemaError(
                    f"numeric attribute '{attribute.name}' needs min < max, "
                    f"got [{kind.min}, {kind.max}]"
                )
        if len(self.label_values) < 2:
            raise SchemaError("a schema needs at least two label values")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def n_classes(self) -> int:
        return len(self.label_values)

    @property
    def n_features(self) -> int:
        return sum(a.kind.width for a in self.attributes)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown attribute '{name}'") from None

    def label_index(self, name: str) -> int:
        try:
            return self.label_values.index(name)
        except ValueError:
            raise SchemaError(f"unknown label '{name}'") from None

    def value_code(self, attribute: int, value: Any) -> int | float:
        """Map a raw value (category name or number) to its stored form."""
        kind = self.attributes[attribute].kind
        if isinstance(kind, Categorical):
            if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
                if not 0 <= value < kind.width:
                    raise SchemaError(
                        f"category index {value} out of range for "
                        f"'{self.attributes[attribute].name}'"
                    )
                return int(value)
            try:
                return kind.values.index(str(value))
            except ValueError:
                raise SchemaError(
                    f"value '{value}' not in '{self.attributes[attribute].name}'"
                ) from None
        return float(value)

    def feature_names(self) -> list[str]:
        names = []
        for attribute in self.attributes:
            if isinstance(attribute.kind, Categorical):
                names.extend(f"{attribute.name}={v}" for v in attribute.kind.values)
            else:
                names.append(attribute.name)
        return names

    def to_dict(self) -> dict:
        attributes = []
        for attribute in self.attributes:
            if isinstance(attribute.kind, Categorical):
                attributes.append(
                    {"name": attribute.name, "kind": "categorical", "values": list(attribute.kind.values)}
                )
            else:
                attributes.append(
                    {
                        "name": attribute.name,
                        "kind": "numeric",
                        "min": attribute.kind.min,
                        "max": attribute.kind.max,
                    }
                )
        return {"attributes": attributes, "label_values": list(self.label_values)}

    @classmethod
    def from_dict(cls, spec: dict) -> "AttributeSchema":
        if "attributes" not in spec or "label_values" not in spec:
            raise SchemaError("schema needs 'attributes' and 'label_values'")
        attributes = []
        for entry in spec["attributes"]:
            kind = entry.get("kind")
            if kind == "categorical":
                attributes.append(
                    Attribute(entry["name"], Categorical(tuple(str(v) for v in entry["values"])))
                )
            elif kind == "numeric":
                attributes.append(
                    Attribute(entry["name"], Numeric(float(entry["min"]), float(entry["max"])))
                )
            else:
                raise SchemaError(f"attribute '{entry.get('name')}' has unknown kind {kind!r}")
        return cls(tuple(attributes), tuple(str(v) for v in spec["label_values"]))


@dataclass(frozen=True)
class Record:
    values: tuple
    label: int


class Dataset:
    """Records of one schema, stored as a DataFrame.

    Treat instances as immutable: every transformation returns a new Dataset.
    """

    def __init__(self, schema: AttributeSchema, frame: pd.DataFrame) -> None:
        self.schema = schema
        self.frame = frame.reset_index(drop=True)
        self.validate()

    @classmethod
    def from_records(
        cls,
        schema: AttributeSchema,
        records: Sequence[Record],
        party_ids: Sequence[int] | None = None,
    ) -> "Dataset":
        arity = len(schema.attributes)
        for i, record in enumerate(records):
            if len(record.values) != arity:
                raise SchemaError(
                    f"record {i} has {len(record.values)} values, schema has {arity}"
                )
        columns = {}
        for j, attribute in enumerate(schema.attributes):
            dtype = np.int64 if attribute.is_categorical else np.float64
            columns[attribute.name] = np.array([r.values[j] for r in records], dtype=dtype)
        columns[LABEL_COLUMN] = np.array([r.label for r in records], dtype=np.int64)
        if party_ids is not None:
            columns[PARTY_COLUMN] = np.asarray(party_ids, dtype=np.int64)
        return cls(schema, pd.DataFrame(columns))

    def validate(self) -> None:
        expected = [*self.schema.names, LABEL_COLUMN]
        present = [c for c in self.frame.columns if c != PARTY_COLUMN]
        if present != expected:
            raise SchemaError(f"columns {present} do not match schema {expected}")
        for attribute in self.schema.attributes:
            column = self.frame[attribute.name].to_numpy()
            if attribute.is_categorical:
                bad = np.flatnonzero((column < 0) | (column >= attribute.kind.width))
                if bad.size:
                    raise SchemaError(
                        f"record {bad[0]}: category index {column[bad[0]]} out of "
                        f"range for '{attribute.name}'"
                    )
            elif not np.isfinite(column.astype(np.float64)).all():
                bad = np.flatnonzero(~np.isfinite(column.astype(np.float64)))
                raise SchemaError(f"record {bad[0]}: non-finite value for '{attribute.name}'")
        labels = self.frame[LABEL_COLUMN].to_numpy()
        bad = np.flatnonzero((labels < 0) | (labels >= self.schema.n_classes))
        if bad.size:
            raise SchemaError(f"record {bad[0]}: label index {labels[bad[0]]} out of range")

    def __len__(self) -> int:
        return len(self.frame)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Dataset)
            and self.schema == other.schema
            and self.frame.equals(other.frame)
        )

    def __repr__(self) -> str:
        return f"Dataset({len(self)} records, {len(self.schema.attributes)} attributes)"

    @property
    def labels(self) -> np.ndarray:
        return self.frame[LABEL_COLUMN].to_numpy()

    @property
    def has_party_ids(self) -> bool:
        return PARTY_COLUMN in self.frame.columns

    @property
    def party_ids(self) -> np.ndarray:
        if not self.has_party_ids:
            raise ValueError("dataset carries no party ids")
        return self.frame[PARTY_COLUMN].to_numpy()

    def column(self, attribute: int | str) -> np.ndarray:
        name = attribute if isinstance(attribute, str) else self.schema.names[attribute]
        return self.frame[name].to_numpy()

    def record(self, i: int) -> Record:
        row = self.frame.iloc[i]
        values = tuple(
            int(row[a.name]) if a.is_categorical else float(row[a.name])
            for a in self.schema.attributes
        )
        return Record(values, int(row[LABEL_COLUMN]))

    def records(self) -> Iterator[Record]:
        for i in range(len(self)):
            yield self.record(i)

    def take(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(self.schema, self.frame.iloc[np.asarray(indices, dtype=np.int64)])

    def with_frame(self, frame: pd.DataFrame) -> "Dataset":
        return Dataset(self.schema, frame)

    def with_party(self, party_id: int) -> "Dataset":
        frame = self.frame.copy()
        frame[PARTY_COLUMN] = np.int64(party_id)
        return Dataset(self.schema, frame)

    def without_party(self) -> "Dataset":
        return Dataset(self.schema, self.frame.drop(columns=[PARTY_COLUMN], errors="ignore"))

    @classmethod
    def concat(cls, datasets: Sequence["Dataset"]) -> "Dataset":
        if not datasets:
            raise ValueError("nothing to concatenate")
        schema = datasets[0].schema
        for i, dataset in enumerate(datasets[1:], start=1):
            if dataset.schema != schema:
                raise SchemaError(f"dataset {i} has a different schema")
        return cls(schema, pd.concat([d.frame for d in datasets], ignore_index=True))

    def matches(self, attribute_values: Sequence[tuple[int, Any]]) -> np.ndarray:
        """Boolean mask of records holding every (attribute, value) pair."""
        mask = np.ones(len(self), dtype=bool)
        for attribute, value in attribute_values:
            mask &= self.column(attribute) == value
        return mask


@dataclass(frozen=True)
class PartyData:
    party_id: int
    train: Any
    val: Any

    def __post_init__(self) -> None:
        if self.party_id < 0:
            raise ValueError(f"party_id must be non-negative, got {self.party_id}")
        train_schema = getattr(self.train, "schema", None)
        val_schema = getattr(self.val, "schema", None)
        if train_schema is not None and train_schema != val_schema:
            raise SchemaError(f"party {self.party_id}: train and val schemas differ")

    def with_train(self, train: Any) -> "PartyData":
        return PartyData(self.party_id, train, self.val)


def encode(dataset: Dataset) -> Batch:
    """One-hot categorical attributes, min-max scale numeric ones, one-hot labels.

    Example:
        categorical (2 values) + numeric [0, 100], record (0, 50.0)
        -> features (1, 0, 0.5)
    """
    if len(dataset) == 0:
        raise ValueError("cannot encode an empty dataset")
    blocks = []
    for attribute in dataset.schema.attributes:
        column = dataset.column(attribute.name)
        kind = attribute.kind
        if isinstance(kind, Categorical):
            bad = np.flatnonzero((column < 0) | (column >= kind.width))
            if bad.size:
                raise SchemaError(
                    f"record {bad[0]}: value {column[bad[0]]} outside '{attribute.name}'"
                )
            blocks.append(one_hot(column, kind.width))
        else:
            column = column.astype(np.float64)
            bad = np.flatnonzero((column < kind.min) | (column > kind.max))
            if bad.size:
                raise SchemaError(
                    f"record {bad[0]}: value {column[bad[0]]} outside "
                    f"[{kind.min}, {kind.max}] for '{attribute.name}'"
                )
            blocks.append(((column - kind.min) / (kind.max - kind.min))[:, None])
    features = np.hstack(blocks) if blocks else np.zeros((len(dataset), 0))
    return Batch(features, one_hot(dataset.labels, dataset.schema.n_classes))


def to_batch(data: Any) -> Batch:
    """Encode a tabular Dataset or a bag-of-words corpus."""
    from pycontamination.text import BowCorpus, bow_encode

    if isinstance(data, BowCorpus):
        return bow_encode(data)
    return encode(data)


def concat_data(datasets: Sequence[Any]) -> Any:
    return type(datasets[0]).concat(datasets)


def partition(
    dataset: Any,
    n_parties: int,
    train_per_party: int,
    val_size: int,
    seed: int,
    party_val_size: int = 0,
) -> tuple[list[PartyData], Any]:
    """Disjoint shuffled party train/val subsets plus one shared validation set.

    Works for any data object offering ``len`` and ``take`` (tabular or text).
    """
    if n_parties <= 0 or train_per_party <= 0 or val_size < 0 or party_val_size < 0:
        raise ValueError("party counts and sizes must be positive")
    needed = n_parties * (train_per_party + party_val_size) + val_size
    if needed > len(dataset):
        raise ValueError(
            f"partition needs {needed} records, dataset has {len(dataset)}"
        )
    order = np.random.default_rng(seed).permutation(len(dataset))
    parties = []
    cursor = 0
    for party_id in range(n_parties):
        train_idx = order[cursor : cursor + train_per_party]
        cursor += train_per_party
        val_idx = order[cursor : cursor + party_val_size]
        cursor += party_val_size
        parties.append(PartyData(party_id, dataset.take(train_idx), dataset.take(val_idx)))
    shared_val = dataset.take(order[cursor : cursor + val_size])
    logger.debug(
        f"partitioned {len(dataset)} records into {n_parties} x {train_per_party} "
        f"(+{party_val_size} val) and a shared validation set of {val_size}"
    )
    return parties, shared_val


def partition_by_attribute(
    dataset: Dataset,
    attribute: int | str,
    seed: int,
    party_val_fraction: float = 0.1,
    shared_val_fraction: float = 0.2,
    min_records: int = 2,
) -> tuple[list[PartyData], Dataset]:
    """One party per value of a categorical attribute.

    Each value's records are shuffled, a share goes to the shared validation
    set, a share (at least one record) to the party's own validation set and
    the rest to its training set. Values with fewer than ``min_records``
    records, or none left for training, are skipped.
    Party ids are assigned in value order, counting only kept values.
    """
    index = attribute if isinstance(attribute, int) else dataset.schema.index_of(attribute)
    kind = dataset.schema.attributes[index].kind
    if not isinstance(kind, Categorical):
        raise SchemaError(f"cannot partition by numeric attribute {index}")
    if not 0 <= party_val_fraction < 1 or not 0 <= shared_val_fraction < 1:
        raise ValueError("validation fractions must be in [0, 1)")
    rng = np.random.default_rng(seed)
    column = dataset.column(index)
    parties, shared = [], []
    for value in range(kind.width):
        members = np.flatnonzero(column == value)
        if members.size < min_records:
            logger.info(f"skipping value '{kind.values[value]}' with {members.size} records")
            continue
        members = rng.permutation(members)
        n_shared = int(round(members.size * shared_val_fraction))
        n_val = max(1, int(round(members.size * party_val_fraction)))
        if members.size - n_shared - n_val < 1:
            logger.info(
                f"skipping value '{kind.values[value]}': {members.size} records leave no training set"
            )
            continue
        shared.append(members[:n_shared])
        val_idx = members[n_shared : n_shared + n_val]
        train_idx = members[n_shared + n_val :]
        parties.append(
            PartyData(len(parties), dataset.take(train_idx), dataset.take(val_idx))
        )
    if len(parties) < 2:
        raise ValueError("partition by attribute produced fewer than two parties")
    return parties, dataset.take(np.concatenate(shared))


def pool(parties: Sequence[PartyData]) -> Any:
    """Concatenate party training sets in party-id order, tagging party ids."""
    ordered = sorted(parties, key=lambda p: p.party_id)
    return concat_data([p.train.with_party(p.party_id) for p in ordered])
