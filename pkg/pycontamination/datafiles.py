"""
Reading and writing datasets, schema files and corpus files.
"""

from __future__ import annotations

import csv
import logging
import os
import re

import numpy as np
import pandas as pd
import yaml

from pycontamination.dataset import (
    LABEL_COLUMN,
    Attribute,
    AttributeSchema,
    Categorical,
    Dataset,
    Numeric,
    SchemaError,
)
from pycontamination.text import BowCorpus

logger = logging.getLogger(__name__)

MISSING_MARKERS = ("", "?")
MISSING_POLICIES = ("error", "drop")

ADULT_COLUMNS = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
]
ADULT_NUMERIC = {"age", "fnlwgt", "capital-gain", "capital-loss", "hours-per-week"}
EDUCATION_LABELS = ("Low", "Medium-Low", "Medium-High", "High")
EDUCATION_GROUPS = {
    "Preschool": "Low",
    "1st-4th": "Low",
    "5th-6th": "Low",
    "7th-8th": "Low",
    "9th": "Low",
    "10th": "Low",
    "11th": "Low",
    "12th": "Low",
    "HS-grad": "Medium-Low",
    "Some-college": "Medium-Low",
    "Assoc-voc": "Medium-High",
    "Assoc-acdm": "Medium-High",
    "Bachelors": "Medium-High",
    "Masters": "High",
    "Prof-school": "High",
    "Doctorate": "High",
}


class CsvFormatError(ValueError):
    """A data file line could not be parsed against the schema."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def load_schema(path: str) -> AttributeSchema:
    """Load a YAML schema file.

    Example:
        attributes:
          - {name: race, kind: categorical, values: [White, Black]}
          - {name: age, kind: numeric, min: 17, max: 90}
        label_values: [Low, Medium-Low, Medium-High, High]
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Schema file '{path}' does not exist.")
    with open(path, "r", encoding="utf-8") as f:
        spec = yaml.safe_load(f)
    if not isinstance(spec, dict):
        raise SchemaError(f"schema file '{path}' must hold a mapping")
    return AttributeSchema.from_dict(spec)


def save_schema(schema: AttributeSchema, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(schema.to_dict(), f, sort_keys=False)


def _parse_frame(
    raw: pd.DataFrame,
    schema: AttributeSchema,
    missing: str,
    first_line: int,
) -> pd.DataFrame:
    """Turn string cells into codes and floats; ``first_line`` is the file line of row 0."""
    if missing not in MISSING_POLICIES:
        raise ValueError(f"missing must be one of {MISSING_POLICIES}, got {missing!r}")
    lines = np.arange(len(raw)) + first_line
    absent = raw.isin(MISSING_MARKERS).any(axis=1).to_numpy()
    if absent.any():
        if missing == "error":
            raise CsvFormatError("missing value", line=int(lines[np.argmax(absent)]))
        logger.info(f"dropping {int(absent.sum())} rows with missing values")
        raw = raw.loc[~absent]
        lines = lines[~absent]

    parsed = {}
    clipped = 0
    for attribute in schema.attributes:
        cells = raw[attribute.name]
        kind = attribute.kind
        if isinstance(kind, Categorical):
            codes = pd.Categorical(cells, categories=list(kind.values)).codes.astype(np.int64)
            bad = np.flatnonzero(codes < 0)
            if bad.size:
                raise CsvFormatError(
                    f"unknown value '{cells.iloc[bad[0]]}' for '{attribute.name}'",
                    line=int(lines[bad[0]]),
                )
            parsed[attribute.name] = codes
        else:
            values = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise CsvFormatError(
                    f"'{cells.iloc[bad[0]]}' is not a number for '{attribute.name}'",
                    line=int(lines[bad[0]]),
                )
            outside = (values < kind.min) | (values > kind.max)
            clipped += int(outside.sum())
            parsed[attribute.name] = np.clip(values, kind.min, kind.max)
    labels = pd.Categorical(raw[LABEL_COLUMN], categories=list(schema.label_values)).codes
    bad = np.flatnonzero(labels < 0)
    if bad.size:
        raise CsvFormatError(
            f"unknown label '{raw[LABEL_COLUMN].iloc[bad[0]]}'", line=int(lines[bad[0]])
        )
    parsed[LABEL_COLUMN] = labels.astype(np.int64)
    frame = pd.DataFrame(parsed)
    if clipped:
        logger.warning(f"clipped {clipped} numeric values to their schema range")
    frame.attrs["clipped_values"] = clipped
    return frame


def _read_strings(path: str, **kwargs) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Data file '{path}' does not exist.")
    try:
        return pd.read_csv(
            path, dtype=str, keep_default_na=False, encoding="utf-8", **kwargs
        )
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise CsvFormatError(str(e), line=int(match.group(1)) if match else None) from e


def load_csv(path: str, schema: AttributeSchema, missing: str = "error") -> Dataset:
    """Read a CSV with a header of attribute names followed by ``label``.

    Numeric values outside the schema range are clipped; the count is kept
    in ``dataset.frame.attrs["clipped_values"]``.
    """
    raw = _read_strings(path)
    expected = [*schema.names, LABEL_COLUMN]
    if list(raw.columns) != expected:
        raise CsvFormatError(f"header {list(raw.columns)} does not match {expected}", line=1)
    frame = _parse_frame(raw, schema, missing, first_line=2)
    dataset = Dataset(schema, frame)
    dataset.frame.attrs["clipped_values"] = frame.attrs["clipped_values"]
    logger.info(f"loaded {len(dataset)} records from {path}")
    return dataset


def decode_frame(dataset: Dataset) -> pd.DataFrame:
    """Category names and label names instead of codes."""
    out = {}
    for attribute in dataset.schema.attributes:
        column = dataset.column(attribute.name)
        if isinstance(attribute.kind, Categorical):
            out[attribute.name] = np.asarray(attribute.kind.values, dtype=object)[column]
        else:
            out[attribute.name] = column
    out[LABEL_COLUMN] = np.asarray(dataset.schema.label_values, dtype=object)[dataset.labels]
    return pd.DataFrame(out)


def write_csv(dataset: Dataset, path: str) -> None:
    decode_frame(dataset).to_csv(
        path, index=False, quoting=csv.QUOTE_MINIMAL, lineterminator="\n", encoding="utf-8"
    )


def regroup_education(education: pd.Series) -> pd.Series:
    """Map Adult education levels to the four classes Low..High."""
    grouped = education.map(EDUCATION_GROUPS)
    unknown = grouped.isna()
    if unknown.any():
        raise CsvFormatError(f"unknown education level '{education[unknown].iloc[0]}'")
    return grouped


def adult_schema_from(raw: pd.DataFrame) -> AttributeSchema:
    """Schema with sorted category lists and observed numeric ranges."""
    attributes = []
    for name in raw.columns:
        if name == LABEL_COLUMN:
            continue
        if name in ADULT_NUMERIC:
            values = pd.to_numeric(raw[name], errors="coerce")
            low, high = float(values.min()), float(values.max())
            attributes.append(Attribute(name, Numeric(low, high if high > low else low + 1.0)))
        else:
            attributes.append(Attribute(name, Categorical(tuple(sorted(raw[name].unique())))))
    return AttributeSchema(tuple(attributes), EDUCATION_LABELS)


def load_adult(
    path: str, schema: AttributeSchema | None = None, missing: str = "drop"
) -> Dataset:
    """Read a raw UCI Adult file and relabel it by education group.

    ``education`` becomes the label (grouped into four classes);
    ``education-num`` encodes the same information and is dropped together
    with ``income``. Lines starting with ``|`` (the test file banner) are
    skipped.
    """
    raw = _read_strings(
        path, header=None, names=ADULT_COLUMNS, skipinitialspace=True, comment="|"
    )
    raw = raw.apply(lambda col: col.str.strip())
    raw = raw.loc[~(raw == "").all(axis=1)]
    if missing == "drop":
        keep = ~raw.isin(MISSING_MARKERS).any(axis=1)
        logger.info(f"dropping {int((~keep).sum())} Adult rows with missing values")
        raw = raw.loc[keep]
    raw[LABEL_COLUMN] = regroup_education(raw["education"])
    raw = raw.drop(columns=["education", "education-num", "income"]).reset_index(drop=True)
    if schema is None:
        schema = adult_schema_from(raw)
    frame = _parse_frame(raw, schema, missing="error", first_line=1)
    dataset = Dataset(schema, frame)
    logger.info(f"loaded {len(dataset)} Adult records from {path}")
    return dataset


def load_corpus(path: str) -> BowCorpus:
    """Read a YAML corpus: vocabulary, label_values, documents of sparse counts.

    Example:
        vocabulary: [ball, engine]
        label_values: [autos, baseball]
        documents:
          - {label: baseball, counts: {ball: 2}}
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Corpus file '{path}' does not exist.")
    with open(path, "r", encoding="utf-8") as f:
        spec = yaml.safe_load(f)
    vocabulary = [str(t) for t in spec["vocabulary"]]
    label_values = [str(v) for v in spec["label_values"]]
    position = {token: j for j, token in enumerate(vocabulary)}
    documents = spec.get("documents") or []
    counts = np.zeros((len(documents), len(vocabulary)), dtype=np.int64)
    labels = np.zeros(len(documents), dtype=np.int64)
    for i, doc in enumerate(documents):
        if str(doc["label"]) not in label_values:
            raise CsvFormatError(f"document {i}: unknown label '{doc['label']}'")
        labels[i] = label_values.index(str(doc["label"]))
        for token, n in (doc.get("counts") or {}).items():
            if str(token) not in position:
                raise CsvFormatError(f"document {i}: token '{token}' not in vocabulary")
            counts[i, position[str(token)]] = int(n)
    return BowCorpus(tuple(vocabulary), tuple(label_values), counts, labels)


def write_corpus(corpus: BowCorpus, path: str) -> None:
    documents = []
    for row, label in corpus.documents:
        nonzero = np.flatnonzero(row)
        documents.append(
            {
                "label": corpus.label_values[label],
                "counts": {corpus.vocabulary[j]: int(row[j]) for j in nonzero},
            }
        )
    spec = {
        "vocabulary": list(corpus.vocabulary),
        "label_values": list(corpus.label_values),
        "documents": documents,
    }
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(spec, f, sort_keys=False)
