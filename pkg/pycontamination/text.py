"""
Bag-of-words corpora.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from pycontamination.nn_core import Batch, one_hot

TOKEN_PATTERN = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> list[str]:
    return TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True, eq=False)
class BowCorpus:
    """Token-count vectors over a fixed vocabulary, one label per document.

    ``party_ids`` is set only on pooled corpora.
    """

    vocabulary: tuple[str, ...]
    label_values: tuple[str, ...]
    counts: np.ndarray
    labels: np.ndarray
    party_ids_: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        object.__setattr__(self, "label_values", tuple(self.label_values))
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1, len(self.vocabulary))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary tokens must be unique")
        if counts.shape[0] != labels.shape[0]:
            raise ValueError(
                f"{counts.shape[0]} count vectors but {labels.shape[0]} labels"
            )
        if (counts < 0).any():
            row = int(np.argwhere(counts < 0)[0][0])
            raise ValueError(f"document {row} has a negative token count")
        bad = np.flatnonzero((labels < 0) | (labels >= len(self.label_values)))
        if bad.size:
            raise ValueError(f"document {bad[0]}: label index {labels[bad[0]]} out of range")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", labels)
        if self.party_ids_ is not None:
            object.__setattr__(self, "party_ids_", np.asarray(self.party_ids_, dtype=np.int64))

    @classmethod
    def from_texts(
        cls,
        texts: Sequence[str],
        labels: Sequence[str],
        label_values: Sequence[str] | None = None,
        vocabulary: Sequence[str] | None = None,
    ) -> "BowCorpus":
        """Tokenize raw documents; the vocabulary defaults to all tokens, sorted."""
        tokenized = [Counter(tokenize(t)) for t in texts]
        if vocabulary is None:
            vocabulary = sorted(set().union(*tokenized)) if tokenized else []
        if label_values is None:
            label_values = sorted(set(labels))
        position = {token: j for j, token in enumerate(vocabulary)}
        counts = np.zeros((len(texts), len(vocabulary)), dtype=np.int64)
        for i, doc in enumerate(tokenized):
            for token, n in doc.items():
                if token in position:
                    counts[i, position[token]] = n
        label_idx = [list(label_values).index(label) for label in labels]
        return cls(tuple(vocabulary), tuple(label_values), counts, np.array(label_idx))

    def __len__(self) -> int:
        return self.counts.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BowCorpus):
            return NotImplemented
        same_party = (self.party_ids_ is None and other.party_ids_ is None) or (
            self.party_ids_ is not None
            and other.party_ids_ is not None
            and np.array_equal(self.party_ids_, other.party_ids_)
        )
        return (
            self.vocabulary == other.vocabulary
            and self.label_values == other.label_values
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.labels, other.labels)
            and same_party
        )

    @property
    def documents(self) -> Iterator[tuple[np.ndarray, int]]:
        for row, label in zip(self.counts, self.labels):
            yield row, int(label)

    @property
    def n_classes(self) -> int:
        return len(self.label_values)

    @property
    def has_party_ids(self) -> bool:
        return self.party_ids_ is not None

    @property
    def party_ids(self) -> np.ndarray:
        if self.party_ids_ is None:
            raise ValueError("corpus carries no party ids")
        return self.party_ids_

    def token_index(self, token: str) -> int | None:
        try:
            return self.vocabulary.index(token)
        except ValueError:
            return None

    def with_token(self, token: str) -> "BowCorpus":
        """Append ``token`` as a new final column if it is missing."""
        if token in self.vocabulary:
            return self
        counts = np.hstack([self.counts, np.zeros((len(self), 1), dtype=np.int64)])
        return BowCorpus(
            (*self.vocabulary, token), self.label_values, counts, self.labels, self.party_ids_
        )

    def with_vocabulary(self, vocabulary: Sequence[str]) -> "BowCorpus":
        """Re-express counts over ``vocabulary``; it must contain every current token."""
        missing = [t for t in self.vocabulary if t not in vocabulary]
        if missing:
            raise ValueError(f"target vocabulary drops tokens {missing}")
        position = {token: j for j, token in enumerate(vocabulary)}
        counts = np.zeros((len(self), len(vocabulary)), dtype=np.int64)
        for j, token in enumerate(self.vocabulary):
            counts[:, position[token]] = self.counts[:, j]
        return BowCorpus(tuple(vocabulary), self.label_values, counts, self.labels, self.party_ids_)

    def take(self, indices: Sequence[int]) -> "BowCorpus":
        indices = np.asarray(indices, dtype=np.int64)
        party = None if self.party_ids_ is None else self.party_ids_[indices]
        return BowCorpus(
            self.vocabulary, self.label_values, self.counts[indices], self.labels[indices], party
        )

    def with_party(self, party_id: int) -> "BowCorpus":
        return BowCorpus(
            self.vocabulary,
            self.label_values,
            self.counts,
            self.labels,
            np.full(len(self), party_id, dtype=np.int64),
        )

    @classmethod
    def concat(cls, corpora: Sequence["BowCorpus"]) -> "BowCorpus":
        """Concatenate documents; vocabularies are merged in first-seen order."""
        if not corpora:
            raise ValueError("nothing to concatenate")
        vocabulary = list(corpora[0].vocabulary)
        for corpus in corpora[1:]:
            if corpus.label_values != corpora[0].label_values:
                raise ValueError("corpora have different label values")
            vocabulary.extend(t for t in corpus.vocabulary if t not in vocabulary)
        aligned = [c.with_vocabulary(vocabulary) for c in corpora]
        if all(c.party_ids_ is not None for c in aligned):
            party = np.concatenate([c.party_ids_ for c in aligned])
        else:
            party = None
        return cls(
            tuple(vocabulary),
            corpora[0].label_values,
            np.vstack([c.counts for c in aligned]),
            np.concatenate([c.labels for c in aligned]),
            party,
        )

    def contains(self, tokens: Sequence[str]) -> np.ndarray:
        """Mask of documents containing every token at least once."""
        mask = np.ones(len(self), dtype=bool)
        for token in tokens:
            j = self.token_index(token)
            if j is None:
                return np.zeros(len(self), dtype=bool)
            mask &= self.counts[:, j] > 0
        return mask


def bow_encode(corpus: BowCorpus) -> Batch:
    """Counts scaled by each document's maximum count; labels one-hot.

    Example:
        counts (2, 0, 1) -> features (1, 0, 0.5)
    """
    if not corpus.vocabulary:
        raise ValueError("cannot encode a corpus with an empty vocabulary")
    if len(corpus) == 0:
        raise ValueError("cannot encode an empty corpus")
    counts = corpus.counts.astype(np.float64)
    peak = counts.max(axis=1, keepdims=True)
    features = np.divide(counts, peak, out=np.zeros_like(counts), where=peak > 0)
    return Batch(features, one_hot(corpus.labels, corpus.n_classes))


def merged_vocabulary(corpora: Sequence[BowCorpus]) -> tuple[str, ...]:
    vocabulary: list[str] = []
    for corpus in corpora:
        vocabulary.extend(t for t in corpus.vocabulary if t not in vocabulary)
    return tuple(vocabulary)


def align_corpora(corpora: Sequence[BowCorpus]) -> list[BowCorpus]:
    """Re-express every corpus over the merged vocabulary, columns in first-seen order."""
    vocabulary = merged_vocabulary(corpora)
    return [c.with_vocabulary(vocabulary) for c in corpora]
