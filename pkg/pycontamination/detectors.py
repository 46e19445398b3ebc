"""
Detectors a server could run on party data before training: a chi-square
test of party-attribute independence and leave-one-party-out cross
validation.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

import numpy as np
import pandas as pd

from pycontamination.dataset import Categorical, PartyData, pool, to_batch
from pycontamination.nn_core import MlpConfig, accuracy, train
from pycontamination.special import chi2_sf
from pycontamination.text import BowCorpus

logger = logging.getLogger(__name__)

# attribute values seen fewer times than this across both parties share one column
POOL_BELOW = 5


class SparseTableError(ValueError):
    """The contingency table has an empty row or column after pooling."""


class ChiSquareResult(NamedTuple):
    statistic: float
    p_value: float


def value_counts(data: Any, attribute: int | str) -> np.ndarray:
    """Counts per attribute value; for a corpus, (without token, with token)."""
    if isinstance(data, BowCorpus):
        present = int(data.contains([attribute]).sum()) if len(data) else 0
        return np.array([len(data) - present, present])
    index = attribute if isinstance(attribute, int) else data.schema.index_of(attribute)
    kind = data.schema.attributes[index].kind
    if not isinstance(kind, Categorical):
        raise ValueError(f"chi-square test needs a categorical attribute, got '{data.schema.names[index]}'")
    return np.bincount(data.column(index), minlength=kind.width)


def pool_sparse_columns(table: np.ndarray, pool_below: int = POOL_BELOW) -> np.ndarray:
    """Merge columns whose total is below ``pool_below`` into one trailing column."""
    totals = table.sum(axis=0)
    rare = totals < pool_below
    if not rare.any():
        return table
    merged = table[:, rare].sum(axis=1, keepdims=True)
    kept = table[:, ~rare]
    if merged.sum() > 0:
        kept = np.hstack([kept, merged])
    return kept


def chi_square_table(table: np.ndarray, pool_below: int = POOL_BELOW) -> tuple[float, float, int]:
    """Statistic, p-value and degrees of freedom of a 2-D contingency table."""
    table = pool_sparse_columns(np.asarray(table, dtype=np.float64), pool_below)
    if table.shape[1] < 2:
        raise SparseTableError(
            f"only {table.shape[1]} attribute value column(s) left after pooling; "
            "merge categories or test a different attribute"
        )
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if (rows == 0).any() or (cols == 0).any():
        raise SparseTableError("a party or attribute value has no records; merge categories")
    expected = np.outer(rows, cols) / table.sum()
    statistic = float(((table - expected) ** 2 / expected).sum())
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    return statistic, chi2_sf(statistic, df), df


def chi_square_independence(
    party_a: Any, party_b: Any, attribute: int | str, pool_below: int = POOL_BELOW
) -> ChiSquareResult:
    """Test whether the attribute's value distribution differs between two parties.

    Example:
        table [[20, 30], [30, 20]] -> statistic 4.0, p = 0.0455
    """
    table = np.vstack([value_counts(party_a, attribute), value_counts(party_b, attribute)])
    statistic, p_value, _ = chi_square_table(table, pool_below)
    return ChiSquareResult(statistic, p_value)


def pairwise_chi_square(
    parties: Sequence[PartyData],
    attribute: int | str,
    attackers: frozenset[int] = frozenset(),
    pool_below: int = POOL_BELOW,
) -> pd.DataFrame:
    """Independence test over every pair of party training sets."""
    rows = []
    ordered = sorted(parties, key=lambda p: p.party_id)
    for a, b in itertools.combinations(ordered, 2):
        row = {
            "party_a": a.party_id,
            "party_b": b.party_id,
            "attacker_a": a.party_id in attackers,
            "attacker_b": b.party_id in attackers,
            "statistic": np.nan,
            "p_value": np.nan,
            "notes": "",
        }
        try:
            row["statistic"], row["p_value"] = chi_square_independence(
                a.train, b.train, attribute, pool_below
            )
        except SparseTableError as e:
            row["notes"] = str(e)
        rows.append(row)
    table = pd.DataFrame(rows)
    logger.debug(f"pairwise chi-square on {attribute}:\n{table}")
    return table


def loo_cross_validation(parties: Sequence[PartyData], model_cfg: MlpConfig) -> pd.DataFrame:
    """Train on all parties but one, score on the left-out party's training set."""
    if len(parties) < 3:
        raise ValueError(f"leave-one-party-out needs at least three parties, got {len(parties)}")
    rows = []
    for held_out in sorted(parties, key=lambda p: p.party_id):
        rest = [p for p in parties if p.party_id != held_out.party_id]
        batch = to_batch(pool(rest))
        model, _ = train(model_cfg.resized(batch.features.shape[1], batch.targets.shape[1]), batch)
        rows.append(
            {
                "party_id": held_out.party_id,
                "n_records": len(held_out.train),
                "heldout_accuracy": accuracy(model, to_batch(held_out.train)),
            }
        )
    return pd.DataFrame(rows).set_index("party_id")


@dataclass(frozen=True)
class LooVerdict:
    party_id: int
    heldout_accuracy: float
    gap_to_median: float


def flag_lowest_party(table: pd.DataFrame) -> LooVerdict:
    """The party the leave-one-out detector suspects: lowest held-out accuracy."""
    accuracies = table["heldout_accuracy"]
    party_id = int(accuracies.idxmin())
    lowest = float(accuracies.loc[party_id])
    return LooVerdict(party_id, lowest, float(accuracies.median()) - lowest)
