"""
Central server: trains the pooled and local models and decides which model
each party receives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from pycontamination.dataset import PartyData, SchemaError, pool, to_batch
from pycontamination.defense import AdvTrainTrace, DefenseConfig, adversarial_train
from pycontamination.nn_core import Batch, MlpConfig, MlpModel, accuracy, train
from pycontamination.text import BowCorpus

logger = logging.getLogger(__name__)


class Released(str, Enum):
    MULTI_PARTY = "multi_party"
    LOCAL = "local"


def release_policy(err_local: float, err_multi: float) -> Released:
    """Local model wins ties: released only if it is no worse on the party's validation set."""
    return Released.LOCAL if err_local <= err_multi else Released.MULTI_PARTY


@dataclass(frozen=True)
class ReleaseDecision:
    party_id: int
    released: Released
    err_multi: float
    err_local: float

    def __post_init__(self) -> None:
        for name in ("err_multi", "err_local"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.released != release_policy(self.err_local, self.err_multi):
            raise ValueError(
                f"party {self.party_id}: decision {self.released.value} contradicts "
                f"err_local={self.err_local}, err_multi={self.err_multi}"
            )

    @classmethod
    def decide(cls, party_id: int, err_multi: float, err_local: float) -> "ReleaseDecision":
        return cls(party_id, release_policy(err_local, err_multi), err_multi, err_local)


@dataclass(frozen=True)
class TrainOutcome:
    multi_party_model: MlpModel
    local_models: dict[int, MlpModel]
    decisions: list[ReleaseDecision]
    discriminator: MlpModel | None = None
    trace: AdvTrainTrace | None = field(default=None)

    def __post_init__(self) -> None:
        if len(self.decisions) != len(self.local_models):
            raise ValueError("one release decision per party is required")

    def released_model(self, party_id: int) -> MlpModel:
        decision = next(d for d in self.decisions if d.party_id == party_id)
        if decision.released is Released.LOCAL:
            return self.local_models[party_id]
        return self.multi_party_model

    @property
    def released_codes(self) -> str:
        """One letter per party in party order: M for the pooled model, L for local."""
        return "".join(
            "M" if d.released is Released.MULTI_PARTY else "L"
            for d in sorted(self.decisions, key=lambda d: d.party_id)
        )


def validation_error(model: MlpModel, dataset: Any) -> float:
    """Fraction of records whose argmax prediction differs from the label."""
    if len(dataset) == 0:
        raise ValueError("validation error of an empty dataset is undefined")
    return 1.0 - accuracy(model, to_batch(dataset))


def sized_config(model_cfg: MlpConfig, batch: Batch) -> MlpConfig:
    """Fit the input and output layer sizes to the encoded data."""
    return model_cfg.resized(batch.features.shape[1], batch.targets.shape[1])


def check_compatible(parties: Sequence[PartyData]) -> None:
    first = parties[0].train
    for party in parties[1:]:
        other = party.train
        if isinstance(first, BowCorpus):
            same = (
                isinstance(other, BowCorpus)
                and other.vocabulary == first.vocabulary
                and other.label_values == first.label_values
            )
        else:
            same = getattr(other, "schema", None) == first.schema
        if not same:
            raise SchemaError(
                f"party {party.party_id} does not share party {parties[0].party_id}'s schema"
            )


def train_pooled(
    parties: Sequence[PartyData],
    model_cfg: MlpConfig,
    defense: DefenseConfig | None = None,
) -> tuple[MlpModel, MlpModel | None, AdvTrainTrace | None]:
    """Train f_* on every party's training records, pooled in party-id order."""
    pooled = pool(parties)
    if defense is None:
        batch = to_batch(pooled)
        model, _ = train(sized_config(model_cfg, batch), batch)
        return model, None, None
    f, g, trace = adversarial_train(pooled, model_cfg, defense)
    return f, g, trace


def train_local(party: PartyData, model_cfg: MlpConfig) -> MlpModel:
    batch = to_batch(party.train)
    model, _ = train(sized_config(model_cfg, batch), batch)
    return model


def train_model(
    parties: Sequence[PartyData],
    model_cfg: MlpConfig,
    defense: DefenseConfig | None = None,
) -> TrainOutcome:
    """Train the multi-party model and every local model, then apply the release policy."""
    if len(parties) < 2:
        raise ValueError(f"multi-party training needs at least two parties, got {len(parties)}")
    check_compatible(parties)
    multi, g, trace = train_pooled(parties, model_cfg, defense)
    local_models: dict[int, MlpModel] = {}
    decisions = []
    for party in parties:
        local = train_local(party, model_cfg)
        local_models[party.party_id] = local
        decision = ReleaseDecision.decide(
            party.party_id,
            err_multi=validation_error(multi, party.val),
            err_local=validation_error(local, party.val),
        )
        logger.debug(
            f"party {party.party_id}: err_multi={decision.err_multi:.4f} "
            f"err_local={decision.err_local:.4f} -> {decision.released.value}"
        )
        decisions.append(decision)
    return TrainOutcome(multi, local_models, decisions, g, trace)
