"""
Scenario sweeps: for every (contamination fraction, attacker count) point and
every repetition, partition the data, contaminate the attacker parties,
train through the server, evaluate, and collect one result row.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any

from tqdm import tqdm

from pycontamination import results
from pycontamination.attack import AttackSpec, distribute_contamination
from pycontamination.datafiles import load_adult, load_corpus, load_csv, load_schema
from pycontamination.dataset import PartyData, partition, partition_by_attribute, pool
from pycontamination.detectors import chi_square_independence, flag_lowest_party, loo_cross_validation
from pycontamination.entropy import pivot_diagnostic
from pycontamination.experiment_config import ExperimentConfig, Scenario
from pycontamination.metrics import evaluate
from pycontamination.server import train_model, train_pooled
from pycontamination.synth import SynthSpec, synth_generate
from pycontamination.text import BowCorpus, align_corpora
from pycontamination.utils import derive_seed, sub_seed

logger = logging.getLogger(__name__)

# stage numbers passed to sub_seed
DATA_STAGE, PARTITION_STAGE, ATTACK_STAGE, MODEL_STAGE, DEFENSE_STAGE, ATTACKER_STAGE = range(6)


@dataclass(frozen=True)
class RunOutput:
    """One finished scenario-repetition."""

    scenario: int
    repetition: int
    seed: int
    row: dict[str, Any]
    seconds: float


def load_data(cfg: ExperimentConfig) -> Any:
    """The run's full dataset; synthetic data is drawn once from the master seed."""
    data = cfg.data
    source = data["source"]
    if source == "synthetic":
        spec = SynthSpec(**(data.get("synthetic") or {}))
        return synth_generate(spec, sub_seed(cfg.seed, DATA_STAGE))
    if source == "csv":
        return load_csv(data["path"], load_schema(data["schema"]), data.get("missing", "error"))
    if source == "adult":
        schema = load_schema(data["schema"]) if data.get("schema") else None
        return load_adult(data["path"], schema, data.get("missing", "drop"))
    return load_corpus(data["path"])


def label_values(data: Any) -> tuple[str, ...]:
    return data.label_values if isinstance(data, BowCorpus) else data.schema.label_values


def split_parties(cfg: ExperimentConfig, data: Any, seed: int) -> tuple[list[PartyData], Any]:
    p = cfg.partition
    if p["by_attribute"] is not None:
        return partition_by_attribute(
            data,
            p["by_attribute"],
            seed,
            party_val_fraction=float(p["party_val_fraction"]),
            shared_val_fraction=float(p["shared_val_fraction"]),
        )
    return partition(
        data,
        int(p["n_parties"]),
        int(p["train_per_party"]),
        int(p["shared_val_size"]),
        seed,
        party_val_size=int(p["val_per_party"]),
    )


def build_attack(cfg: ExperimentConfig, data: Any, scenario: Scenario, budget: int) -> AttackSpec:
    """Resolve attribute, value and label names from the config against the data."""
    attack = cfg.attack
    label = attack["contaminated_label"]
    labels = label_values(data)
    if isinstance(label, str):
        if label not in labels:
            raise ValueError(f"contaminated label '{label}' not in {list(labels)}")
        label = labels.index(label)
    if isinstance(data, BowCorpus):
        return AttackSpec(
            int(label),
            budget,
            scenario.attacker_parties,
            contaminated_tokens=tuple(attack["contaminated_tokens"]),
        )
    pairs = []
    for entry in attack["contaminated_attributes"]:
        attribute = entry["attribute"]
        index = attribute if isinstance(attribute, int) else data.schema.index_of(attribute)
        pairs.append((index, data.schema.value_code(index, entry["value"])))
    return AttackSpec(int(label), budget, scenario.attacker_parties, tuple(pairs))


def align_text(parties: list[PartyData], shared_val: Any) -> tuple[list[PartyData], Any]:
    """Put every corpus on one vocabulary after tokens were inserted."""
    corpora = [c for p in parties for c in (p.train, p.val)] + [shared_val]
    aligned = align_corpora(corpora)
    out = [
        PartyData(p.party_id, aligned[2 * i], aligned[2 * i + 1]) for i, p in enumerate(parties)
    ]
    return out, aligned[-1]


def _note(notes: list[str], e: Exception) -> None:
    notes.append(f"{type(e).__name__}: {e}")


def run_scenario(
    cfg: ExperimentConfig, data: Any, scenario: Scenario, repetition: int
) -> RunOutput:
    """One result row; any error ends the row early and lands in its notes."""
    started = time.perf_counter()
    seed = derive_seed(cfg.seed, scenario.index, repetition)
    row: dict[str, Any] = {
        "scenario": scenario.index,
        "repetition": repetition,
        "fraction": scenario.fraction,
        "n_attackers": scenario.n_attackers,
    }
    notes: list[str] = []
    try:
        _fill_row(cfg, data, scenario, seed, row, notes)
    except Exception as e:
        _note(notes, e)
        logger.error(f"scenario {scenario.index} repetition {repetition} failed: {e}")
    row["notes"] = "; ".join(notes)
    return RunOutput(scenario.index, repetition, seed, row, time.perf_counter() - started)


def _fill_row(
    cfg: ExperimentConfig,
    data: Any,
    scenario: Scenario,
    seed: int,
    row: dict[str, Any],
    notes: list[str],
) -> None:
    parties, shared_val = split_parties(cfg, data, sub_seed(seed, PARTITION_STAGE))
    if scenario.n_attackers > len(parties):
        raise ValueError(f"{scenario.n_attackers} attackers but only {len(parties)} parties")
    budget = int(round(scenario.fraction * sum(len(p.train) for p in parties)))
    spec = build_attack(cfg, data, scenario, budget)
    row["n_parties"] = len(parties)
    row["budget"] = budget
    parties = distribute_contamination(parties, spec, sub_seed(seed, ATTACK_STAGE))
    if isinstance(data, BowCorpus):
        parties, shared_val = align_text(parties, shared_val)

    model_cfg = cfg.model_config(sub_seed(seed, MODEL_STAGE))
    defense = cfg.defense_config(sub_seed(seed, DEFENSE_STAGE))
    outcome = train_model(parties, model_cfg, defense)
    row["released"] = outcome.released_codes
    labels = label_values(data)
    pooled = pool(parties) if cfg.evaluate["membership_inference"] else None
    attacker_seed = sub_seed(seed, ATTACKER_STAGE)
    holdout = float(cfg.evaluate["holdout_fraction"])
    feed = defense.feed if defense is not None else "log_probabilities"

    report = evaluate(
        outcome.multi_party_model, shared_val, spec, pooled, None, holdout, attacker_seed, feed
    )
    row.update(report.to_dict(labels, "multi_party_"))
    notes.extend(f"multi_party: {n}" for n in report.notes)
    if outcome.trace is not None:
        row["discriminator_accuracy"] = outcome.trace.g_accuracy[-1]

    if cfg.evaluate["local_baseline"]:
        victims = [p.party_id for p in parties if p.party_id not in spec.attacker_parties]
        if victims:
            local = outcome.local_models[victims[0]]
            report = evaluate(local, shared_val, spec)
            row["local_party"] = victims[0]
            row.update(report.to_dict(labels, "local_"))
            notes.extend(f"local: {n}" for n in report.notes)
        else:
            notes.append("local: every party is an attacker, no victim baseline")

    undefended = None
    if defense is not None and cfg.compare_undefended:
        undefended, _, _ = train_pooled(parties, model_cfg, None)
        report = evaluate(undefended, shared_val, spec, pooled, None, holdout, attacker_seed, feed)
        row.update(report.to_dict(labels, "undefended_"))
        notes.extend(f"undefended: {n}" for n in report.notes)

    if cfg.evaluate["pivot_diagnostic"]:
        pooled = pooled if pooled is not None else pool(parties)
        bins = cfg.evaluate["pivot_bins"]
        bins = None if bins is None else int(bins)
        h_q, h_q_f = pivot_diagnostic(outcome.multi_party_model, pooled, bins)
        row["party_entropy"] = h_q
        row["multi_party_party_entropy_given_output"] = h_q_f
        if undefended is not None:
            row["undefended_party_entropy_given_output"] = pivot_diagnostic(undefended, pooled, bins)[1]

    if cfg.evaluate["chi_square"]:
        attacker = min(spec.attacker_parties)
        victims = [p for p in parties if p.party_id not in spec.attacker_parties]
        attribute = (
            spec.contaminated_tokens[0]
            if isinstance(data, BowCorpus)
            else spec.contaminated_attributes[0][0]
        )
        if victims:
            try:
                _, row["chi_square_p"] = chi_square_independence(
                    next(p.train for p in parties if p.party_id == attacker),
                    victims[0].train,
                    attribute,
                )
            except ValueError as e:
                _note(notes, e)

    if cfg.evaluate["loo"]:
        table = loo_cross_validation(parties, model_cfg)
        verdict = flag_lowest_party(table)
        attackers = table.index.isin(list(spec.attacker_parties))
        row["loo_flagged_party"] = verdict.party_id
        row["loo_gap"] = verdict.gap_to_median
        row["loo_attacker_accuracy"] = float(table.loc[attackers, "heldout_accuracy"].mean())
        if (~attackers).any():
            row["loo_victim_accuracy"] = float(table.loc[~attackers, "heldout_accuracy"].mean())


def run_all(cfg: ExperimentConfig, jobs: int = 1, data: Any = None) -> list[RunOutput]:
    """Every scenario-repetition, sorted by (scenario, repetition) whatever ``jobs`` is."""
    cfg.validate()
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    if data is None:
        data = load_data(cfg)
    tasks = [(s, r) for s in cfg.scenarios() for r in range(cfg.repetitions)]
    logger.info(f"running {len(tasks)} scenario-repetitions with {jobs} job(s)")
    outputs = []
    if jobs == 1:
        for scenario, repetition in tqdm(tasks, desc="scenarios"):
            outputs.append(run_scenario(cfg, data, scenario, repetition))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(run_scenario, cfg, data, s, r) for s, r in tasks]
            for future in tqdm(as_completed(futures), total=len(futures), desc="scenarios"):
                outputs.append(future.result())
    outputs.sort(key=lambda o: (o.scenario, o.repetition))
    return outputs


def run(
    cfg: ExperimentConfig, out_dir: str | None = None, jobs: int = 1, fmt: str = "csv"
) -> dict[str, str]:
    """Run the sweep and write every result file; returns their paths by name."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    outputs = run_all(cfg, jobs)
    paths = results.emit([o.row for o in outputs], out_dir, fmt)
    paths["timings"] = results.write_timings(outputs, out_dir)
    paths["manifest"] = results.write_manifest(cfg, outputs, out_dir)
    failed = sum("multi_party_validation_accuracy" not in o.row for o in outputs)
    logger.info(f"wrote {len(outputs)} rows to {out_dir} ({failed} failed)")
    return paths
