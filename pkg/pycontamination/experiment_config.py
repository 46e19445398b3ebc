"""
Load and validate experiment configs
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from typing import Any, Sequence

import yaml

from pycontamination.defense import FEEDS, DefenseConfig, Variant
from pycontamination.nn_core import MlpConfig
from pycontamination.utils import set_nested

DATA_SOURCES = ("synthetic", "csv", "adult", "corpus")

DEFAULTS: dict[str, Any] = {
    "repetitions": 10,
    "output_dir": "results",
    "partition": {
        "n_parties": 10,
        "train_per_party": 500,
        "val_per_party": 100,
        "shared_val_size": 2000,
        "by_attribute": None,
        "party_val_fraction": 0.1,
        "shared_val_fraction": 0.2,
    },
    "attack": {
        "contaminated_attributes": [],
        "contaminated_tokens": [],
        "fractions": [0.0],
        "attacker_counts": [1],
    },
    "model": {
        "hidden_sizes": [64, 32],
        "learning_rate": 0.01,
        "momentum": 0.5,
        "epochs": 20,
        "batch_size": 32,
    },
    "defense": None,
    "evaluate": {
        "membership_inference": False,
        "holdout_fraction": 0.0,
        "pivot_bins": None,
        "pivot_diagnostic": False,
        "chi_square": False,
        "loo": False,
        "local_baseline": True,
    },
}


class ConfigError(ValueError):
    """The experiment config is missing fields or holds invalid values."""


@dataclass(frozen=True)
class Scenario:
    """One sweep point: a contamination fraction and a number of attacker parties."""

    index: int
    fraction: float
    n_attackers: int

    @property
    def attacker_parties(self) -> frozenset[int]:
        return frozenset(range(self.n_attackers))


def _merge(defaults: dict, config: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in config.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(override: str) -> tuple[str, Any]:
    """Split ``key.path=value``; the value is read as a YAML scalar or list."""
    if "=" not in override:
        raise ConfigError(f"override '{override}' must look like key=value")
    key, raw = override.split("=", 1)
    if not key.strip():
        raise ConfigError(f"override '{override}' has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{override}' has a malformed value: {e}") from e
    return key.strip(), value


class ExperimentConfig:
    def __init__(
        self,
        config_path: str | None = None,
        overrides: Sequence[str] = (),
        config: dict | None = None,
    ) -> None:
        """Load a config file (or take a mapping), apply overrides, fill defaults

        Args:
            config_path (str): path to the experiment YAML
            overrides: "key.path=value" strings applied before validation
            config (dict): used instead of a file when given
        """
        self.config_path = config_path
        raw = self.load_config(config_path) if config is None else copy.deepcopy(config)
        for override in overrides:
            key, value = parse_override(override)
            set_nested(raw, key, value)
        self._raw = raw
        self._config = _merge(DEFAULTS, raw)

    def load_config(self, config_path: str) -> dict:
        """
        Load a YAML configuration file.

        Args:
            config_path (str): Path to the YAML configuration file.

        Returns:
            dict: Loaded configuration as a dictionary.
        """
        if config_path is None or not os.path.exists(config_path):
            raise ConfigError(f"Configuration file '{config_path}' does not exist.")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Error loading configuration file '{config_path}': {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"Configuration file '{config_path}' must hold a mapping")
        return config

    def missing_fields(self) -> list[str]:
        required_fields = ["seed", "data", "attack"]
        missing = [field for field in required_fields if field not in self._raw]
        if "attack" in self._raw and "contaminated_label" not in self._raw["attack"]:
            missing.append("attack.contaminated_label")
        if "data" in self._raw and "source" not in self._raw["data"]:
            missing.append("data.source")
        return missing

    def problems(self) -> list[str]:
        """Every missing field and invalid value, as readable messages."""
        problems = [f"missing field '{field}'" for field in self.missing_fields()]
        if problems:
            return problems
        cfg = self._config
        if not isinstance(cfg["repetitions"], int) or cfg["repetitions"] < 1:
            problems.append("repetitions must be an integer >= 1")
        data = cfg["data"]
        if data["source"] not in DATA_SOURCES:
            problems.append(f"data.source must be one of {DATA_SOURCES}")
        elif data["source"] == "synthetic":
            if not isinstance(data.get("synthetic") or {}, dict):
                problems.append("data.synthetic must be a mapping")
        elif not data.get("path"):
            problems.append(f"data.path is required for source '{data['source']}'")
        if data.get("source") == "csv" and not data.get("schema"):
            problems.append("data.schema is required for source 'csv'")
        attack = cfg["attack"]
        if not attack["fractions"]:
            problems.append("attack.fractions must not be empty")
        if any(not 0 <= f <= 1 for f in attack["fractions"]):
            problems.append("attack.fractions must lie in [0, 1]")
        if not attack["attacker_counts"]:
            problems.append("attack.attacker_counts must not be empty")
        if any(int(k) < 1 for k in attack["attacker_counts"]):
            problems.append("attack.attacker_counts must be positive")
        if data.get("source") == "corpus":
            if not attack["contaminated_tokens"]:
                problems.append("attack.contaminated_tokens is required for a corpus")
        elif not attack["contaminated_attributes"]:
            problems.append("attack.contaminated_attributes is required for tabular data")
        for entry in attack["contaminated_attributes"]:
            if not isinstance(entry, dict) or set(entry) != {"attribute", "value"}:
                problems.append(f"contaminated attribute {entry!r} needs 'attribute' and 'value'")
        partition = cfg["partition"]
        if partition["by_attribute"] is None:
            for key in ("n_parties", "train_per_party"):
                if int(partition[key]) < 1:
                    problems.append(f"partition.{key} must be positive")
            if int(partition["n_parties"]) < 2:
                problems.append("partition.n_parties must be at least 2")
            if int(partition["val_per_party"]) < 1:
                problems.append("partition.val_per_party must be at least 1")
            if any(int(k) > int(partition["n_parties"]) for k in attack["attacker_counts"]):
                problems.append("attack.attacker_counts cannot exceed partition.n_parties")
        try:
            self.model_config()
        except (TypeError, ValueError) as e:
            problems.append(f"model: {e}")
        defense = cfg["defense"]
        if defense is not None:
            if not isinstance(defense, dict):
                problems.append("defense must be a mapping or null")
            else:
                if defense.get("variant", Variant.ONE_HOT_PARTY.value) not in [v.value for v in Variant]:
                    problems.append(f"defense.variant must be one of {[v.value for v in Variant]}")
                if not float(defense.get("c_weight", 3.0)) > 0:
                    problems.append("defense.c_weight must be positive")
                if defense.get("feed", FEEDS[0]) not in FEEDS:
                    problems.append(f"defense.feed must be one of {FEEDS}")
                if int(defense.get("g_steps_per_f_step", 1)) < 1:
                    problems.append("defense.g_steps_per_f_step must be at least 1")
                g_lr = defense.get("g_learning_rate")
                if g_lr is not None and not float(g_lr) > 0:
                    problems.append("defense.g_learning_rate must be positive or null")
        bins = cfg["evaluate"]["pivot_bins"]
        if bins is not None and int(bins) < 1:
            problems.append("evaluate.pivot_bins must be positive or null")
        if not 0 <= float(cfg["evaluate"]["holdout_fraction"]) < 1:
            problems.append("evaluate.holdout_fraction must be in [0, 1)")
        return problems

    def is_config_valid(self) -> bool:
        """Return True if config has all the required fields and valid values"""
        try:
            return self.problems() == []
        except (TypeError, ValueError, KeyError):
            return False

    def validate(self) -> None:
        try:
            problems = self.problems()
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"{self.config_path or 'config'}: malformed value ({e})") from e
        if problems:
            source = self.config_path or "config"
            raise ConfigError(f"{source}: " + "; ".join(problems))

    @property
    def config(self) -> dict:
        """Effective config: file contents, overrides and defaults"""
        return self._config

    @property
    def seed(self) -> int:
        return int(self._config["seed"])

    @property
    def repetitions(self) -> int:
        return int(self._config["repetitions"])

    @property
    def output_dir(self) -> str:
        return self._config["output_dir"]

    @property
    def data(self) -> dict:
        return self._config["data"]

    @property
    def partition(self) -> dict:
        return self._config["partition"]

    @property
    def attack(self) -> dict:
        return self._config["attack"]

    @property
    def evaluate(self) -> dict:
        return self._config["evaluate"]

    @property
    def compare_undefended(self) -> bool:
        defense = self._config["defense"]
        return bool(defense and defense.get("compare_undefended", False))

    def scenarios(self) -> list[Scenario]:
        """Sweep grid: fractions outer, attacker counts inner."""
        grid = []
        for fraction in self.attack["fractions"]:
            for n_attackers in self.attack["attacker_counts"]:
                grid.append(Scenario(len(grid), float(fraction), int(n_attackers)))
        return grid

    def model_config(self, seed: int = 0) -> MlpConfig:
        """Classifier settings; input and output sizes are fitted to the data later."""
        model = self._config["model"]
        return MlpConfig(
            layer_sizes=(1, *[int(s) for s in model["hidden_sizes"]], 2),
            learning_rate=float(model["learning_rate"]),
            momentum=float(model["momentum"]),
            epochs=int(model["epochs"]),
            batch_size=int(model["batch_size"]),
            seed=seed,
        )

    def defense_config(self, seed: int = 0) -> DefenseConfig | None:
        defense = self._config["defense"]
        if defense is None:
            return None
        hidden = defense.get("g_hidden_sizes")
        g_lr = defense.get("g_learning_rate")
        return DefenseConfig(
            variant=Variant(defense.get("variant", Variant.ONE_HOT_PARTY.value)),
            c_weight=float(defense.get("c_weight", 3.0)),
            g_hidden_sizes=None if hidden is None else tuple(int(s) for s in hidden),
            g_steps_per_f_step=int(defense.get("g_steps_per_f_step", 1)),
            seed=seed,
            feed=defense.get("feed", FEEDS[0]),
            g_learning_rate=None if g_lr is None else float(g_lr),
        )
