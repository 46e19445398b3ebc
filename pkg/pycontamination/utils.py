import hashlib
import math
from typing import Any

import numpy as np
import yaml


def derive_seed(master_seed: int, scenario: int, repetition: int) -> int:
    """
    Child seed for one (scenario, repetition) pair.

    The three integers are mixed by numpy's SeedSequence hash, so every pair
    gets an independent 64-bit stream that depends on nothing else.

    Args:
        master_seed: seed from the experiment config
        scenario: index of the sweep point
        repetition: index of the repetition

    Returns:
        int in [0, 2**64)

    Example:
        derive_seed(7, 0, 0) == derive_seed(7, 0, 0)
        derive_seed(7, 0, 0) != derive_seed(7, 0, 1)
    """
    sequence = np.random.SeedSequence([int(master_seed), int(scenario), int(repetition)])
    return int(sequence.generate_state(1, np.uint64)[0])


def sub_seed(seed: int, purpose: int) -> int:
    """Independent seed for one stage (partition, attack, model...) of a run."""
    return int(np.random.SeedSequence([int(seed), int(purpose)]).generate_state(1, np.uint32)[0])


def canonical_yaml(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical YAML dump of a config mapping"""
    return hashlib.sha256(canonical_yaml(config).encode("utf-8")).hexdigest()


def format_number(value: Any) -> str:
    """
    Print numbers with 6 significant digits.

    Args:
        value: e.g. 0.123456789, 3, None, float("nan")

    Returns:
        e.g. "0.123457", "3", "", "nan"
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return "%.6g" % value
    return str(value)


def set_nested(config: dict, dotted_key: str, value: Any) -> None:
    """
    Set config["a"]["b"] for dotted_key "a.b", creating mappings on the way.

    Example:
        set_nested(cfg, "model.epochs", 5)
    """
    keys = dotted_key.split(".")
    node = config
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value
