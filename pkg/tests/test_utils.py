import numpy as np
import pytest

from pycontamination.utils import (
    canonical_yaml,
    config_hash,
    derive_seed,
    format_number,
    set_nested,
    sub_seed,
)


def test_derive_seed_is_a_pure_function():
    assert derive_seed(7, 0, 0) == derive_seed(7, 0, 0)
    seeds = {derive_seed(7, s, r) for s in range(5) for r in range(5)}
    assert len(seeds) == 25
    assert derive_seed(8, 0, 0) != derive_seed(7, 0, 0)
    assert 0 <= derive_seed(7, 3, 1) < 2**64


def test_sub_seed():
    assert sub_seed(123, 0) == sub_seed(123, 0)
    assert len({sub_seed(123, stage) for stage in range(6)}) == 6


def test_config_hash_ignores_key_order():
    a = {"seed": 1, "model": {"epochs": 2, "batch_size": 3}}
    b = {"model": {"batch_size": 3, "epochs": 2}, "seed": 1}
    assert canonical_yaml(a) == canonical_yaml(b)
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash({**a, "seed": 2})


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        (True, "True"),
        (np.bool_(False), "False"),
        (3, "3"),
        (np.int64(-4), "-4"),
        (0.123456789, "0.123457"),
        (np.float64(2.0), "2"),
        (1e-7, "1e-07"),
        (float("nan"), "nan"),
        ("MML", "MML"),
    ],
)
def test_format_number(value, expected):
    assert format_number(value) == expected


def test_set_nested():
    config = {"model": {"epochs": 3}, "defense": None}
    set_nested(config, "model.epochs", 5)
    set_nested(config, "defense.c_weight", 2.0)
    set_nested(config, "seed", 9)
    assert config == {"model": {"epochs": 5}, "defense": {"c_weight": 2.0}, "seed": 9}
