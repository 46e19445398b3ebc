import copy

import numpy as np
import pytest

from pycontamination.dataset import (
    Attribute,
    AttributeSchema,
    Categorical,
    Dataset,
    Numeric,
    PartyData,
    Record,
)
from pycontamination.nn_core import MlpConfig
from pycontamination.synth import SynthSpec, synth_generate

TINY_EXPERIMENT = {
    "seed": 11,
    "repetitions": 2,
    "data": {
        "source": "synthetic",
        "synthetic": {
            "n_records": 700,
            "categorical_cardinalities": [3, 2],
            "n_numeric": 1,
            "n_classes": 2,
            "label_temperature": 0.5,
        },
    },
    "partition": {
        "n_parties": 3,
        "train_per_party": 80,
        "val_per_party": 20,
        "shared_val_size": 150,
    },
    "attack": {
        "contaminated_attributes": [{"attribute": "cat_0", "value": "v1"}],
        "contaminated_label": "c0",
        "fractions": [0.0, 0.1],
        "attacker_counts": [1],
    },
    "model": {"hidden_sizes": [8], "epochs": 2, "batch_size": 16},
}


@pytest.fixture
def tiny_schema():
    return AttributeSchema(
        (
            Attribute("color", Categorical(("red", "green", "blue"))),
            Attribute("size", Categorical(("small", "large"))),
            Attribute("weight", Numeric(0.0, 10.0)),
        ),
        ("A", "B"),
    )


@pytest.fixture
def tiny_dataset(tiny_schema):
    records = [
        Record((0, 0, 1.0), 0),
        Record((1, 1, 5.0), 1),
        Record((2, 0, 10.0), 0),
        Record((1, 0, 0.0), 1),
        Record((0, 1, 2.5), 1),
        Record((2, 1, 7.5), 0),
    ]
    return Dataset.from_records(tiny_schema, records)


@pytest.fixture(scope="session")
def synth_data():
    spec = SynthSpec(
        n_records=900,
        categorical_cardinalities=(3, 2),
        n_numeric=2,
        n_classes=3,
        label_temperature=0.5,
    )
    return synth_generate(spec, seed=3)


@pytest.fixture
def synth_parties(synth_data):
    """Four parties of 100 training and 25 validation records each."""
    parties = []
    for party_id in range(4):
        start = party_id * 125
        parties.append(
            PartyData(
                party_id,
                synth_data.take(np.arange(start, start + 100)),
                synth_data.take(np.arange(start + 100, start + 125)),
            )
        )
    return parties


@pytest.fixture
def small_model_cfg():
    return MlpConfig((1, 8, 2), learning_rate=0.05, momentum=0.5, epochs=3, batch_size=16, seed=5)


@pytest.fixture
def experiment_dict():
    return copy.deepcopy(TINY_EXPERIMENT)
