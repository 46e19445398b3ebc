import itertools

import numpy as np
import pytest

from pycontamination.dataset import PartyData, SchemaError, pool, to_batch
from pycontamination.defense import DefenseConfig, Variant
from pycontamination.nn_core import MlpModel, predict, train
from pycontamination.server import (
    ReleaseDecision,
    Released,
    TrainOutcome,
    release_policy,
    sized_config,
    train_local,
    train_model,
    train_pooled,
    validation_error,
)


class TestReleasePolicy:
    GRID = [0.0, 0.1, 0.25, 0.5, 0.999, 1.0]

    @pytest.mark.parametrize("err_local, err_multi", itertools.product(GRID, GRID))
    def test_rule(self, err_local, err_multi):
        expected = Released.LOCAL if err_local <= err_multi else Released.MULTI_PARTY
        assert release_policy(err_local, err_multi) is expected

    def test_tie_releases_local_model(self):
        assert release_policy(0.2, 0.2) is Released.LOCAL

    def test_decide(self):
        decision = ReleaseDecision.decide(3, err_multi=0.1, err_local=0.3)
        assert decision.released is Released.MULTI_PARTY
        assert decision.party_id == 3

    def test_contradicting_decision(self):
        with pytest.raises(ValueError, match="contradicts"):
            ReleaseDecision(0, Released.MULTI_PARTY, err_multi=0.3, err_local=0.3)

    def test_error_range(self):
        with pytest.raises(ValueError, match="err_multi"):
            ReleaseDecision.decide(0, err_multi=1.5, err_local=0.3)


@pytest.fixture
def outcome(synth_parties, small_model_cfg):
    return train_model(synth_parties, small_model_cfg)


class TestTrainModel:
    def test_one_local_model_and_decision_per_party(self, outcome, synth_parties):
        assert sorted(outcome.local_models) == [0, 1, 2, 3]
        assert [d.party_id for d in outcome.decisions] == [0, 1, 2, 3]
        assert len(outcome.released_codes) == 4
        assert set(outcome.released_codes) <= {"M", "L"}
        assert outcome.trace is None and outcome.discriminator is None

    def test_decisions_follow_validation_errors(self, outcome, synth_parties):
        for party, decision in zip(synth_parties, outcome.decisions):
            err_multi = validation_error(outcome.multi_party_model, party.val)
            err_local = validation_error(outcome.local_models[party.party_id], party.val)
            assert decision.err_multi == err_multi
            assert decision.err_local == err_local
            released = outcome.released_model(party.party_id)
            if err_local <= err_multi:
                assert released is outcome.local_models[party.party_id]
            else:
                assert released is outcome.multi_party_model

    def test_pooled_model_is_plain_training_on_pooled_data(self, outcome, synth_parties, small_model_cfg):
        batch = to_batch(pool(synth_parties))
        expected, _ = train(sized_config(small_model_cfg, batch), batch)
        assert outcome.multi_party_model.parameters_equal(expected)

    def test_deterministic(self, outcome, synth_parties, small_model_cfg):
        again = train_model(synth_parties, small_model_cfg)
        assert again.multi_party_model.parameters_equal(outcome.multi_party_model)
        assert again.released_codes == outcome.released_codes

    def test_party_order_does_not_matter(self, outcome, synth_parties, small_model_cfg):
        shuffled = train_model(list(reversed(synth_parties)), small_model_cfg)
        assert shuffled.multi_party_model.parameters_equal(outcome.multi_party_model)

    def test_local_model(self, synth_parties, small_model_cfg):
        model = train_local(synth_parties[1], small_model_cfg)
        assert model.config.layer_sizes == (7, 8, 3)

    def test_with_defense(self, synth_parties, small_model_cfg):
        defense = DefenseConfig(Variant.UNIFORM_KL, c_weight=1.0, seed=2)
        outcome = train_model(synth_parties, small_model_cfg, defense)
        assert outcome.discriminator is not None
        assert len(outcome.trace) == small_model_cfg.epochs
        assert outcome.discriminator.config.layer_sizes == (3, 8, 4)

    def test_needs_two_parties(self, synth_parties, small_model_cfg):
        with pytest.raises(ValueError, match="at least two parties"):
            train_model(synth_parties[:1], small_model_cfg)

    def test_schemas_must_match(self, synth_parties, tiny_dataset, small_model_cfg):
        odd = PartyData(9, tiny_dataset, tiny_dataset)
        with pytest.raises(SchemaError, match="party 9"):
            train_model([*synth_parties, odd], small_model_cfg)


class TestValidationError:
    def test_empty(self, synth_data, small_model_cfg):
        model = MlpModel.initialize(small_model_cfg.resized(7, 3))
        with pytest.raises(ValueError, match="empty"):
            validation_error(model, synth_data.take([]))

    def test_complement_of_accuracy(self, synth_data, small_model_cfg):
        model = MlpModel.initialize(small_model_cfg.resized(7, 3))
        predictions = predict(model, to_batch(synth_data).features)
        expected = np.mean(predictions != synth_data.labels)
        assert validation_error(model, synth_data) == pytest.approx(expected, abs=1e-12)


def test_outcome_requires_decision_per_party(small_model_cfg):
    model = MlpModel.zeros(small_model_cfg)
    with pytest.raises(ValueError, match="one release decision"):
        TrainOutcome(model, {0: model}, [])


def test_train_pooled_without_defense(synth_parties, small_model_cfg):
    f, g, trace = train_pooled(synth_parties, small_model_cfg)
    assert g is None and trace is None
    assert f.config.layer_sizes == (7, 8, 3)
