import numpy as np
import pytest

from pycontamination import defense as defense_module
from pycontamination.dataset import PartyData, pool, to_batch
from pycontamination.defense import (
    AdvTrainTrace,
    DefenseConfig,
    Variant,
    adversarial_train,
    check_composite_gradient,
    composite_loss_and_gradients,
    f_outputs,
    discriminator_forward,
    f_step,
    party_index,
)
from pycontamination.nn_core import Batch, MlpConfig, MlpModel, forward, loss_and_gradients, one_hot, train
from pycontamination.server import sized_config


def random_problem(seed, n_rows=6, n_inputs=5, n_classes=3, n_parties=4):
    rng = np.random.default_rng(seed)
    f = MlpModel.initialize(MlpConfig((n_inputs, 6, n_classes), seed=seed))
    g = MlpModel.initialize(MlpConfig((n_classes, 5, n_parties), seed=seed + 1))
    x = rng.standard_normal((n_rows, n_inputs))
    y = one_hot(rng.integers(n_classes, size=n_rows), n_classes)
    q = one_hot(rng.integers(n_parties, size=n_rows), n_parties)
    return f, g, x, y, q


class TestCompositeGradient:
    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("feed", ["log_probabilities", "probabilities"])
    def test_matches_finite_differences(self, variant, feed):
        f, g, x, y, q = random_problem(7)
        defense = DefenseConfig(variant, c_weight=3.0, feed=feed)
        assert check_composite_gradient(f, g, x, y, q, defense) < 1e-4

    def test_objective_signs(self):
        f, g, x, y, q = random_problem(3)
        one_hot_loss, _ = composite_loss_and_gradients(
            f, g, x, y, q, DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=2.0)
        )
        assert one_hot_loss.objective == pytest.approx(
            one_hot_loss.class_loss - 2.0 * one_hot_loss.adversarial_loss
        )
        kl_loss, _ = composite_loss_and_gradients(
            f, g, x, y, q, DefenseConfig(Variant.UNIFORM_KL, c_weight=2.0)
        )
        assert kl_loss.objective == pytest.approx(kl_loss.class_loss + 2.0 * kl_loss.adversarial_loss)
        assert kl_loss.adversarial_loss >= 0

    def test_uniform_kl_ignores_party_labels(self):
        f, g, x, y, q = random_problem(5)
        defense = DefenseConfig(Variant.UNIFORM_KL, c_weight=2.0)
        permuted = q[:, [2, 0, 3, 1]]
        a, _ = f_step(f, g, x, y, q, defense)
        b, _ = f_step(f, g, x, y, permuted, defense)
        assert a.parameters_equal(b)

    def test_f_step_leaves_g_unchanged(self):
        f, g, x, y, q = random_problem(6)
        before = g.copy()
        f_step(f, g, x, y, q, DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=3.0))
        assert g.parameters_equal(before)

    def test_zero_weight_is_plain_gradient(self):
        f, g, x, y, q = random_problem(4)
        _, grads = composite_loss_and_gradients(
            f, g, x, y, q, DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=0.0)
        )
        _, plain = loss_and_gradients(f, Batch(x, y))
        for a, b in zip(grads.weights, plain.weights):
            assert np.array_equal(a, b)


class TestDefenseConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"c_weight": -1.0},
            {"g_steps_per_f_step": 0},
            {"feed": "logits"},
            {"variant": "mirror"},
            {"g_learning_rate": 0.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DefenseConfig(**kwargs)

    def test_variant_from_string(self):
        assert DefenseConfig(variant="uniform_kl").variant is Variant.UNIFORM_KL

    def test_discriminator_shape(self):
        f_cfg = MlpConfig((10, 32, 16, 4), learning_rate=0.02, epochs=3)
        g_cfg = DefenseConfig(seed=5).discriminator_config(f_cfg, 7)
        assert g_cfg.layer_sizes == (4, 32, 16, 7)
        assert g_cfg.learning_rate == 0.02 and g_cfg.seed == 5
        custom = DefenseConfig(g_hidden_sizes=(12,)).discriminator_config(f_cfg, 3)
        assert custom.layer_sizes == (4, 12, 3)
        faster = DefenseConfig(g_learning_rate=0.1).discriminator_config(f_cfg, 3)
        assert faster.learning_rate == 0.1 and faster.momentum == f_cfg.momentum


class TestAdversarialTrain:
    def test_zero_weight_reproduces_plain_training(self, synth_parties, small_model_cfg):
        pooled = pool(synth_parties)
        defense = DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=0.0, seed=99)
        f, _, _ = adversarial_train(pooled, small_model_cfg, defense)
        batch = to_batch(pooled)
        plain, _ = train(sized_config(small_model_cfg, batch), batch)
        assert f.parameters_equal(plain)

    def test_trace(self, synth_parties, small_model_cfg):
        defense = DefenseConfig(Variant.UNIFORM_KL, c_weight=1.0, g_steps_per_f_step=2)
        _, g, trace = adversarial_train(pool(synth_parties), small_model_cfg, defense)
        assert isinstance(trace, AdvTrainTrace)
        assert len(trace) == small_model_cfg.epochs
        assert all(0.0 <= a <= 1.0 for a in trace.g_accuracy)
        assert all(np.isfinite(trace.f_loss)) and all(np.isfinite(trace.g_loss))
        assert g.config.n_outputs == 4

    def test_deterministic(self, synth_parties, small_model_cfg):
        defense = DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=3.0, seed=1)
        a, _, _ = adversarial_train(pool(synth_parties), small_model_cfg, defense)
        b, _, _ = adversarial_train(pool(synth_parties), small_model_cfg, defense)
        assert a.parameters_equal(b)

    def test_players_alternate(self, synth_parties, small_model_cfg, monkeypatch):
        state = {}
        real_g_step = defense_module.backward_and_step
        real_f_step = defense_module.f_step

        def g_step(model, batch, *args, **kwargs):
            if "f" in state:
                assert state["f_seen"].parameters_equal(state["f"])
            new_g, loss = real_g_step(model, batch, *args, **kwargs)
            state["g"] = new_g.copy()
            state["g_steps"] = state.get("g_steps", 0) + 1
            return new_g, loss

        def f_step_checked(f, g, *args):
            assert state["g_steps"] == 2
            state["g_steps"] = 0
            if "f" in state:
                assert f.parameters_equal(state["f"])
            assert g.parameters_equal(state["g"])
            g_before = g.copy()
            new_f, losses = real_f_step(f, g, *args)
            assert g.parameters_equal(g_before)
            state["f"] = new_f.copy()
            state["f_seen"] = new_f
            return new_f, losses

        monkeypatch.setattr(defense_module, "backward_and_step", g_step)
        monkeypatch.setattr(defense_module, "f_step", f_step_checked)
        defense = DefenseConfig(Variant.ONE_HOT_PARTY, c_weight=1.0, g_steps_per_f_step=2)
        adversarial_train(pool(synth_parties), small_model_cfg, defense)
        assert "f" in state

    def test_identical_parties_leave_g_at_chance(self, synth_data, small_model_cfg):
        def two_parties(start, size):
            return [
                PartyData(
                    p,
                    synth_data.take(np.arange(start + p * size, start + (p + 1) * size)),
                    synth_data.take(np.arange(start, start + 5)),
                )
                for p in range(2)
            ]

        defense = DefenseConfig(Variant.UNIFORM_KL, c_weight=1.0, seed=2)
        f, g, _ = adversarial_train(pool(two_parties(0, 200)), small_model_cfg, defense)
        held_out = pool(two_parties(400, 250))
        outputs = f_outputs(forward(f, to_batch(held_out).features), defense.feed)
        predicted = discriminator_forward(g, outputs).argmax(axis=1)
        _, truth = party_index(held_out.party_ids)
        assert abs(np.mean(predicted == truth) - 0.5) < 0.1

    def test_needs_two_parties(self, synth_parties, small_model_cfg):
        with pytest.raises(ValueError, match="at least two parties"):
            adversarial_train(pool(synth_parties[:1]), small_model_cfg, DefenseConfig())


def test_party_index_handles_gaps():
    parties, index = party_index(np.array([5, 2, 5, 9]))
    assert parties.tolist() == [2, 5, 9]
    assert index.tolist() == [1, 0, 1, 2]


def test_probability_feed():
    logprobs = np.log(np.array([[0.25, 0.75]]))
    np.testing.assert_allclose(f_outputs(logprobs, "probabilities"), [[0.25, 0.75]])
    assert f_outputs(logprobs) is logprobs


def test_discriminator_reads_classifier_outputs():
    f, g, x, _, _ = random_problem(9)
    logprobs = discriminator_forward(g, f_outputs(forward(f, x), "log_probabilities"))
    assert logprobs.shape == (6, 4)
    np.testing.assert_allclose(np.exp(logprobs).sum(axis=1), 1.0)
