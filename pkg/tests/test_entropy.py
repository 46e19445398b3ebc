import numpy as np
import pytest

from pycontamination.dataset import pool
from pycontamination.entropy import (
    DiscreteJoint,
    LemmaPreconditionError,
    coarsening_joint,
    conditional_entropy,
    discretize_outputs,
    entropy,
    lemma_check,
    pivot_diagnostic,
)
from pycontamination.server import train_pooled


def random_joint(rng, shape, names):
    probs = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    # sparsify some joints so zero cells are exercised
    if rng.random() < 0.3:
        probs[rng.random(shape) < 0.3] = 0.0
        if probs.sum() == 0:
            probs.flat[0] = 1.0
        probs = probs / probs.sum()
    return DiscreteJoint(probs, names)


class TestEntropy:
    def test_uniform_four(self):
        joint = DiscreteJoint(np.full(4, 0.25), ("X",))
        assert entropy(joint, "X") == 2.0

    def test_point_mass(self):
        joint = DiscreteJoint(np.array([0.0, 1.0, 0.0]), ("X",))
        assert entropy(joint, "X") == 0.0

    def test_independent_variables(self):
        joint = DiscreteJoint(np.outer([0.5, 0.5], [0.25, 0.75]), ("A", "B"))
        assert conditional_entropy(joint, "A", "B") == pytest.approx(1.0, abs=1e-12)
        assert entropy(joint, ["A", "B"]) == pytest.approx(entropy(joint, "A") + entropy(joint, "B"))

    def test_function_has_no_conditional_entropy(self):
        probs = np.zeros((3, 3))
        probs[[0, 1, 2], [1, 2, 0]] = [0.2, 0.3, 0.5]
        joint = DiscreteJoint(probs, ("A", "B"))
        assert conditional_entropy(joint, "A", "B") == pytest.approx(0.0, abs=1e-12)

    def test_conditioning_never_increases_entropy(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            shape = tuple(int(s) for s in rng.integers(1, 5, size=2))
            joint = random_joint(rng, shape, ("A", "B"))
            h_a = entropy(joint, "A")
            assert h_a >= 0
            assert conditional_entropy(joint, "A", "B") <= h_a + 1e-12

    def test_empty_variable_list(self):
        joint = DiscreteJoint(np.full(2, 0.5), ("X",))
        assert entropy(joint, []) == 0.0


class TestDiscreteJoint:
    def test_validation(self):
        with pytest.raises(ValueError, match="sum"):
            DiscreteJoint(np.array([0.5, 0.6]), ("X",))
        with pytest.raises(ValueError, match="non-negative"):
            DiscreteJoint(np.array([1.5, -0.5]), ("X",))
        with pytest.raises(ValueError, match="names"):
            DiscreteJoint(np.full(2, 0.5), ("X", "Y"))
        with pytest.raises(ValueError, match="unique"):
            DiscreteJoint(np.full((2, 2), 0.25), ("X", "X"))

    def test_unknown_variable(self):
        joint = DiscreteJoint(np.full(2, 0.5), ("X",))
        with pytest.raises(ValueError, match="unknown variables"):
            entropy(joint, "Y")

    def test_from_samples(self):
        joint = DiscreteJoint.from_samples({"Q": np.array([0, 0, 1, 1]), "F": np.array([0, 1, 0, 1])})
        np.testing.assert_allclose(joint.probs, np.full((2, 2), 0.25))
        np.testing.assert_allclose(joint.marginal(["F"]), [0.5, 0.5])

    def test_from_counts(self):
        joint = DiscreteJoint.from_counts(np.array([1, 3]), ("X",))
        np.testing.assert_allclose(joint.probs, [0.25, 0.75])
        with pytest.raises(ValueError, match="positive total"):
            DiscreteJoint.from_counts(np.zeros(2), ("X",))


class TestLemma:
    def test_random_coarsenings(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n_v, n_u, n_w = (int(s) for s in rng.integers(1, 6, size=3))
            assert lemma_check(coarsening_joint(rng, n_v, n_u, n_w))

    def test_precondition(self):
        rng = np.random.default_rng(0)
        probs = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        with pytest.raises(LemmaPreconditionError, match=r"H\(U\|V\)"):
            lemma_check(DiscreteJoint(probs, ("U", "V", "W")))


class TestPivotDiagnostic:
    def test_discretize_by_class(self):
        logprobs = np.log(np.array([[0.7, 0.3], [0.2, 0.8]]))
        assert discretize_outputs(logprobs).tolist() == [0, 1]

    def test_discretize_by_bins(self):
        logprobs = np.log(np.array([[0.7, 0.3], [0.2, 0.8], [0.0001, 0.9999]]))
        assert discretize_outputs(logprobs, bins=4).tolist() == [2, 3, 3]
        with pytest.raises(ValueError):
            discretize_outputs(logprobs, bins=0)

    def test_bounds(self, synth_parties, small_model_cfg):
        f, _, _ = train_pooled(synth_parties, small_model_cfg)
        h_q, h_q_given_f = pivot_diagnostic(f, pool(synth_parties))
        assert h_q == pytest.approx(2.0)
        assert 0.0 <= h_q_given_f <= h_q + 1e-12

    def test_needs_two_parties(self, synth_parties, small_model_cfg):
        f, _, _ = train_pooled(synth_parties, small_model_cfg)
        with pytest.raises(ValueError, match="two parties"):
            pivot_diagnostic(f, pool(synth_parties[:1]))
