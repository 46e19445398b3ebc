import numpy as np
import pandas as pd
import pytest
from scipy import stats

from pycontamination.attack import AttackSpec, distribute_contamination
from pycontamination.dataset import LABEL_COLUMN, Dataset, PartyData, Record
from pycontamination.detectors import (
    LooVerdict,
    SparseTableError,
    chi_square_independence,
    chi_square_table,
    flag_lowest_party,
    loo_cross_validation,
    pairwise_chi_square,
    pool_sparse_columns,
    value_counts,
)
from pycontamination.nn_core import MlpConfig
from pycontamination.text import BowCorpus


def with_color_counts(schema, counts):
    records = []
    for color, n in enumerate(counts):
        records.extend(Record((color, 0, 1.0), 0) for _ in range(n))
    return Dataset.from_records(schema, records)


class TestChiSquareTable:
    def test_reference_value(self):
        statistic, p_value, df = chi_square_table(np.array([[20, 30], [30, 20]]))
        assert statistic == pytest.approx(4.0, abs=1e-12)
        assert p_value == pytest.approx(0.0455, abs=1e-3)
        assert df == 1

    def test_identical_rows(self):
        statistic, p_value, _ = chi_square_table(np.array([[10, 20, 30], [10, 20, 30]]))
        assert statistic == 0.0
        assert p_value == 1.0

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        table = rng.integers(5, 60, size=(int(rng.integers(2, 4)), int(rng.integers(2, 6))))
        statistic, p_value, df = chi_square_table(table)
        expected = stats.chi2_contingency(table, correction=False)
        assert statistic == pytest.approx(expected[0], rel=1e-9)
        assert p_value == pytest.approx(expected[1], abs=1e-9)
        assert df == expected[2]

    def test_pooling(self):
        table = np.array([[30, 2, 1, 25], [28, 0, 1, 31]])
        pooled = pool_sparse_columns(table)
        np.testing.assert_array_equal(pooled, [[30, 25, 3], [28, 31, 1]])

    def test_pooling_drops_empty_columns(self):
        table = np.array([[30, 0, 25], [28, 0, 31]])
        np.testing.assert_array_equal(pool_sparse_columns(table), [[30, 25], [28, 31]])

    def test_single_column_left(self):
        with pytest.raises(SparseTableError, match="merge categories"):
            chi_square_table(np.array([[40, 0, 0], [30, 0, 0]]))

    def test_empty_row(self):
        with pytest.raises(SparseTableError):
            chi_square_table(np.array([[0, 0], [30, 20]]))


class TestIndependence:
    def test_between_datasets(self, tiny_schema):
        a = with_color_counts(tiny_schema, [20, 30, 0])
        b = with_color_counts(tiny_schema, [30, 20, 0])
        result = chi_square_independence(a, b, "color")
        assert result.statistic == pytest.approx(4.0)
        assert result.p_value == pytest.approx(0.0455, abs=1e-3)

    def test_detects_contaminated_party(self, synth_parties):
        spec = AttackSpec(0, 60, frozenset({0}), ((1, 1),))
        parties = distribute_contamination(synth_parties, spec, seed=0)
        clean = chi_square_independence(parties[1].train, parties[2].train, "cat_1")
        attacked = chi_square_independence(parties[0].train, parties[1].train, "cat_1")
        assert attacked.p_value < 0.01
        assert attacked.p_value < clean.p_value

    def test_numeric_attribute(self, tiny_dataset):
        with pytest.raises(ValueError, match="categorical"):
            value_counts(tiny_dataset, "weight")

    def test_token_counts(self):
        corpus = BowCorpus(("ball", "zebra"), ("a", "b"), [[1, 1], [2, 0], [0, 3]], [0, 0, 1])
        assert value_counts(corpus, "zebra").tolist() == [1, 2]


class TestPairwise:
    def test_table(self, synth_parties):
        table = pairwise_chi_square(synth_parties, "cat_0", attackers=frozenset({0}))
        assert len(table) == 6
        assert list(table.columns) == [
            "party_a", "party_b", "attacker_a", "attacker_b", "statistic", "p_value", "notes"
        ]
        assert table["attacker_a"].sum() == 3
        assert table["p_value"].between(0, 1).all()

    def test_sparse_pairs_get_notes(self, tiny_schema):
        parties = [
            PartyData(i, with_color_counts(tiny_schema, counts), with_color_counts(tiny_schema, [1, 0, 0]))
            for i, counts in enumerate([[3, 0, 0], [2, 0, 0], [20, 30, 0]])
        ]
        table = pairwise_chi_square(parties, "color")
        first = table.iloc[0]
        assert np.isnan(first["p_value"])
        assert "merge categories" in first["notes"]


class TestLeaveOneOut:
    def test_table(self, synth_parties, small_model_cfg):
        table = loo_cross_validation(synth_parties, small_model_cfg)
        assert table.index.tolist() == [0, 1, 2, 3]
        assert table["n_records"].tolist() == [100] * 4
        assert table["heldout_accuracy"].between(0, 1).all()

    def test_fully_contaminated_party_scores_lowest(self, synth_parties):
        frame = synth_parties[3].train.frame.copy()
        frame["cat_0"] = 1
        frame[LABEL_COLUMN] = (frame[LABEL_COLUMN] + 1) % 3
        parties = synth_parties[:3] + [
            PartyData(3, synth_parties[3].train.with_frame(frame), synth_parties[3].val)
        ]
        model_cfg = MlpConfig((1, 16, 2), learning_rate=0.05, epochs=10, batch_size=16, seed=5)
        table = loo_cross_validation(parties, model_cfg)
        assert flag_lowest_party(table).party_id == 3

    def test_needs_three_parties(self, synth_parties, small_model_cfg):
        with pytest.raises(ValueError, match="three parties"):
            loo_cross_validation(synth_parties[:2], small_model_cfg)

    def test_flag_lowest(self):
        table = pd.DataFrame(
            {"heldout_accuracy": [0.8, 0.5, 0.9, 0.7]}, index=pd.Index([0, 1, 2, 3], name="party_id")
        )
        verdict = flag_lowest_party(table)
        assert verdict == LooVerdict(1, 0.5, pytest.approx(0.25))
