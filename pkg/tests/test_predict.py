import numpy as np
import pytest

from topicflow.errors import DataError
from topicflow.events import EventGroup
from topicflow.predict import (
    FeatureRow,
    build_features,
    decide_retention,
    evaluate,
    feature_matrix,
    purposeful_selection,
    split_by_year,
)
from topicflow.scoring import InterdisciplinarityScore
from topicflow.synth import gen_feature_table


def score(pid, cluster, weak=False, id_text=None, id_net=0.0, year=2011):
    return InterdisciplinarityScore(
        paper_id=pid, year=year, cluster_id=cluster, is_weak=weak,
        id_text=id_text, id_network=id_net,
    )


class TestBuildFeatures:
    def test_means_match_hand_arithmetic(self):
        scores = [
            score("a", 0, id_text=0.2, id_net=0.4),
            score("b", 0, id_text=0.4, id_net=0.8),
            score("w1", 0, weak=True, id_net=0.5),
            score("c", 1, id_text=0.9, id_net=0.1),
        ]
        groups = {0: EventGroup.DYNAMIC, 1: EventGroup.STABLE}
        rows = build_features(2011, None, scores, groups)
        r0 = next(r for r in rows if r.cluster_id == 0)
        assert r0.n_strong == 2 and r0.n_weak == 1
        assert r0.mean_id_text_strong == pytest.approx(0.3)
        assert r0.mean_id_net_strong == pytest.approx(0.6)
        assert r0.mean_id_net_weak == pytest.approx(0.5)
        assert r0.weak_imputed == 0
        assert r0.label == 1

    def test_no_weak_members_imputed_zero_with_flag(self):
        scores = [score("a", 0, id_text=0.5, id_net=0.2)]
        rows = build_features(2011, None, scores, {0: EventGroup.STABLE})
        assert rows[0].n_weak == 0
        assert rows[0].mean_id_net_weak == 0.0
        assert rows[0].weak_imputed == 1
        assert rows[0].label == 0

    def test_death_labels_zero(self):
        scores = [score("a", 0, id_text=0.5)]
        rows = build_features(2011, None, scores, {0: EventGroup.STABLE})
        assert rows[0].label == 0

    def test_cluster_without_strong_members_dropped(self, caplog):
        scores = [score("w", 0, weak=True)]
        with caplog.at_level("WARNING"):
            rows = build_features(2011, None, scores, {0: EventGroup.DYNAMIC})
        assert rows == []
        assert "dropped" in caplog.text

    def test_excluded_group_not_emitted(self):
        scores = [score("a", 0, id_text=0.5)]
        rows = build_features(2011, None, scores, {0: EventGroup.EXCLUDED})
        assert rows == []


class TestEvaluate:
    def test_perfect_prediction(self):
        m = evaluate([1, 0, 1], [1, 0, 1])
        assert m.micro_f1 == 1.0

    def test_hand_confusion_matrix(self):
        m = evaluate([1, 1, 0, 0], [1, 0, 0, 0])
        assert m.micro_f1 == pytest.approx(0.75)
        assert m.f1_per_class[1] == pytest.approx(2 / 3, abs=1e-4)
        assert m.confusion.tolist() == [[2, 0], [1, 1]]

    def test_one_class_prediction_balanced_truth(self):
        m = evaluate([1, 0, 1, 0], [1, 1, 1, 1])
        assert m.micro_f1 == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            evaluate([1, 0], [1])


class TestSplitByYear:
    def rows(self):
        return [
            FeatureRow(cluster_id=i, year=y, n_strong=5, n_weak=1,
                       mean_id_text_strong=0.1, mean_id_net_strong=0.1,
                       mean_id_net_weak=0.1, weak_imputed=0, label=i % 2)
            for i, y in enumerate([2011, 2012, 2012, 2013, 2018])
        ]

    def test_partition_is_disjoint_and_complete(self):
        rows = self.rows()
        train, test = split_by_year(rows, [2011, 2012, 2013], 2018)
        assert len(train) == 4 and len(test) == 1
        assert {id(r) for r in train} | {id(r) for r in test} == {id(r) for r in rows}
        assert not ({id(r) for r in train} & {id(r) for r in test})

    def test_missing_test_year_is_error(self):
        with pytest.raises(DataError):
            split_by_year(self.rows(), [2011], 1999)

    def test_empty_train_is_error(self):
        with pytest.raises(DataError):
            split_by_year(self.rows(), [1990], 2018)


class TestPurposefulSelection:
    def test_mocked_pvalue_table_decision_logic(self):
        names = ["weak_count", "net_weak", "net_strong", "lang"]
        coef_p = {"weak_count": 0.002, "net_weak": 0.436, "net_strong": 0.051,
                  "lang": 0.023}
        ame_p = {"weak_count": 0.001, "net_weak": 0.434, "net_strong": 0.046,
                 "lang": 0.019}
        kept = decide_retention(names, coef_p, ame_p, alpha=0.05)
        assert "net_weak" not in kept          # both p-values >= 0.05
        assert "net_strong" in kept            # rescued by its marginal effect
        assert kept == ["weak_count", "net_strong", "lang"]

    def test_all_significant_keeps_full_set(self):
        names = ["a", "b"]
        kept = decide_retention(names, {"a": 0.01, "b": 0.02},
                                {"a": 0.5, "b": 0.7})
        assert kept == names

    def test_end_to_end_drops_noise_feature(self):
        rng = np.random.default_rng(0)
        _, X, y = gen_feature_table(np.array([1.2, -1.0]), 4000, seed=2)
        noise = rng.normal(size=(4000, 1))
        X_full = np.hstack([X, noise])
        names = ["signal_a", "signal_b", "noise"]
        retained, initial, final, _, _ = purposeful_selection(X_full, y, names)
        assert "signal_a" in retained and "signal_b" in retained
        assert "noise" not in retained
        assert not initial.standardized
        assert final.standardized
        assert final.feature_names == ["const"] + retained


def test_feature_matrix_columns():
    rows = [FeatureRow(cluster_id=0, year=2011, n_strong=5, n_weak=2,
                       mean_id_text_strong=0.3, mean_id_net_strong=0.2,
                       mean_id_net_weak=0.1, weak_imputed=0, label=1)]
    X, y, names = feature_matrix(rows)
    assert X.shape == (1, 6)
    assert y.tolist() == [1.0]
    X2, _, _ = feature_matrix(rows, ["n_weak", "year"])
    assert X2.tolist() == [[2.0, 2011.0]]
    with pytest.raises(DataError):
        feature_matrix(rows, ["nope"])
