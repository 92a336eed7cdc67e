import numpy as np
import pytest

from learntrace.errors import ConfigError
from learntrace.pipeline import (
    aggregate_reports,
    ap_report_from_probs,
    average_precision,
    gt_label_probs,
)


def brute_force_ap(scored):
    """Independent oracle: walk every prefix of the stable descending-score
    ranking and integrate precision over recall steps."""
    scored = list(scored)
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])  # stable
    flags = [bool(scored[i][1]) for i in order]
    n_pos = sum(flags)
    if n_pos == 0:
        return None
    ap = 0.0
    prev_recall = 0.0
    hits = 0
    for k in range(1, len(flags) + 1):
        hits += flags[k - 1]
        precision = hits / k
        recall = hits / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


class TestAveragePrecision:
    def test_perfect_separation_is_one(self):
        scored = [(0.9, True), (0.8, True), (0.3, False), (0.1, False)]
        assert average_precision(scored) == 1.0

    def test_three_point_hand_case(self):
        scored = [(0.9, True), (0.8, False), (0.7, True)]
        assert average_precision(scored) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-12)

    def test_all_equal_scores_follow_input_order(self):
        scored = [(0.5, False), (0.5, True), (0.5, True), (0.5, False)]
        assert average_precision(scored) == pytest.approx(brute_force_ap(scored), abs=1e-12)

    def test_no_positives_is_none(self):
        assert average_precision([(0.2, False), (0.9, False)]) is None

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 21))
            scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)  # ties likely
            flags = rng.uniform(size=n) < 0.4
            scored = list(zip(scores, flags))
            expect = brute_force_ap(scored)
            got = average_precision(scored)
            if expect is None:
                assert got is None
            else:
                assert got == pytest.approx(expect, abs=1e-9)


class TestReports:
    def test_micro_macro_hand_case(self):
        # two learners, one step, two classes; scores chosen so the per-class
        # rankings are unambiguous
        probs = np.array([[[0.9, 0.1]], [[0.2, 0.8]]])
        responses = np.array([[1], [2]])
        report = ap_report_from_probs(probs, responses, "test_sequence")
        assert report.per_class == [1.0, 1.0]
        assert report.macro == 1.0
        assert report.micro == 1.0

    def test_macro_is_unweighted_mean_excluding_absent_classes(self):
        probs = np.array([[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3]]])
        responses = np.array([[1, 1]])  # class 2 and 3 never chosen
        report = ap_report_from_probs(probs, responses, "train_sequence")
        assert report.per_class[1] is None and report.per_class[2] is None
        assert report.macro == report.per_class[0]

    def test_micro_equals_macro_under_full_symmetry(self):
        # the two classes see mirrored scores and equal positive counts
        probs = np.array([[[0.7, 0.3]], [[0.3, 0.7]]])
        responses = np.array([[1], [2]])
        report = ap_report_from_probs(probs, responses, "test_sequence")
        assert report.micro == pytest.approx(report.macro, abs=1e-12)

    def test_probabilistic_scores_against_brute_force(self):
        rng = np.random.default_rng(3)
        probs = rng.dirichlet(np.ones(3), size=(4, 7))
        responses = rng.integers(1, 4, size=(4, 7))
        report = ap_report_from_probs(probs, responses, "train_sequence")
        flat = probs.reshape(-1, 3)
        resp = responses.reshape(-1)
        for cls in (1, 2, 3):
            scored = list(zip(flat[:, cls - 1], resp == cls))
            assert report.per_class[cls - 1] == pytest.approx(brute_force_ap(scored), abs=1e-9)


class TestGtLabelBaseline:
    def test_distribution_is_exactly_one_hot(self):
        labels = np.array([[1, 3], [2, 2]])
        probs = gt_label_probs(labels, 3)
        np.testing.assert_array_equal(probs.sum(axis=-1), 1.0)
        assert set(np.unique(probs)) == {0.0, 1.0}

    def test_always_correct_learner_scores_one(self):
        labels = np.array([[1, 2, 3, 1]])
        probs = gt_label_probs(labels, 3)
        report = ap_report_from_probs(probs, labels, "test_sequence")
        assert report.micro == 1.0

    def test_never_correct_matches_brute_force(self):
        labels = np.array([[1, 1, 2]])
        responses = np.array([[2, 2, 1]])
        probs = gt_label_probs(labels, 3)
        report = ap_report_from_probs(probs, responses, "test_sequence")
        flat = probs.reshape(-1, 3)
        resp = responses.reshape(-1)
        for cls in (1, 2):
            expect = brute_force_ap(list(zip(flat[:, cls - 1], resp == cls)))
            assert report.per_class[cls - 1] == pytest.approx(expect, abs=1e-12)


class TestAggregation:
    def test_identical_runs_have_zero_sd(self):
        probs = np.random.default_rng(0).dirichlet(np.ones(3), size=(5, 45))
        responses = np.random.default_rng(1).integers(1, 4, size=(5, 45))
        r = ap_report_from_probs(probs, responses, "test_sequence")
        agg = aggregate_reports([r, r, r])
        assert agg.micro_sd == 0.0 and agg.macro_sd == 0.0
        assert agg.n_runs == 3
        assert agg.micro == r.micro

    def test_empty_aggregate_rejected(self):
        with pytest.raises(ConfigError):
            aggregate_reports([])
