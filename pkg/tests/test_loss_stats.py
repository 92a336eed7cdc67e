import math

import numpy as np
import pytest

from learntrace.errors import ShapeError
from learntrace.pipeline import correctness_stats, sequence_loss, skewness

from conftest import feature_manifest, make_session


class TestSequenceLoss:
    def test_uniform_predictions_give_log_c(self):
        probs = np.full((3, 4, 5), 0.2)
        responses = np.ones((3, 4), dtype=int)
        assert sequence_loss(probs, responses) == pytest.approx(math.log(5), abs=1e-12)

    def test_perfect_one_hot_gives_zero(self):
        responses = np.array([[1, 2], [2, 1]])
        probs = np.zeros((2, 2, 2))
        for k in range(2):
            for t in range(2):
                probs[k, t, responses[k, t] - 1] = 1.0
        assert sequence_loss(probs, responses) == 0.0

    def test_two_learner_two_step_hand_case(self):
        # observed-response probabilities 0.5, 0.25, 0.125, 0.125
        probs = np.zeros((2, 2, 2))
        responses = np.array([[1, 1], [1, 1]])
        for (k, t), p in zip(((0, 0), (0, 1), (1, 0), (1, 1)), (0.5, 0.25, 0.125, 0.125)):
            probs[k, t] = [p, 1 - p]
        expect = -(math.log(0.5) + math.log(0.25) + math.log(0.125) * 2) / 4
        assert sequence_loss(probs, responses) == pytest.approx(expect, abs=1e-12)

    def test_zero_probability_clamped_with_counter(self):
        probs = np.zeros((1, 1, 2))
        probs[0, 0] = [1.0, 0.0]
        counter = [0]
        loss = sequence_loss(probs, np.array([[2]]), clamp_counter=counter)
        assert counter[0] == 1
        assert loss == pytest.approx(-math.log(1e-12))

    def test_invalid_distribution_rejected(self):
        probs = np.full((1, 1, 3), 0.5)
        with pytest.raises(ShapeError):
            sequence_loss(probs, np.array([[1]]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            sequence_loss(np.full((2, 3, 4), 0.25), np.ones((2, 2), dtype=int))


class TestSkewness:
    def test_symmetric_counts_are_zero(self):
        assert skewness([9, 10, 11]) == pytest.approx(0.0, abs=1e-12)
        assert skewness([1, 2, 2, 3, 3, 3, 4, 4, 5]) == pytest.approx(0.0, abs=1e-12)

    def test_matches_scipy_adjusted_skew(self):
        from scipy import stats

        rng = np.random.default_rng(0)
        x = rng.gamma(2.0, size=200)
        assert skewness(x) == pytest.approx(float(stats.skew(x, bias=False)), abs=1e-10)

    def test_fewer_than_three_is_none(self):
        assert skewness([1, 2]) is None

    def test_left_leaning_counts_negative(self):
        # many high scores, a thin low tail
        counts = [15] * 20 + [14] * 10 + [5, 4, 3]
        assert skewness(counts) < 0


class TestCorrectnessStats:
    def test_histogram_totals_match_session_count(self):
        manifest = feature_manifest()
        sessions = [make_session(manifest, f"L{i}", seed=i) for i in range(12)]
        stats = correctness_stats(sessions)
        assert sum(stats["train"]["histogram"]) == 12
        assert sum(stats["test"]["histogram"]) == 12
        assert len(stats["train"]["histogram"]) == 31
        assert len(stats["test"]["histogram"]) == 16

    def test_counts_are_per_phase(self):
        manifest = feature_manifest()
        s = make_session(manifest, seed=5)
        stats = correctness_stats([s])
        assert stats["train"]["counts"][0] == s.correct_count("train")
        assert stats["test"]["counts"][0] == s.correct_count("test")
