"""Tests for transductive prediction with confidence."""

import pytest

from learnkit.dataset import Dataset, from_arrays
from learnkit.errors import DataError
from learnkit.svm import KernelSpec, predict, train
from learnkit.transduce import (
    TransductiveVerdict,
    Verdict,
    batch_transduce,
    classify_with_confidence,
    format_verdicts,
)

from conftest import gaussian_clusters

LINEAR = KernelSpec.linear()


def expected_confidence(v: TransductiveVerdict, l: int) -> float:
    if v.label is Verdict.WHITE:
        return 1.0 - v.sv_count_black / l
    return 1.0 - v.sv_count_white / l


class TestVerdict:
    """Test TransductiveVerdict invariants."""

    def test_none_has_no_confidence(self):
        """Test NONE carries no confidence."""
        with pytest.raises(ValueError, match="confidence must be present"):
            TransductiveVerdict(Verdict.NONE, 0.5, 2, 2, True, True)

    def test_label_needs_confidence(self):
        """Test BLACK and WHITE carry a confidence."""
        with pytest.raises(ValueError, match="confidence must be present"):
            TransductiveVerdict(Verdict.BLACK, None, 2, 3, False, True)

    def test_confidence_range(self):
        """Test confidences outside [0, 1]."""
        with pytest.raises(ValueError, match="outside"):
            TransductiveVerdict(Verdict.WHITE, 1.5, 2, 3, True, False)

    def test_labels_match_class_names(self):
        """Test verdict labels are the names written to the TSV."""
        assert [v.value for v in Verdict] == ["BLACK", "WHITE", "NONE"]


class TestClassifyWithConfidence:
    """Test classify_with_confidence."""

    def test_symmetric_fixture_is_none(self):
        """Test a query at the centre of mirror-image clusters."""
        train_set = from_arrays([[-2.0], [-1.0], [1.0], [2.0]], [1, 1, -1, -1])

        verdict = classify_with_confidence(train_set, [0.0], LINEAR)

        assert verdict.label is Verdict.NONE
        assert verdict.confidence is None
        assert verdict.in_sv_black and verdict.in_sv_white
        assert verdict.sv_count_black == verdict.sv_count_white

    def test_deep_in_white_cluster(self, line_clusters):
        """Test a query inside the WHITE cluster."""
        verdict = classify_with_confidence(line_clusters, [1.5], LINEAR)

        assert verdict.label is Verdict.WHITE
        assert verdict.in_sv_black
        assert not verdict.in_sv_white
        assert verdict.confidence == 1.0 - verdict.sv_count_black / 21
        assert not verdict.fallback

    def test_deep_in_black_cluster(self, line_clusters):
        """Test a query inside the BLACK cluster."""
        verdict = classify_with_confidence(line_clusters, [-4.0], LINEAR)

        assert verdict.label is Verdict.BLACK
        assert verdict.confidence == 1.0 - verdict.sv_count_white / 21

    def test_duplicate_of_interior_point(self, line_clusters):
        """Test a query equal to an interior WHITE training point."""
        verdict = classify_with_confidence(line_clusters, [5.0], LINEAR)

        assert verdict.label is Verdict.WHITE
        assert not verdict.in_sv_white

    def test_counts_include_query(self, line_clusters):
        """Test the query is counted in the picture where it is an SV."""
        verdict = classify_with_confidence(line_clusters, [1.5], LINEAR)
        assert verdict.sv_count_black >= 1

    def test_deterministic(self, line_clusters):
        """Test identical inputs give identical verdicts."""
        first = classify_with_confidence(line_clusters, [0.3], LINEAR)
        second = classify_with_confidence(line_clusters, [0.3], LINEAR)
        assert first == second

    def test_single_class(self):
        """Test a training set with one class."""
        train_set = from_arrays([[1.0], [2.0]], [1, 1])
        with pytest.raises(DataError):
            classify_with_confidence(train_set, [0.0], LINEAR)

    def test_dimension_mismatch(self, line_clusters):
        """Test a query of the wrong length."""
        with pytest.raises(DataError, match="Dimension mismatch"):
            classify_with_confidence(line_clusters, [1.0, 2.0], LINEAR)

    def test_duplicating_interior_points_keeps_flags(self, line_clusters):
        """Test extra copies of non-support points leave memberships alone."""
        bigger = line_clusters
        for example in (line_clusters[9], line_clusters[19]):
            bigger = bigger.extended(example)

        for query in ([1.5], [-3.0], [0.2]):
            before = classify_with_confidence(line_clusters, query, LINEAR)
            after = classify_with_confidence(bigger, query, LINEAR)
            assert (before.in_sv_black, before.in_sv_white) == (
                after.in_sv_black,
                after.in_sv_white,
            )


class TestBatchTransduce:
    """Test batch_transduce and its output."""

    def test_empty_test_set(self, line_clusters):
        """Test nothing in, nothing out."""
        empty = Dataset(line_clusters.attribute_names, ())
        assert batch_transduce(line_clusters, empty, LINEAR) == []

    def test_single_point(self, line_clusters):
        """Test one point matches the single-point call."""
        test = from_arrays([[1.5]], [-1])

        verdicts = batch_transduce(line_clusters, test, LINEAR)

        assert verdicts == [classify_with_confidence(line_clusters, [1.5], LINEAR)]

    def test_workers_keep_order(self, line_clusters):
        """Test concurrent evaluation returns the sequential result."""
        test = from_arrays([[-5.0], [0.5], [4.0], [-0.5]], [1, -1, -1, 1])

        sequential = batch_transduce(line_clusters, test, LINEAR)
        concurrent = batch_transduce(line_clusters, test, LINEAR, workers=3)

        assert concurrent == sequential

    def test_dimension_mismatch(self, line_clusters):
        """Test test sets of another width."""
        test = from_arrays([[1.0, 1.0]], [1])
        with pytest.raises(DataError, match="Dimension mismatch"):
            batch_transduce(line_clusters, test, LINEAR)

    def test_separable_benchmark(self):
        """Test accuracy of the labelled verdicts on separable clusters."""
        train_set = gaussian_clusters(seed=2024, n=20)
        test = gaussian_clusters(seed=2025, n=20)

        verdicts = batch_transduce(train_set, test, LINEAR)

        labelled = [
            (v, ex.label) for v, ex in zip(verdicts, test) if v.label is not Verdict.NONE
        ]
        assert labelled
        correct = sum(
            1
            for v, label in labelled
            if v.label is (Verdict.BLACK if label == "+1" else Verdict.WHITE)
        )
        assert correct / len(labelled) >= 0.95

        l = len(train_set) + 1
        for v, _ in labelled:
            if not v.fallback:
                assert v.confidence == expected_confidence(v, l)
            assert 0.0 <= v.confidence <= 1.0

    def test_high_confidence_agrees_with_inductive(self):
        """Test confident verdicts agree with the SVM trained on the base set."""
        train_set = gaussian_clusters(seed=7, n=40)
        test = gaussian_clusters(seed=8, n=10)
        base = train(train_set, LINEAR)

        for v, example in zip(batch_transduce(train_set, test, LINEAR), test):
            if v.confidence is not None and v.confidence > 0.9:
                positive = predict(base, example.features) > 0
                expected = Verdict.BLACK if positive else Verdict.WHITE
                assert v.label is expected

    def test_format(self):
        """Test the TSV rendering."""
        verdicts = [
            TransductiveVerdict(Verdict.WHITE, 0.9, 2, 3, True, False),
            TransductiveVerdict(Verdict.NONE, None, 2, 2, True, True),
        ]

        assert format_verdicts(verdicts) == (
            "index\tlabel\tconfidence\tsv_black\tsv_white\tfallback\n"
            "0\tWHITE\t0.900000\t2\t3\t0\n"
            "1\tNONE\t\t2\t2\t0\n"
        )
