"""Tests for AUC, IoU and report formatting."""

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from src.evaluation.metrics import (
    best_iou_cutoff,
    binarize,
    format_table_row,
    iou,
    mean_iou,
    pixel_auc,
    precision_recall,
    roc_auc,
)
from src.models.exceptions import DimensionError, UsageError
from tests.fixtures.factories import brute_force_auc


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_tied(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_hand_counted_with_tie(self):
        assert roc_auc([0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0]) == pytest.approx(0.875, abs=1e-12)

    def test_low_scores_as_positive(self):
        similarity = [0.1, 0.2, 0.8, 0.9]
        assert roc_auc(similarity, [1, 1, 0, 0], positive_means_low_score=True) == 1.0

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            size = int(rng.integers(2, 201))
            labels = rng.integers(0, 2, size=size)
            labels[0], labels[1] = 0, 1
            # coarse grid forces ties
            scores = rng.integers(0, 10, size=size) / 10.0
            assert roc_auc(scores, labels) == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(UsageError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            roc_auc([0.1, 0.2, 0.3], [1, 0])


@st.composite
def labelled_scores(draw):
    size = draw(st.integers(2, 30))
    scores = draw(st.lists(st.integers(-1000, 1000), min_size=size, max_size=size, unique=True))
    labels = draw(st.lists(st.integers(0, 1), min_size=size, max_size=size))
    assume(0 < sum(labels) < size)
    return np.array(scores, dtype=np.float64), np.array(labels)


@settings(max_examples=100, deadline=None)
@given(data=labelled_scores())
def test_auc_invariant_under_increasing_transform(data):
    scores, labels = data
    assert roc_auc(np.arctan(scores / 100.0) * 3 + 1, labels) == pytest.approx(roc_auc(scores, labels), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=labelled_scores())
def test_flipped_labels_complement(data):
    scores, labels = data
    assert roc_auc(scores, labels) + roc_auc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)


class TestPixelAuc:
    def test_perfect_heatmap(self):
        mask = np.zeros((4, 4))
        mask[1:3, 1:3] = 1
        assert pixel_auc([mask * 0.9 + 0.05], [mask]) == 1.0

    def test_constant_heatmap(self):
        mask = np.zeros((4, 4))
        mask[0, 0] = 1
        assert pixel_auc([np.full((4, 4), 0.3)], [mask]) == 0.5

    def test_pools_all_samples(self):
        heatmaps = [np.array([[0.9, 0.1], [0.4, 0.4]]), np.array([[0.2, 0.7], [0.0, 0.5]])]
        masks = [np.array([[1, 0], [0, 1]]), np.array([[0, 1], [0, 0]])]
        expected = brute_force_auc(
            np.concatenate([h.ravel() for h in heatmaps]), np.concatenate([m.ravel() for m in masks])
        )
        assert pixel_auc(heatmaps, masks) == pytest.approx(expected, abs=1e-12)

    def test_no_defect_pixels(self):
        with pytest.raises(UsageError):
            pixel_auc([np.ones((2, 2))], [np.zeros((2, 2))])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            pixel_auc([np.ones((2, 2))], [np.ones((3, 3))])


class TestIou:
    def test_identical(self):
        mask = np.eye(4)
        assert iou(mask, mask) == 1.0

    def test_disjoint(self):
        assert iou(np.array([[1, 0]]), np.array([[0, 1]])) == 0.0

    def test_partial_overlap(self):
        assert iou(np.array([[1, 1, 0]]), np.array([[0, 1, 1]])) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.integers(0, 2, size=(5, 5)), rng.integers(0, 2, size=(5, 5))
        assert iou(a, b) == iou(b, a)

    def test_binarize_includes_cutoff(self):
        np.testing.assert_array_equal(binarize(np.array([0.2, 0.5, 0.7]), 0.5), [0.0, 1.0, 1.0])


class TestCutoffSweep:
    def test_best_cutoff_recovers_mask(self):
        mask = np.zeros((4, 4))
        mask[:2] = 1
        pixels = mask * 0.6 + 0.2
        cutoff, value = best_iou_cutoff([pixels], [mask])
        assert value == 1.0
        assert 0.2 < cutoff <= 0.8

    def test_ties_keep_smallest_cutoff(self):
        mask = np.array([[1.0, 0.0]])
        cutoff, value = best_iou_cutoff([np.array([[1.0, 0.0]])], [mask], cutoffs=[0.3, 0.5, 0.7])
        assert (cutoff, value) == (0.3, 1.0)

    def test_mean_iou_averages_samples(self):
        masks = [np.array([[1.0, 0.0]]), np.array([[1.0, 1.0]])]
        pixels = [np.array([[0.9, 0.0]]), np.array([[0.9, 0.0]])]
        assert mean_iou(pixels, masks, 0.5) == pytest.approx(0.75)

    def test_precision_recall_pooled(self):
        masks = [np.array([[1.0, 1.0, 0.0, 0.0]])]
        pixels = [np.array([[0.9, 0.1, 0.8, 0.0]])]
        assert precision_recall(pixels, masks, 0.5) == (0.5, 0.5)

    def test_precision_without_predictions(self):
        assert precision_recall([np.zeros((2, 2))], [np.ones((2, 2))], 0.5) == (0.0, 0.0)


def test_format_table_row():
    assert format_table_row("CLAD", 0.941, 0.011, 0.953, 0.001) == "CLAD & 94.1±1.1 & 95.3±0.1"
