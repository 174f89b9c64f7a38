"""Image- and pixel-level detection metrics."""

from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from src.config.constants import IOU_CUTOFFS
from src.models.exceptions import DimensionError, UsageError


def roc_auc(
    scores: Sequence[float],
    labels: Sequence[int],
    positive_means_low_score: bool = False
) -> float:
    """Rank-based area under the ROC curve.

    P(a random positive outranks a random negative), ties counting 0.5.

    Args:
        scores: Evidence for the positive class (higher = more positive)
        labels: 1 for positives, 0 for negatives
        positive_means_low_score: Score positives by the negated scores
            (e.g. anomalous samples against a normality similarity)

    Returns:
        AUC in [0, 1]
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(bool)
    if scores.shape != labels.shape:
        raise DimensionError(f"{scores.size} scores but {labels.size} labels", axis=0)
    n_positive = int(labels.sum())
    n_negative = labels.size - n_positive
    if n_positive == 0 or n_negative == 0:
        raise UsageError("AUC is undefined unless both classes are present")

    if positive_means_low_score:
        scores = -scores
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[labels].sum())
    return (rank_sum - n_positive * (n_positive + 1) / 2.0) / (n_positive * n_negative)


def pixel_auc(heatmaps: Iterable[np.ndarray], masks: Iterable[np.ndarray]) -> float:
    """AUC over every pixel of every sample, masks as labels."""
    heatmaps = list(heatmaps)
    masks = list(masks)
    if len(heatmaps) != len(masks):
        raise DimensionError(f"{len(heatmaps)} heatmaps but {len(masks)} masks", axis=0)
    for index, (heatmap, mask) in enumerate(zip(heatmaps, masks)):
        if np.shape(heatmap) != np.shape(mask):
            raise DimensionError(
                f"sample {index}: heatmap {np.shape(heatmap)} vs mask {np.shape(mask)}"
            )
    if not heatmaps:
        raise UsageError("pixel_auc needs at least one sample")
    scores = np.concatenate([np.ravel(h) for h in heatmaps])
    labels = np.concatenate([np.ravel(m) > 0.5 for m in masks])
    if not labels.any():
        raise UsageError("pixel_auc needs at least one defect pixel")
    return roc_auc(scores, labels)


def iou(pred_mask: np.ndarray, truth_mask: np.ndarray) -> float:
    """|A & B| / |A | B|; two empty masks give 1.0."""
    pred = np.asarray(pred_mask) > 0.5
    truth = np.asarray(truth_mask) > 0.5
    if pred.shape != truth.shape:
        raise DimensionError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    union = np.logical_or(pred, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, truth).sum() / union)


def binarize(pixel_scores: np.ndarray, cutoff: float) -> np.ndarray:
    return (np.asarray(pixel_scores) >= cutoff).astype(np.float64)


def mean_iou(pixel_maps: Sequence[np.ndarray], masks: Sequence[np.ndarray], cutoff: float) -> float:
    if not pixel_maps:
        raise UsageError("mean_iou needs at least one sample")
    return float(np.mean([iou(binarize(p, cutoff), m) for p, m in zip(pixel_maps, masks)]))


def best_iou_cutoff(
    pixel_maps: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    cutoffs: Sequence[float] = IOU_CUTOFFS
) -> Tuple[float, float]:
    """Cutoff maximizing mean IoU (ties keep the smallest cutoff).

    Returns:
        (cutoff, mean IoU at that cutoff)
    """
    best_cutoff, best_value = cutoffs[0], -1.0
    for cutoff in cutoffs:
        value = mean_iou(pixel_maps, masks, cutoff)
        if value > best_value:
            best_cutoff, best_value = cutoff, value
    return best_cutoff, best_value


def precision_recall(
    pixel_maps: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    cutoff: float
) -> Tuple[float, float]:
    """Pixel precision and recall of the binarized maps, pooled over samples.

    Either value is 0.0 when its denominator is empty.
    """
    pred = np.concatenate([np.ravel(binarize(p, cutoff)) > 0.5 for p in pixel_maps])
    truth = np.concatenate([np.ravel(m) > 0.5 for m in masks])
    true_positive = float(np.logical_and(pred, truth).sum())
    precision = true_positive / pred.sum() if pred.any() else 0.0
    recall = true_positive / truth.sum() if truth.any() else 0.0
    return float(precision), float(recall)


def format_table_row(
    name: str,
    image_auc_mean: float,
    image_auc_std: float,
    pixel_auc_mean: float,
    pixel_auc_std: float
) -> str:
    """Render "name & 94.1±1.1 & 95.3±0.1" from fractions in [0, 1]."""
    return (
        f"{name} & {100 * image_auc_mean:.1f}±{100 * image_auc_std:.1f}"
        f" & {100 * pixel_auc_mean:.1f}±{100 * pixel_auc_std:.1f}"
    )
